"""
Regression tree learner used as the weak learner of the boosted ensemble.

Split search works on an exact-value histogram: every distinct value of a
column gets its own bin, so candidate thresholds are exactly the midpoints
between consecutive distinct values present at a node.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_MIN_SAMPLES_LEAF = 5
GAIN_EPSILON = 1e-10
LEAF = -1


@dataclass(frozen=True)
class BinnedMatrix:
    """
    Column-wise exact binning of a feature matrix.

    Every column owns a block of slots: the first slot of the block collects
    missing cells, the following ones hold the column's sorted distinct
    values. ``codes[i, j]`` is the global slot of cell (i, j).
    """

    codes: np.ndarray
    slot_values: np.ndarray
    slot_feature: np.ndarray
    offsets: np.ndarray

    @property
    def n_rows(self) -> int:
        return int(self.codes.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.codes.shape[1])

    @property
    def n_slots(self) -> int:
        return int(self.slot_values.shape[0])


def bin_matrix(X: np.ndarray) -> BinnedMatrix:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    n, d = X.shape
    codes = np.empty((n, d), dtype=np.int64)
    slot_values: List[np.ndarray] = []
    offsets = np.empty(d, dtype=np.int64)
    start = 0
    for j in range(d):
        column = X[:, j]
        present = ~np.isnan(column)
        distinct = np.unique(column[present])
        offsets[j] = start
        codes[:, j] = start
        codes[present, j] = start + 1 + np.searchsorted(distinct, column[present])
        slot_values.append(np.concatenate(([np.nan], distinct)))
        start += 1 + len(distinct)
    values = np.concatenate(slot_values) if slot_values else np.empty(0)
    feature = (
        np.repeat(np.arange(d), [len(v) for v in slot_values])
        if d
        else np.empty(0, np.int64)
    )
    return BinnedMatrix(codes=codes, slot_values=values, slot_feature=feature, offsets=offsets)


@dataclass(frozen=True)
class RegressionTree:
    """
    Binary tree stored as flat arrays in depth-first pre-order.

    Internal nodes send ``x <= threshold`` to ``left``; missing cells go left
    when ``missing_left`` is set. Leaves have ``feature == -1``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    missing_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    n_rows: np.ndarray

    def __post_init__(self) -> None:
        internal = self.feature != LEAF
        if np.any((self.left[internal] < 0) | (self.right[internal] < 0)):
            raise ValueError("internal nodes need two children")
        if np.any(self.gain[internal] < 0):
            raise ValueError("split gain must be non-negative")

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def n_splits(self) -> int:
        return int(np.count_nonzero(self.feature != LEAF))

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max()) if self.n_nodes else 0

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf id reached by every row of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            current = node[rows]
            cells = X[rows, self.feature[current]]
            go_left = np.where(
                np.isnan(cells), self.missing_left[current], cells <= self.threshold[current]
            )
            node[rows] = np.where(go_left, self.left[current], self.right[current])
            active = self.feature[node] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def scaled(self, factor: float) -> "RegressionTree":
        return RegressionTree(
            feature=self.feature,
            threshold=self.threshold,
            missing_left=self.missing_left,
            left=self.left,
            right=self.right,
            value=self.value * factor,
            gain=self.gain,
            n_rows=self.n_rows,
        )


@dataclass
class _Split:
    feature: int
    slot: int
    threshold: float
    missing_left: bool
    gain: float


class _TreeGrower:
    def __init__(
        self,
        binned: BinnedMatrix,
        gradients: np.ndarray,
        hessians: np.ndarray,
        max_depth: int,
        min_samples_leaf: int,
    ) -> None:
        self.binned = binned
        self.g = gradients
        self.h = hessians
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.is_missing_slot = np.zeros(binned.n_slots, dtype=bool)
        self.is_missing_slot[binned.offsets] = True
        self.nodes: List[List[float]] = []
        self.leaf_of_row = np.full(binned.n_rows, -1, dtype=np.int64)

    def histogram(self, rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        codes = self.binned.codes[rows].ravel()
        weights = np.repeat(self.g[rows], self.binned.n_features)
        G = np.bincount(codes, weights=weights, minlength=self.binned.n_slots)
        N = np.bincount(codes, minlength=self.binned.n_slots).astype(np.float64)
        return G, N

    def find_split(self, rows: np.ndarray, G: np.ndarray, N: np.ndarray) -> Optional[_Split]:
        n = len(rows)
        leaf = self.min_samples_leaf
        if n < 2 * leaf:
            return None
        b = self.binned
        occupied = np.flatnonzero((N > 0) & ~self.is_missing_slot)
        if len(occupied) < 2:
            return None
        current, following = occupied[:-1], occupied[1:]
        same = b.slot_feature[current] == b.slot_feature[following]
        current, following = current[same], following[same]
        if len(current) == 0:
            return None

        feature = b.slot_feature[current]
        cum_G, cum_N = np.cumsum(G), np.cumsum(N)
        start = b.offsets[feature]
        # prefix over the value slots of the feature, missing slot excluded
        GL = cum_G[current] - cum_G[start]
        NL = cum_N[current] - cum_N[start]
        Gm, Nm = G[start], N[start]
        G_total = float(self.g[rows].sum())
        parent = G_total * G_total / n

        def gains(gl: np.ndarray, nl: np.ndarray) -> np.ndarray:
            gr, nr = G_total - gl, n - nl
            valid = (nl >= leaf) & (nr >= leaf)
            with np.errstate(divide="ignore", invalid="ignore"):
                score = gl * gl / nl + gr * gr / nr - parent
            return np.where(valid, score, -np.inf)

        gain_right = gains(GL, NL)
        gain_left = gains(GL + Gm, NL + Nm)
        missing_left = gain_left >= gain_right
        best_per_candidate = np.where(missing_left, gain_left, gain_right)
        best = float(best_per_candidate.max())
        if not np.isfinite(best) or best <= GAIN_EPSILON:
            return None
        pick = int(np.argmax(best_per_candidate >= best - GAIN_EPSILON * max(1.0, abs(best))))

        lower = float(b.slot_values[current[pick]])
        upper = float(b.slot_values[following[pick]])
        threshold = (lower + upper) / 2.0
        if not threshold < upper:
            threshold = lower
        return _Split(
            feature=int(feature[pick]),
            slot=int(current[pick]),
            threshold=threshold,
            missing_left=bool(missing_left[pick]),
            gain=max(float(best_per_candidate[pick]), 0.0),
        )

    def _add_node(self) -> int:
        self.nodes.append([LEAF, np.nan, 1.0, -1, -1, 0.0, 0.0, 0])
        return len(self.nodes) - 1

    def grow(
        self,
        rows: np.ndarray,
        depth: int,
        hist: Optional[Tuple[np.ndarray, np.ndarray]],
    ) -> int:
        node = self._add_node()
        split: Optional[_Split] = None
        if depth < self.max_depth:
            G, N = hist if hist is not None else self.histogram(rows)
            split = self.find_split(rows, G, N)
        if split is None:
            value = -float(self.g[rows].sum()) / float(self.h[rows].sum())
            self.nodes[node][5] = value
            self.nodes[node][7] = len(rows)
            self.leaf_of_row[rows] = node
            return node

        codes = self.binned.codes[rows, split.feature]
        missing_slot = self.binned.offsets[split.feature]
        goes_left = np.where(codes == missing_slot, split.missing_left, codes <= split.slot)
        left_rows, right_rows = rows[goes_left], rows[~goes_left]

        # histogram of the smaller child, the sibling by subtraction
        left_hist: Optional[Tuple[np.ndarray, np.ndarray]] = None
        right_hist: Optional[Tuple[np.ndarray, np.ndarray]] = None
        if depth + 1 < self.max_depth:
            if len(left_rows) <= len(right_rows):
                left_hist = self.histogram(left_rows)
                right_hist = (G - left_hist[0], N - left_hist[1])
            else:
                right_hist = self.histogram(right_rows)
                left_hist = (G - right_hist[0], N - right_hist[1])

        record = self.nodes[node]
        record[0] = split.feature
        record[1] = split.threshold
        record[2] = 1.0 if split.missing_left else 0.0
        record[6] = split.gain
        record[7] = len(rows)
        record[3] = self.grow(left_rows, depth + 1, left_hist)
        record[4] = self.grow(right_rows, depth + 1, right_hist)
        return node

    def tree(self) -> RegressionTree:
        table = self.nodes
        return RegressionTree(
            feature=np.array([int(r[0]) for r in table], dtype=np.int64),
            threshold=np.array([r[1] for r in table], dtype=np.float64),
            missing_left=np.array([bool(r[2]) for r in table], dtype=bool),
            left=np.array([int(r[3]) for r in table], dtype=np.int64),
            right=np.array([int(r[4]) for r in table], dtype=np.int64),
            value=np.array([r[5] for r in table], dtype=np.float64),
            gain=np.array([r[6] for r in table], dtype=np.float64),
            n_rows=np.array([int(r[7]) for r in table], dtype=np.int64),
        )


def grow_tree(
    binned: BinnedMatrix,
    gradients: np.ndarray,
    hessians: np.ndarray,
    max_depth: int,
    min_samples_leaf: int = DEFAULT_MIN_SAMPLES_LEAF,
) -> Tuple[RegressionTree, np.ndarray]:
    """
    Fit a tree on pre-binned rows.

    Returns:
        The tree and the leaf id of every training row.
    """
    gradients = np.asarray(gradients, dtype=np.float64)
    hessians = np.asarray(hessians, dtype=np.float64)
    if binned.n_rows == 0:
        raise ValueError("cannot fit a tree on zero rows")
    if len(gradients) != binned.n_rows or len(hessians) != binned.n_rows:
        raise ValueError("gradients and hessians must have one entry per row")
    if np.any(hessians <= 0):
        raise ValueError("hessians must be positive")
    grower = _TreeGrower(binned, gradients, hessians, max_depth, min_samples_leaf)
    grower.grow(np.arange(binned.n_rows), 0, None)
    return grower.tree(), grower.leaf_of_row


def fit_tree(
    X: np.ndarray,
    gradients: np.ndarray,
    hessians: np.ndarray,
    max_depth: int,
    min_samples_leaf: int = DEFAULT_MIN_SAMPLES_LEAF,
) -> RegressionTree:
    """
    Greedy CART fit of the gradient targets.

    Each node takes the (feature, threshold) with the largest squared-error
    reduction ``GL^2/nL + GR^2/nR - G^2/n`` of the gradients; near-equal gains
    go to the lower column index, then the lower threshold. Missing cells join
    the side that gives the larger gain (left on ties). Leaves hold the Newton
    step ``-sum(g) / sum(h)``.

    Args:
        X: rows x features, NaN for missing cells.
        gradients: per-row first derivative of the loss.
        hessians: per-row second derivative, strictly positive.
        max_depth: number of split levels allowed.
        min_samples_leaf: smallest child a split may produce.

    Returns:
        The fitted tree.
    """
    tree, _ = grow_tree(bin_matrix(X), gradients, hessians, max_depth, min_samples_leaf)
    log.debug(f"Fitted tree with {tree.n_splits} splits on {len(gradients)} rows")
    return tree
