import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import expit

from riskfactors.errors import TooFewRows, WidthMismatch
from riskfactors.model.tree import (
    DEFAULT_MIN_SAMPLES_LEAF,
    BinnedMatrix,
    RegressionTree,
    bin_matrix,
    grow_tree,
)

log = logging.getLogger(__name__)

MIN_TRAINING_ROWS = 10
HESSIAN_FLOOR = 1e-12
PROBABILITY_CLIP = 1e-15


class GbtParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_depth: int = Field(default=3, ge=1)
    n_trees: int = Field(default=100, ge=0)
    shrinkage: float = Field(default=0.1, gt=0.0, le=1.0)
    min_samples_leaf: int = Field(default=DEFAULT_MIN_SAMPLES_LEAF, ge=1)


def binomial_deviance(scores: np.ndarray, y01: np.ndarray) -> float:
    """Mean negative log-likelihood of 0/1 labels under log-odds ``scores``."""
    return float(np.mean(np.logaddexp(0.0, scores) - y01 * scores))


@dataclass(frozen=True)
class GbtModel:
    """
    Boosted ensemble ``F(x) = base_score + sum_i tree_i(x)``.

    Shrinkage is already folded into the leaf values. ``degenerate`` marks a
    model trained on a single class, which has no trees.
    """

    base_score: float
    trees: Tuple[RegressionTree, ...]
    params: GbtParams
    column_names: Tuple[str, ...]
    degenerate: bool = False
    loss_curve: Tuple[float, ...] = field(default=(), compare=False)

    @property
    def n_features(self) -> int:
        return len(self.column_names)

    def _check_width(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[np.newaxis, :]
        if X.shape[1] != self.n_features:
            raise WidthMismatch(self.n_features, int(X.shape[1]))
        return X

    def decision_function(self, X: np.ndarray, n_trees: Optional[int] = None) -> np.ndarray:
        """Log-odds using the first ``n_trees`` trees (all when None)."""
        X = self._check_width(X)
        scores = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for tree in self.trees[: n_trees if n_trees is not None else len(self.trees)]:
            scores += tree.predict(X)
        return scores

    def staged_decision(self, X: np.ndarray, stages: Sequence[int]) -> Dict[int, np.ndarray]:
        """Log-odds after each requested number of trees, from one pass over the ensemble."""
        X = self._check_width(X)
        wanted = set(stages)
        scores = np.full(X.shape[0], self.base_score, dtype=np.float64)
        staged: Dict[int, np.ndarray] = {}
        if 0 in wanted:
            staged[0] = scores.copy()
        for i, tree in enumerate(self.trees, start=1):
            scores += tree.predict(X)
            if i in wanted:
                staged[i] = scores.copy()
        missing = wanted - set(staged)
        if missing:
            raise ValueError(f"model has {len(self.trees)} trees, asked for {sorted(missing)}")
        return staged

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return to_probability(self.decision_function(X))


def to_probability(scores: np.ndarray) -> np.ndarray:
    return np.clip(expit(scores), PROBABILITY_CLIP, 1.0 - PROBABILITY_CLIP)


def train_gbt(
    X: np.ndarray,
    labels: np.ndarray,
    params: GbtParams,
    column_names: Optional[Sequence[str]] = None,
    binned: Optional[BinnedMatrix] = None,
) -> GbtModel:
    """
    Fit the boosted ensemble on binomial deviance.

    Starts from the log-odds of the positive rate, then adds ``n_trees``
    trees, each fitted to the deviance gradient with Newton leaf values
    scaled by the shrinkage. Training is deterministic.

    Args:
        X: rows x features, NaN for missing cells.
        labels: +1 / -1 per row.
        params: depth, number of trees, shrinkage and minimum leaf size.
        column_names: names recorded on the model for importance ranking.
        binned: pre-binned ``X``, reused across calls.

    Raises:
        TooFewRows: fewer than ten rows.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    n = X.shape[0]
    if n < MIN_TRAINING_ROWS:
        raise TooFewRows(n, MIN_TRAINING_ROWS)
    names = tuple(column_names) if column_names is not None else tuple(
        f"x{j}" for j in range(X.shape[1])
    )
    if len(names) != X.shape[1]:
        raise WidthMismatch(X.shape[1], len(names))

    y01 = (labels == 1).astype(np.float64)
    rate = float(np.clip(y01.mean(), PROBABILITY_CLIP, 1.0 - PROBABILITY_CLIP))
    base_score = float(np.log(rate / (1.0 - rate)))
    scores = np.full(n, base_score, dtype=np.float64)
    curve: List[float] = [binomial_deviance(scores, y01)]

    if y01.min() == y01.max():
        log.warning(f"Degenerate labels: only class {int(labels[0])} present, no trees fitted")
        return GbtModel(base_score, (), params, names, degenerate=True, loss_curve=tuple(curve))

    binned = binned if binned is not None else bin_matrix(X)
    trees: List[RegressionTree] = []
    for _ in range(params.n_trees):
        p = expit(scores)
        gradients = p - y01
        hessians = np.maximum(p * (1.0 - p), HESSIAN_FLOOR)
        tree, leaf_of_row = grow_tree(
            binned, gradients, hessians, params.max_depth, params.min_samples_leaf
        )
        tree = tree.scaled(params.shrinkage)
        scores = scores + tree.value[leaf_of_row]
        trees.append(tree)
        curve.append(binomial_deviance(scores, y01))

    log.debug(
        f"Trained {len(trees)} trees (depth {params.max_depth}) on {n} rows: "
        f"deviance {curve[0]:.4f} -> {curve[-1]:.4f}"
    )
    return GbtModel(base_score, tuple(trees), params, names, loss_curve=tuple(curve))


def predict_proba(model: GbtModel, x: np.ndarray) -> float:
    """
    Probability of the positive class for one row.

    Raises:
        WidthMismatch: the row width differs from the training width.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a single row")
    return float(model.predict_proba(x)[0])


def feature_importance(model: GbtModel) -> List[Tuple[str, float]]:
    """
    Gain importance of every column, normalised to sum to one.

    Sorted by decreasing importance, ties in column order. A model without
    any split yields an empty ranking.
    """
    totals = np.zeros(model.n_features, dtype=np.float64)
    for tree in model.trees:
        internal = tree.feature >= 0
        np.add.at(totals, tree.feature[internal], tree.gain[internal])
    grand_total = float(totals.sum())
    if grand_total <= 0.0:
        log.warning("Model has no splits; importance ranking is empty")
        return []
    shares = totals / grand_total
    order = sorted(range(model.n_features), key=lambda j: (-shares[j], j))
    return [(model.column_names[j], float(shares[j])) for j in order]
