import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from riskfactors.errors import (
    GridSearchFailed,
    KTooLarge,
    RiskFactorError,
    TooFewPerClass,
)
from riskfactors.evaluation.metrics import auc
from riskfactors.model.gbt import GbtParams, train_gbt
from riskfactors.model.knn import knn_fit, neighbor_order
from riskfactors.model.tree import bin_matrix

log = logging.getLogger(__name__)

DEFAULT_FOLDS = 5
DEFAULT_GBT_DEPTHS = (1, 2, 3)
DEFAULT_GBT_TREES = (50, 100, 150)
DEFAULT_KNN_GRID = (1, 3, 5, 7, 9, 15, 25)


class FoldAssignment(BaseModel):
    """Fold index of every row."""

    model_config = ConfigDict(frozen=True)

    folds: Tuple[int, ...]
    n_folds: int = Field(ge=2)
    seed: int

    def split(self, fold: int) -> Tuple[np.ndarray, np.ndarray]:
        """Training and validation row indices of one fold."""
        assignment = np.asarray(self.folds)
        return np.flatnonzero(assignment != fold), np.flatnonzero(assignment == fold)


def stratified_kfold(
    labels: np.ndarray, n_folds: int = DEFAULT_FOLDS, seed: int = 0
) -> FoldAssignment:
    """
    Seeded stratified fold assignment.

    Rows of each class are shuffled and dealt round-robin; the dealing
    position carries over from one class to the next so fold sizes stay
    within one row of each other.

    Raises:
        TooFewPerClass: a class has fewer rows than folds.
    """
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    count_map = {int(c): int(n) for c, n in zip(classes, counts)}
    if len(classes) < 2 or counts.min() < n_folds:
        raise TooFewPerClass(n_folds, count_map)
    rng = np.random.default_rng(seed)
    folds = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for cls in classes:
        members = rng.permutation(np.flatnonzero(labels == cls))
        folds[members] = (offset + np.arange(len(members))) % n_folds
        offset = (offset + len(members)) % n_folds
    return FoldAssignment(folds=tuple(int(f) for f in folds), n_folds=n_folds, seed=seed)


class CellScore(BaseModel):
    params: Dict[str, int]
    fold_aucs: List[float] = Field(default_factory=list)
    mean_auc: Optional[float] = None
    failed: bool = False
    error: str = ""


class GridSearchResult(BaseModel):
    best_params: Dict[str, int]
    best_score: float
    cells: List[CellScore]
    n_fold_evaluations: int


def _pick_best(cells: List[CellScore], what: str) -> Tuple[CellScore, float]:
    best: Optional[CellScore] = None
    for cell in cells:
        if cell.failed or cell.mean_auc is None:
            continue
        # cells arrive in tie-break order, so only a strictly better score wins
        if best is None or cell.mean_auc > best.mean_auc:  # type: ignore[operator]
            best = cell
    if best is None:
        raise GridSearchFailed("; ".join(f"{c.params}: {c.error}" for c in cells) or what)
    return best, float(best.mean_auc)  # type: ignore[arg-type]


def _finish(cells: List[CellScore]) -> None:
    for cell in cells:
        if not cell.failed and cell.fold_aucs:
            cell.mean_auc = float(np.mean(cell.fold_aucs))


def grid_search_gbt(
    X: np.ndarray,
    labels: np.ndarray,
    depths: Sequence[int] = DEFAULT_GBT_DEPTHS,
    trees: Sequence[int] = DEFAULT_GBT_TREES,
    seed: int = 0,
    n_folds: int = DEFAULT_FOLDS,
    shrinkage: float = 0.1,
    min_samples_leaf: int = 5,
    folds: Optional[FoldAssignment] = None,
) -> GridSearchResult:
    """
    Choose (max_depth, n_trees) by mean validation AUC over stratified folds.

    Per fold and depth one ensemble with the largest tree count is trained;
    smaller counts are scored from its prefix, which is exactly the model
    that count would have produced. Ties go to the smaller depth, then to
    fewer trees. A cell whose training fails on any fold is excluded.
    """
    if not depths or not trees:
        raise GridSearchFailed("empty grid")
    depths, trees = sorted(set(depths)), sorted(set(trees))
    labels = np.asarray(labels)
    folds = folds or stratified_kfold(labels, n_folds, seed)
    cells = {
        (d, t): CellScore(params={"max_depth": d, "n_trees": t}) for d in depths for t in trees
    }
    for fold in range(folds.n_folds):
        train, valid = folds.split(fold)
        binned = bin_matrix(X[train])
        for depth in depths:
            params = GbtParams(
                max_depth=depth,
                n_trees=max(trees),
                shrinkage=shrinkage,
                min_samples_leaf=min_samples_leaf,
            )
            try:
                model = train_gbt(X[train], labels[train], params, binned=binned)
                staged = model.staged_decision(X[valid], trees)
                scores = {t: auc(staged[t], labels[valid]) for t in trees}
            except RiskFactorError as e:
                log.warning(f"GBT depth {depth} failed on fold {fold}: {e}")
                for t in trees:
                    cells[(depth, t)].failed = True
                    cells[(depth, t)].error = str(e)
                continue
            for t in trees:
                cells[(depth, t)].fold_aucs.append(scores[t])
    ordered = [cells[(d, t)] for d in depths for t in trees]
    _finish(ordered)
    best, score = _pick_best(ordered, "no GBT cell could be scored")
    log.info(f"GBT grid search chose {best.params} (mean AUC {score:.4f})")
    return GridSearchResult(
        best_params=dict(best.params),
        best_score=score,
        cells=ordered,
        n_fold_evaluations=len(ordered) * folds.n_folds,
    )


def grid_search_knn(
    X: np.ndarray,
    labels: np.ndarray,
    grid: Sequence[int] = DEFAULT_KNN_GRID,
    seed: int = 0,
    n_folds: int = DEFAULT_FOLDS,
    folds: Optional[FoldAssignment] = None,
) -> GridSearchResult:
    """
    Choose K by mean validation AUC over stratified folds; ties go to the smaller K.

    Neighbours are sorted once per fold for the largest usable K; every
    smaller K reads a prefix of that order.
    """
    if not grid:
        raise GridSearchFailed("empty grid")
    grid = sorted(set(grid))
    labels = np.asarray(labels)
    folds = folds or stratified_kfold(labels, n_folds, seed)
    cells = {k: CellScore(params={"k": k}) for k in grid}
    for fold in range(folds.n_folds):
        train, valid = folds.split(fold)
        usable = [k for k in grid if k <= len(train)]
        for k in grid:
            if k > len(train):
                cells[k].failed = True
                cells[k].error = str(KTooLarge(k, len(train)))
        if not usable:
            continue
        model = knn_fit(X[train], labels[train], max(usable))
        order = neighbor_order(model, X[valid], max(usable))
        positives = np.cumsum(model.y01[order], axis=1)
        for k in usable:
            try:
                cells[k].fold_aucs.append(auc(positives[:, k - 1] / k, labels[valid]))
            except RiskFactorError as e:
                cells[k].failed = True
                cells[k].error = str(e)
    ordered = [cells[k] for k in grid]
    _finish(ordered)
    best, score = _pick_best(ordered, "no K could be scored")
    log.debug(f"KNN grid search chose {best.params} (mean AUC {score:.4f})")
    return GridSearchResult(
        best_params=dict(best.params),
        best_score=score,
        cells=ordered,
        n_fold_evaluations=len(ordered) * folds.n_folds,
    )
