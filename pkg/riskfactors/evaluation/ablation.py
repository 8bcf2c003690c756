import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from riskfactors.errors import RiskFactorError
from riskfactors.evaluation.cross_validation import (
    DEFAULT_FOLDS,
    DEFAULT_GBT_DEPTHS,
    DEFAULT_GBT_TREES,
    DEFAULT_KNN_GRID,
    GridSearchResult,
    grid_search_gbt,
    grid_search_knn,
    stratified_kfold,
)
from riskfactors.evaluation.metrics import auc, precision_recall, roc_curve
from riskfactors.features.features import FAMILIES, FeatureMatrix, parse_families
from riskfactors.model.gbt import GbtModel, GbtParams, feature_importance, train_gbt
from riskfactors.model.knn import knn_fit, knn_predict_proba_batch

log = logging.getLogger(__name__)

DEFAULT_SUBSETS: Tuple[Tuple[str, ...], ...] = (("P",), ("P", "A"), ("P", "E"), ("P", "E", "A"))
DEFAULT_TOP_K = 20
PROTOCOL = (
    "nested stratified cross-validation: K of the KNN classifier chosen by inner "
    "folds, metrics averaged over outer folds"
)

MatrixBuilder = Callable[[Tuple[str, ...]], FeatureMatrix]


def subset_name(families: Sequence[str]) -> str:
    return "+".join(f"F{family}" for family in parse_families(families))


class RankedFeature(BaseModel):
    model_config = ConfigDict(frozen=True)

    rank: int
    feature: str
    importance: float


class Ranking(BaseModel):
    """GBT fit on the full matrix with grid-searched hyperparameters."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: GbtModel
    search: Optional[GridSearchResult] = None
    features: List[RankedFeature] = Field(default_factory=list)

    @property
    def chosen_params(self) -> Dict[str, int]:
        return {"max_depth": self.model.params.max_depth, "n_trees": self.model.params.n_trees}

    def top(self, k: int) -> List[RankedFeature]:
        return self.features[:k]


class SubsetResult(BaseModel):
    name: str
    families: Tuple[str, ...]
    n_columns: int
    precision: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    recall: float = Field(ge=0.0, le=1.0)
    auc: float = Field(ge=0.0, le=1.0)
    fold_aucs: List[float]
    chosen_params: Dict[str, List[int]]
    roc_fpr: List[float] = Field(default_factory=list)
    roc_tpr: List[float] = Field(default_factory=list)


class EvalReport(BaseModel):
    """Per-subset classifier metrics plus the importance ranking."""

    seed: int
    n_folds: int
    protocol: str = PROTOCOL
    column_counts: Dict[str, int]
    knn_grid: List[int]
    subsets: List[SubsetResult]
    gbt_params: Dict[str, int]
    top_features: List[RankedFeature]


def rank_features(
    matrix: FeatureMatrix,
    seed: int,
    depths: Sequence[int] = DEFAULT_GBT_DEPTHS,
    trees: Sequence[int] = DEFAULT_GBT_TREES,
    n_folds: int = DEFAULT_FOLDS,
    shrinkage: float = 0.1,
    min_samples_leaf: int = 5,
) -> Ranking:
    """Grid-search the GBT, refit it on every row and rank the columns by gain."""
    search = grid_search_gbt(
        matrix.values,
        matrix.labels,
        depths=depths,
        trees=trees,
        seed=seed,
        n_folds=n_folds,
        shrinkage=shrinkage,
        min_samples_leaf=min_samples_leaf,
    )
    params = GbtParams(
        max_depth=search.best_params["max_depth"],
        n_trees=search.best_params["n_trees"],
        shrinkage=shrinkage,
        min_samples_leaf=min_samples_leaf,
    )
    model = train_gbt(matrix.values, matrix.labels, params, column_names=matrix.column_names)
    return Ranking(model=model, search=search, features=ranking_from_model(model))


def ranking_from_model(model: GbtModel) -> List[RankedFeature]:
    return [
        RankedFeature(rank=rank, feature=name, importance=share)
        for rank, (name, share) in enumerate(feature_importance(model), start=1)
    ]


def _evaluate_subset(
    matrix: FeatureMatrix,
    families: Tuple[str, ...],
    seed: int,
    knn_grid: Sequence[int],
    n_folds: int,
) -> SubsetResult:
    labels = matrix.labels
    outer = stratified_kfold(labels, n_folds, seed)
    scores = np.empty(len(labels), dtype=np.float64)
    precisions: List[float] = []
    recalls: List[float] = []
    aucs: List[float] = []
    chosen: List[int] = []
    for fold in range(outer.n_folds):
        train, test = outer.split(fold)
        inner = grid_search_knn(
            matrix.values[train], labels[train], grid=knn_grid, seed=seed, n_folds=n_folds
        )
        k = inner.best_params["k"]
        chosen.append(k)
        model = knn_fit(matrix.values[train], labels[train], k)
        fold_scores = knn_predict_proba_batch(model, matrix.values[test])
        scores[test] = fold_scores
        precision, recall = precision_recall(fold_scores, labels[test])
        if precision is not None:
            precisions.append(precision)
        recalls.append(recall)
        aucs.append(auc(fold_scores, labels[test]))

    fpr, tpr = roc_curve(scores, labels)
    name = subset_name(families)
    result = SubsetResult(
        name=name,
        families=families,
        n_columns=matrix.shape[1],
        precision=float(np.mean(precisions)) if precisions else None,
        recall=float(np.mean(recalls)),
        auc=float(np.mean(aucs)),
        fold_aucs=aucs,
        chosen_params={"k_per_fold": chosen},
        roc_fpr=[float(v) for v in fpr],
        roc_tpr=[float(v) for v in tpr],
    )
    log.info(
        f"{name}: {matrix.shape[1]} columns, AUC {result.auc:.4f}, recall {result.recall:.4f}, "
        f"K per fold {chosen}"
    )
    return result


def run_ablation(
    build: MatrixBuilder,
    seed: int,
    subsets: Sequence[Sequence[str]] = DEFAULT_SUBSETS,
    knn_grid: Sequence[int] = DEFAULT_KNN_GRID,
    n_folds: int = DEFAULT_FOLDS,
    gbt_depths: Sequence[int] = DEFAULT_GBT_DEPTHS,
    gbt_trees: Sequence[int] = DEFAULT_GBT_TREES,
    shrinkage: float = 0.1,
    min_samples_leaf: int = 5,
    top_k: int = DEFAULT_TOP_K,
    ranking: Optional[Ranking] = None,
) -> EvalReport:
    """
    Score each feature-family subset with the KNN classifier under nested
    cross-validation and attach the GBT importance ranking of the full matrix.

    Args:
        build: returns the feature matrix restricted to a family subset.
        seed: drives every fold assignment.
        ranking: an existing full-matrix ranking; computed when None.
    """
    results: List[SubsetResult] = []
    for subset in subsets:
        families = parse_families(subset)
        results.append(_evaluate_subset(build(families), families, seed, knn_grid, n_folds))

    full = build(FAMILIES)
    if ranking is None:
        ranking = rank_features(
            full,
            seed,
            depths=gbt_depths,
            trees=gbt_trees,
            n_folds=n_folds,
            shrinkage=shrinkage,
            min_samples_leaf=min_samples_leaf,
        )
    elif ranking.model.column_names != full.column_names:
        raise RiskFactorError("Ranking model columns do not match the feature matrix")

    return EvalReport(
        seed=seed,
        n_folds=n_folds,
        column_counts=full.column_counts(),
        knn_grid=sorted(set(knn_grid)),
        subsets=results,
        gbt_params=ranking.chosen_params,
        top_features=ranking.top(top_k),
    )
