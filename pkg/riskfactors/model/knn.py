import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from riskfactors.errors import KTooLarge, NotFitted, WidthMismatch

log = logging.getLogger(__name__)

CONSTANT_STD = 1e-12
# bound on query x train cells screened at once
CHUNK_CELLS = 4_000_000
SCREEN_TOLERANCE = 1e-8


@dataclass(frozen=True)
class KnnModel:
    k: int
    mean: np.ndarray
    std: np.ndarray
    train: np.ndarray
    y01: np.ndarray

    @property
    def n_train(self) -> int:
        return int(self.train.shape[0])

    def standardize(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[np.newaxis, :]
        if X.shape[1] != self.mean.shape[0]:
            raise WidthMismatch(int(self.mean.shape[0]), int(X.shape[1]))
        return (X - self.mean) / self.std


def knn_fit(X_train: np.ndarray, labels: np.ndarray, k: int) -> KnnModel:
    """
    Store z-scored training rows.

    Columns whose standard deviation is (numerically) zero are divided by 1.

    Raises:
        KTooLarge: ``k`` exceeds the number of training rows.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > X_train.shape[0]:
        raise KTooLarge(k, int(X_train.shape[0]))
    if np.isnan(X_train).any():
        raise ValueError("KNN needs imputed inputs")
    mean = X_train.mean(axis=0)
    std = X_train.std(axis=0)
    std = np.where(std <= CONSTANT_STD * np.maximum(1.0, np.abs(mean)), 1.0, std)
    return KnnModel(
        k=k,
        mean=mean,
        std=std,
        train=(X_train - mean) / std,
        y01=(np.asarray(labels) == 1).astype(np.float64),
    )


def neighbor_order(model: KnnModel, X: np.ndarray, k: Optional[int] = None) -> np.ndarray:
    """
    Indices of the ``k`` nearest training rows per query.

    Candidates are screened with the Gram expansion of the squared distance,
    then ranked by the exact sum of squared differences; equal distances keep
    training-row order.
    """
    k = model.k if k is None else k
    if k > model.n_train:
        raise KTooLarge(k, model.n_train)
    Z = model.standardize(X)
    T = model.train
    sq_train = (T * T).sum(axis=1)
    sq_query = (Z * Z).sum(axis=1)
    chunk = max(1, CHUNK_CELLS // max(1, model.n_train))
    result = np.empty((Z.shape[0], k), dtype=np.int64)
    for start in range(0, Z.shape[0], chunk):
        block = Z[start : start + chunk]
        approx = sq_query[start : start + chunk, np.newaxis] + sq_train - 2.0 * (block @ T.T)
        kth = np.partition(approx, k - 1, axis=1)[:, k - 1]
        slack = SCREEN_TOLERANCE * (sq_query[start : start + chunk] + sq_train.max()) + 1e-12
        for offset, row in enumerate(block):
            candidates = np.flatnonzero(approx[offset] <= kth[offset] + slack[offset])
            diff = T[candidates] - row
            exact = (diff * diff).sum(axis=1)
            ranked = candidates[np.argsort(exact, kind="stable")]
            result[start + offset] = ranked[:k]
    return result


def knn_predict_proba_batch(model: KnnModel, X: np.ndarray) -> np.ndarray:
    neighbors = neighbor_order(model, X)
    return model.y01[neighbors].sum(axis=1) / model.k


def knn_predict_proba(model: KnnModel, x: np.ndarray) -> float:
    """Fraction of positive labels among the K nearest training rows."""
    return float(knn_predict_proba_batch(model, np.asarray(x, dtype=np.float64))[0])


class KnnClassifier:
    """Stateful wrapper used by the cross-validation loops."""

    def __init__(self, k: int) -> None:
        self.k = k
        self.model: Optional[KnnModel] = None

    def fit(self, X: np.ndarray, labels: np.ndarray) -> "KnnClassifier":
        self.model = knn_fit(X, labels, self.k)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.model is None:
            raise NotFitted()
        return knn_predict_proba_batch(self.model, X)
