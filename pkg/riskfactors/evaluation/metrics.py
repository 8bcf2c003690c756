from typing import Optional, Tuple

import numpy as np
from scipy.stats import rankdata

from riskfactors.errors import NoPositives, SingleClass


def _positive_mask(labels: np.ndarray) -> np.ndarray:
    return np.asarray(labels) == 1


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """
    Area under the ROC curve from the Mann-Whitney rank sum.

    Tied scores get average ranks, so each positive/negative tie counts 0.5.
    Labels are +1 for positives; anything else is negative.

    Raises:
        SingleClass: only one class is present.
    """
    scores = np.asarray(scores, dtype=np.float64)
    positive = _positive_mask(labels)
    n_pos = int(positive.sum())
    n_neg = int(positive.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise SingleClass()
    ranks = rankdata(scores, method="average")
    u = float(ranks[positive].sum()) - n_pos * (n_pos + 1) / 2.0
    return float(min(1.0, max(0.0, u / (n_pos * n_neg))))


def precision_recall(
    scores: np.ndarray, labels: np.ndarray, threshold: float = 0.5
) -> Tuple[Optional[float], float]:
    """
    Precision and recall of ``score >= threshold``.

    Precision is None when nothing is predicted positive.

    Raises:
        NoPositives: the labels contain no positive.
    """
    positive = _positive_mask(labels)
    if not positive.any():
        raise NoPositives("precision/recall need at least one positive label")
    predicted = np.asarray(scores, dtype=np.float64) >= threshold
    tp = int(np.count_nonzero(predicted & positive))
    fp = int(np.count_nonzero(predicted & ~positive))
    fn = int(np.count_nonzero(~predicted & positive))
    precision = tp / (tp + fp) if tp + fp else None
    return precision, tp / (tp + fn)


def roc_curve(scores: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """ROC points from (0, 0) to (1, 1), one per distinct score threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = _positive_mask(labels)
    n_pos = int(positive.sum())
    n_neg = int(positive.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise SingleClass()
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    tps = np.cumsum(positive[order])
    fps = np.cumsum(~positive[order])
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[sorted_scores[1:] != sorted_scores[:-1], True])
    fpr = np.r_[0.0, fps[ends] / n_neg]
    tpr = np.r_[0.0, tps[ends] / n_pos]
    return fpr, tpr
