import numpy as np
import pytest

from riskfactors.errors import NoPositives, SingleClass
from riskfactors.evaluation.metrics import auc, precision_recall, roc_curve


def _pairwise_auc(scores, labels):
    positives = scores[labels == 1]
    negatives = scores[labels != 1]
    wins = 0.0
    for p in positives:
        for q in negatives:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (len(positives) * len(negatives))


def test_auc_matches_pairwise_count():
    rng = np.random.default_rng(6)
    for _ in range(200):
        n = int(rng.integers(2, 40))
        labels = np.where(rng.random(n) < 0.5, 1, -1)
        labels[0], labels[1] = 1, -1
        # coarse scores force ties
        scores = np.round(rng.random(n), 1)
        assert auc(scores, labels) == pytest.approx(_pairwise_auc(scores, labels), abs=1e-12)
        assert auc(-scores, labels) == pytest.approx(1.0 - auc(scores, labels), abs=1e-12)


def test_auc_extremes():
    labels = np.array([1, 1, -1, -1])
    assert auc(np.array([0.9, 0.8, 0.2, 0.1]), labels) == 1.0
    assert auc(np.array([0.1, 0.2, 0.8, 0.9]), labels) == 0.0
    assert auc(np.full(4, 0.5), labels) == 0.5


def test_auc_needs_both_classes():
    with pytest.raises(SingleClass):
        auc(np.array([0.1, 0.2]), np.array([1, 1]))


def test_precision_recall_counts():
    # TP=2, FP=1, FN=2
    scores = np.array([0.9, 0.7, 0.6, 0.2, 0.1, 0.3])
    labels = np.array([1, 1, -1, 1, 1, -1])
    precision, recall = precision_recall(scores, labels)
    assert precision == pytest.approx(2.0 / 3.0)
    assert recall == 0.5


def test_precision_undefined_without_predicted_positives():
    precision, recall = precision_recall(np.array([0.1, 0.2]), np.array([1, -1]))
    assert precision is None
    assert recall == 0.0


def test_precision_recall_need_a_positive():
    with pytest.raises(NoPositives):
        precision_recall(np.array([0.9]), np.array([-1]))


def test_roc_curve_spans_the_unit_square():
    scores = np.array([0.9, 0.8, 0.8, 0.3, 0.1])
    labels = np.array([1, -1, 1, -1, -1])
    fpr, tpr = roc_curve(scores, labels)
    assert (fpr[0], tpr[0]) == (0.0, 0.0)
    assert (fpr[-1], tpr[-1]) == (1.0, 1.0)
    assert len(fpr) == 5
    assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)
    # trapezoid area equals the rank-based AUC
    area = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    assert area == pytest.approx(auc(scores, labels))


def test_auc_counts_concordant_pairs():
    scores = np.array([0.1, 0.4, 0.35, 0.8])
    labels = np.array([-1, -1, 1, 1])
    assert auc(scores, labels) == 0.75


def test_auc_ignores_monotone_transforms():
    rng = np.random.default_rng(12)
    scores = rng.random(50)
    labels = np.where(rng.random(50) < 0.4, 1, -1)
    labels[:2] = [1, -1]
    assert auc(np.exp(5.0 * scores), labels) == auc(scores, labels)
