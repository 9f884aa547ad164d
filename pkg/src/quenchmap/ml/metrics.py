"""Binary classification metrics; the positive class is label 1."""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float
    accuracy_plain: float

    def as_dict(self) -> dict:
        return asdict(self)


def roc_auc(true_labels, scores) -> float:
    """Mann-Whitney estimate; tied scores get half credit."""
    y = np.asarray(true_labels)
    s = np.asarray(scores, dtype=float)
    n_pos = int(np.sum(y == 1))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC is undefined when only one class is present")
    ranks = rankdata(s)
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def compute_metrics(true_labels, predicted_labels, scores) -> MetricsReport:
    """Balanced accuracy (reported as ``accuracy``), precision, recall, F1 and AUC.

    With a single class in ``true_labels`` the AUC is NaN and a warning is
    issued; the other metrics are still computed.
    """
    y = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(predicted_labels, dtype=np.int64)
    s = np.asarray(scores, dtype=float)
    if not (y.shape == p.shape == s.shape):
        raise ValueError("true labels, predictions and scores must have equal length")
    tp = int(np.sum((y == 1) & (p == 1)))
    fp = int(np.sum((y == 0) & (p == 1)))
    fn = int(np.sum((y == 1) & (p == 0)))
    tn = int(np.sum((y == 0) & (p == 0)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    per_class = []
    if tp + fn:
        per_class.append(recall)
    if tn + fp:
        per_class.append(tn / (tn + fp))
    balanced = float(np.mean(per_class)) if per_class else 0.0
    plain = (tp + tn) / y.size if y.size else 0.0
    try:
        auc = roc_auc(y, s)
    except ValueError as err:
        warnings.warn(str(err))
        auc = float("nan")
    return MetricsReport(balanced, precision, recall, f1, auc, plain)
