"""Accuracy, confusion matrices and the multiclass Matthews correlation coefficient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidQueryError


def confusion_matrix(true_ids, pred_ids, num_classes=None) -> np.ndarray:
    """Entry (t, p) counts nodes of true class t predicted as p."""
    t = np.asarray(true_ids, dtype=np.int64)
    p = np.asarray(pred_ids, dtype=np.int64)
    if t.shape != p.shape:
        raise DimensionError(f"{t.size} true ids vs {p.size} predictions")
    if num_classes is None:
        num_classes = int(max(t.max(initial=-1), p.max(initial=-1))) + 1
    conf = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(conf, (t, p), 1)
    return conf


def accuracy(true_ids, pred_ids) -> float:
    t = np.asarray(true_ids)
    p = np.asarray(pred_ids)
    if t.shape != p.shape:
        raise DimensionError(f"{t.size} true ids vs {p.size} predictions")
    if t.size == 0:
        raise InvalidQueryError("accuracy of an empty prediction set")
    return float(np.mean(t == p))


def mcc(conf) -> float:
    """Gorodkin's R_K statistic; 0 when either marginal is degenerate.

    With c the trace, s the total, p_k column sums and t_k row sums::

        (c*s - sum p_k t_k) / sqrt((s^2 - sum p_k^2) (s^2 - sum t_k^2))
    """
    conf = np.asarray(conf)
    if conf.ndim != 2 or conf.shape[0] != conf.shape[1]:
        raise DimensionError(f"confusion matrix must be square, got {conf.shape}")
    s = float(conf.sum())
    if conf.size == 0 or s == 0:
        raise InvalidQueryError("MCC of an empty confusion matrix")
    c = float(np.trace(conf))
    t = conf.sum(axis=1).astype(np.float64)
    p = conf.sum(axis=0).astype(np.float64)
    cov_tp = c * s - p @ t
    cov_pp = s * s - p @ p
    cov_tt = s * s - t @ t
    if cov_pp == 0 or cov_tt == 0:
        return 0.0
    return float(cov_tp / np.sqrt(cov_pp * cov_tt))


@dataclass
class MetricsReport:
    role: str
    count: int
    accuracy: float
    mcc: float

    def as_dict(self):
        return {"count": self.count, "accuracy": self.accuracy, "mcc": self.mcc}


def score(true_ids, pred_ids, num_classes, role="") -> MetricsReport:
    conf = confusion_matrix(true_ids, pred_ids, num_classes)
    return MetricsReport(role, int(conf.sum()), accuracy(true_ids, pred_ids), mcc(conf))
