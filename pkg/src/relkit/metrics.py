"""Binary-classification metrics with explicit undefined flags.

Positive class is label 1. A metric that cannot be computed on a subset
(no positives, one class only, ...) is reported as NaN *and* named in
``MetricsReport.undefined``; it is never silently replaced with zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInputError, InputShapeError, ParameterError

METRIC_NAMES = ("balanced_accuracy", "precision", "recall", "auc", "f1", "mcc", "prc", "brier")


@dataclass(frozen=True)
class EvalInput:
    y_true: np.ndarray
    y_pred: np.ndarray
    y_score: np.ndarray

    def __post_init__(self):
        yt = np.asarray(self.y_true).astype(np.int64).reshape(-1)
        yp = np.asarray(self.y_pred).astype(np.int64).reshape(-1)
        ys = np.asarray(self.y_score, dtype=np.float64).reshape(-1)
        if not (len(yt) == len(yp) == len(ys)):
            raise InputShapeError(f"lengths differ: {len(yt)}, {len(yp)}, {len(ys)}")
        if not (np.isin(yt, (0, 1)).all() and np.isin(yp, (0, 1)).all()):
            raise ParameterError("y_true and y_pred must be 0/1")
        if not (np.isfinite(ys).all() and ((ys >= 0) & (ys <= 1)).all()):
            raise ParameterError("y_score must be finite and in [0, 1]")
        object.__setattr__(self, "y_true", yt)
        object.__setattr__(self, "y_pred", yp)
        object.__setattr__(self, "y_score", ys)

    def __len__(self):
        return len(self.y_true)

    def subset(self, mask):
        mask = np.asarray(mask)
        return EvalInput(self.y_true[mask], self.y_pred[mask], self.y_score[mask])


@dataclass(frozen=True)
class MetricsReport:
    balanced_accuracy: float
    precision: float
    recall: float
    auc: float
    f1: float
    mcc: float
    prc: float
    brier: float
    support: int
    undefined: frozenset = field(default_factory=frozenset)

    def as_dict(self):
        return {name: getattr(self, name) for name in METRIC_NAMES}

    def is_defined(self, name):
        return name not in self.undefined


@dataclass(frozen=True)
class DeltaReport:
    """Per-metric ``reliable - unreliable`` differences."""

    values: dict
    undefined: frozenset = field(default_factory=frozenset)

    def __getitem__(self, name):
        return self.values[name]


def accuracy_score(y_true, y_pred):
    y_true = np.asarray(y_true).reshape(-1)
    y_pred = np.asarray(y_pred).reshape(-1)
    if len(y_true) != len(y_pred):
        raise InputShapeError(f"lengths differ: {len(y_true)} vs {len(y_pred)}")
    if len(y_true) == 0:
        raise EmptyInputError("accuracy of empty vectors")
    return float(np.mean(y_true == y_pred))


def confusion(y_true, y_pred):
    """``(tp, fp, tn, fn)`` counts."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    return tp, fp, tn, fn


def _sweep(y_true, y_score):
    """Cumulative (tp, fp) at each distinct score, highest score first."""
    order = np.argsort(-y_score, kind="stable")
    s = y_score[order]
    y = y_true[order]
    # last index of each run of equal scores
    ends = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tps = np.cumsum(y)[ends]
    fps = np.cumsum(1 - y)[ends]
    return tps.astype(np.float64), fps.astype(np.float64)


def roc_auc(y_true, y_score):
    """Trapezoidal area under the ROC curve; ties share one diagonal step.

    Returns NaN when only one class is present.
    """
    y_true = np.asarray(y_true).astype(np.int64)
    y_score = np.asarray(y_score, dtype=np.float64)
    n_pos = int(y_true.sum())
    n_neg = len(y_true) - n_pos
    if n_pos == 0 or n_neg == 0:
        return math.nan
    tps, fps = _sweep(y_true, y_score)
    tpr = np.r_[0.0, tps] / n_pos
    fpr = np.r_[0.0, fps] / n_neg
    return float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))


def pr_auc(y_true, y_score):
    """Step-wise (right-constant) area under the precision-recall curve.

    Sum over thresholds of ``(R_i - R_{i-1}) * P_i``. NaN without positives.
    """
    y_true = np.asarray(y_true).astype(np.int64)
    y_score = np.asarray(y_score, dtype=np.float64)
    n_pos = int(y_true.sum())
    if n_pos == 0:
        return math.nan
    tps, fps = _sweep(y_true, y_score)
    precision = tps / (tps + fps)
    recall = np.r_[0.0, tps / n_pos]
    return float(np.sum((recall[1:] - recall[:-1]) * precision))


def _ratio(num, den):
    return num / den if den else math.nan


def compute_all(data):
    """Full :class:`MetricsReport` for an :class:`EvalInput`.

    An empty input yields a report with every metric undefined.
    """
    n = len(data)
    if n == 0:
        nan = math.nan
        return MetricsReport(nan, nan, nan, nan, nan, nan, nan, nan, 0, frozenset(METRIC_NAMES))
    yt, yp, ys = data.y_true, data.y_pred, data.y_score
    tp, fp, tn, fn = confusion(yt, yp)

    tpr = _ratio(tp, tp + fn)
    tnr = _ratio(tn, tn + fp)
    values = {
        "balanced_accuracy": (tpr + tnr) / 2.0,
        "precision": _ratio(tp, tp + fp),
        "recall": tpr,
        "auc": roc_auc(yt, ys),
        "f1": _ratio(2 * tp, 2 * tp + fp + fn),
        "prc": pr_auc(yt, ys),
        "brier": float(np.mean((ys - yt) ** 2)),
    }
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    values["mcc"] = (tp * tn - fp * fn) / math.sqrt(den) if den else math.nan
    undefined = frozenset(k for k, v in values.items() if math.isnan(v))
    return MetricsReport(support=n, undefined=undefined, **values)


def delta_report(reliable, unreliable):
    """``reliable - unreliable`` for every metric; undefined on either side propagates."""
    values = {}
    undefined = set()
    for name in METRIC_NAMES:
        if name in reliable.undefined or name in unreliable.undefined:
            values[name] = math.nan
            undefined.add(name)
        else:
            values[name] = getattr(reliable, name) - getattr(unreliable, name)
    return DeltaReport(values, frozenset(undefined))
