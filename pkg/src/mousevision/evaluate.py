"""Classification metrics: confusion matrix, P/R/F1, ROC/AUC, CV aggregation.

Positive class for ROC analysis is always ``abnormal`` (side-effect
indicative); the score is the model's predicted probability of that class.
All macro averages are unweighted means over classes whose denominator is
nonzero; zero-denominator metrics are reported as 0.0 and flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._io import write_text_atomic
from .exceptions import UsageError
from .validation import LABELS, check_label


@dataclass
class ConfusionMatrix:
    """Counts indexed [true][pred], classes in canonical label order."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        c = len(LABELS)
        if self.counts.shape != (c, c):
            raise UsageError(f"confusion matrix must be {c}x{c}, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise UsageError("confusion matrix entries must be nonnegative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion_matrix(y_true: Sequence[str], y_pred: Sequence[str]) -> ConfusionMatrix:
    if len(y_true) != len(y_pred):
        raise UsageError(f"got {len(y_pred)} predictions for {len(y_true)} truths")
    if len(y_true) == 0:
        raise UsageError("cannot build a confusion matrix from zero samples")
    index = {name: i for i, name in enumerate(LABELS)}
    counts = np.zeros((len(LABELS), len(LABELS)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        counts[index[check_label(t)], index[check_label(p)]] += 1
    return ConfusionMatrix(counts)


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    precision_defined: bool
    recall_defined: bool
    f1_defined: bool


@dataclass
class MetricsReport:
    """Derived metrics for one evaluation (optionally one CV fold)."""

    confusion: ConfusionMatrix
    accuracy: float
    per_class: dict[str, ClassMetrics]
    precision_macro: float
    recall_macro: float
    f1_macro: float
    auc_abnormal: float | None = None
    fold_id: int | None = None

    def metric_values(self) -> dict[str, float | None]:
        return {
            "accuracy": self.accuracy,
            "precision_macro": self.precision_macro,
            "recall_macro": self.recall_macro,
            "f1_macro": self.f1_macro,
            "auc_abnormal": self.auc_abnormal,
        }


def _macro(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def classification_metrics(cm: ConfusionMatrix, fold_id: int | None = None) -> MetricsReport:
    """Accuracy plus per-class and macro precision/recall/F1 from counts."""
    if cm.total == 0:
        raise UsageError("confusion matrix is empty")
    counts = cm.counts
    accuracy = float(np.trace(counts)) / cm.total
    per_class: dict[str, ClassMetrics] = {}
    for i, name in enumerate(LABELS):
        tp = int(counts[i, i])
        col = int(counts[:, i].sum())
        row = int(counts[i, :].sum())
        p_def = col > 0
        r_def = row > 0
        precision = tp / col if p_def else 0.0
        recall = tp / row if r_def else 0.0
        f_def = p_def and r_def and (precision + recall) > 0
        f1 = 2 * precision * recall / (precision + recall) if f_def else 0.0
        per_class[name] = ClassMetrics(precision, recall, f1, p_def, r_def, f_def)
    return MetricsReport(
        confusion=cm,
        accuracy=accuracy,
        per_class=per_class,
        precision_macro=_macro([m.precision for m in per_class.values() if m.precision_defined]),
        recall_macro=_macro([m.recall for m in per_class.values() if m.recall_defined]),
        f1_macro=_macro([m.f1 for m in per_class.values() if m.f1_defined]),
        fold_id=fold_id,
    )


@dataclass
class RocCurve:
    """Threshold-sweep ROC points from (0,0) to (1,1), both axes non-decreasing."""

    points: list[tuple[float, float]] = field(default_factory=list)


def roc_auc(scores: Sequence[float], positives: Sequence[bool]) -> tuple[RocCurve, float]:
    """ROC curve and trapezoidal AUC over a descending threshold sweep.

    Tied scores are grouped into one sweep step, which credits tied
    positive/negative pairs exactly 0.5; the result therefore equals the
    Mann-Whitney rank statistic. The area is accumulated in integer counts
    and divided once, so the identity is exact.
    """
    if len(scores) != len(positives):
        raise UsageError(f"got {len(positives)} flags for {len(scores)} scores")
    scores = np.asarray(scores, dtype=np.float64)
    flags = np.asarray(positives, dtype=bool)
    if scores.size == 0:
        raise UsageError("roc_auc needs at least one score")
    if not np.all(np.isfinite(scores)):
        raise UsageError("roc_auc scores must be finite")
    n_pos = int(flags.sum())
    n_neg = int(flags.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UsageError(
            f"roc_auc needs both classes, got {n_pos} positives and {n_neg} negatives"
        )

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_flags = flags[order]

    points = [(0.0, 0.0)]
    tp = fp = 0
    area2 = 0  # 2 * area * n_pos * n_neg, exactly
    i = 0
    n = scores.size
    while i < n:
        j = i
        dp = dn = 0
        while j < n and sorted_scores[j] == sorted_scores[i]:
            if sorted_flags[j]:
                dp += 1
            else:
                dn += 1
            j += 1
        area2 += dn * (2 * tp + dp)
        tp += dp
        fp += dn
        points.append((fp / n_neg, tp / n_pos))
        i = j
    auc = area2 / (2 * n_pos * n_neg)
    return RocCurve(points), auc


@dataclass
class CrossvalSummary:
    """Unweighted mean and population standard deviation per metric."""

    n_folds: int
    mean: dict[str, float | None]
    std: dict[str, float | None]


def crossval_report(per_fold: Sequence[MetricsReport]) -> CrossvalSummary:
    if len(per_fold) < 2:
        raise UsageError(f"cross-validation aggregation needs >= 2 folds, got {len(per_fold)}")
    mean: dict[str, float | None] = {}
    std: dict[str, float | None] = {}
    for key in per_fold[0].metric_values():
        values = [r.metric_values()[key] for r in per_fold]
        defined = [v for v in values if v is not None]
        if not defined:
            mean[key] = None
            std[key] = None
            continue
        m = math.fsum(defined) / len(defined)
        var = math.fsum((v - m) ** 2 for v in defined) / len(defined)
        mean[key] = m
        std[key] = math.sqrt(var)
    return CrossvalSummary(len(per_fold), mean, std)


CSV_HEADER = "fold,accuracy,precision_macro,recall_macro,f1_macro,auc_abnormal"


def _fmt(v: float | None) -> str:
    return "nan" if v is None else f"{v:.6f}"


def metrics_csv(per_fold: Sequence[MetricsReport], aggregate: CrossvalSummary | None = None) -> str:
    """Render the report CSV: one row per fold, then mean/std rows."""
    lines = [CSV_HEADER]
    for i, report in enumerate(per_fold):
        fold = report.fold_id if report.fold_id is not None else i
        vals = report.metric_values()
        lines.append(
            f"{fold},{_fmt(vals['accuracy'])},{_fmt(vals['precision_macro'])},"
            f"{_fmt(vals['recall_macro'])},{_fmt(vals['f1_macro'])},{_fmt(vals['auc_abnormal'])}"
        )
    if aggregate is not None:
        for name, stats in (("mean", aggregate.mean), ("std", aggregate.std)):
            lines.append(
                f"{name},{_fmt(stats['accuracy'])},{_fmt(stats['precision_macro'])},"
                f"{_fmt(stats['recall_macro'])},{_fmt(stats['f1_macro'])},{_fmt(stats['auc_abnormal'])}"
            )
    return "\n".join(lines) + "\n"


def write_metrics_csv(
    path: str | Path,
    per_fold: Sequence[MetricsReport],
    aggregate: CrossvalSummary | None = None,
) -> Path:
    return write_text_atomic(path, metrics_csv(per_fold, aggregate))
