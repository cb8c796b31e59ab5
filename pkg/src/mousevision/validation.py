"""Input validation helpers shared by the estimators and the pipeline."""

from __future__ import annotations

import numpy as np

from .exceptions import DataError, ShapeError, UsageError

#: Canonical behavior classes, in fixed order. ``abnormal`` is the
#: side-effect-indicative positive class used for ROC analysis.
LABELS: tuple[str, ...] = ("eating", "grooming", "nesting", "social", "abnormal")
ABNORMAL = "abnormal"
LABEL_INDEX: dict[str, int] = {name: i for i, name in enumerate(LABELS)}

PHASES: tuple[str, str] = ("pre", "post")


def as_f32(a, shape=None) -> np.ndarray:
    """Coerce to a C-contiguous float32 array, optionally checking shape."""
    out = np.ascontiguousarray(a, dtype=np.float32)
    if shape is not None and out.shape != tuple(shape):
        raise ShapeError(f"expected shape {tuple(shape)}, got {out.shape}")
    return out


def check_rank(a: np.ndarray, rank: int, name: str) -> None:
    if a.ndim != rank:
        raise ShapeError(f"{name} must have rank {rank}, got shape {a.shape}")


def check_finite(a: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(a)):
        raise DataError(f"{name} contains non-finite values")


def check_label(label: str) -> str:
    if label not in LABEL_INDEX:
        raise DataError(f"unknown label {label!r}; expected one of {', '.join(LABELS)}")
    return label


def check_frames_array(X) -> np.ndarray:
    """Validate a batch of model inputs: float32 array of shape (n, 1, h, w)."""
    X = np.asarray(X)
    if X.ndim != 4 or X.shape[1] != 1:
        raise ShapeError(f"expected frame batch of shape (n, 1, h, w), got {X.shape}")
    if X.shape[0] == 0:
        raise DataError("frame batch is empty")
    X = np.ascontiguousarray(X, dtype=np.float32)
    check_finite(X, "frame batch")
    return X


def check_labels_array(y, n: int) -> list[str]:
    """Validate a label vector against the closed class set."""
    labels = [str(v) for v in y]
    if len(labels) != n:
        raise ShapeError(f"got {len(labels)} labels for {n} frames")
    for v in labels:
        check_label(v)
    return labels


def check_positive(value, name: str, kind=UsageError):
    if value <= 0:
        raise kind(f"{name} must be positive, got {value}")
    return value
