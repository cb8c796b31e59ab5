"""Automated behavior monitoring for rodent vaccine trials.

A from-scratch convolutional behavior classifier over grayscale video
frames, an evaluation and cross-validation suite, and a pre/post-baseline
temporal deviation monitor, plus a deterministic synthetic corpus generator
that makes the whole pipeline testable end to end.
"""

from .checkpoint import ModelCheckpoint, load_checkpoint, save_checkpoint
from .dataset import (
    Corpus,
    FoldSplit,
    LabeledFrame,
    fold_corpora,
    kfold_split,
    load_frame_tensors,
    load_manifest,
    stratified_split,
)
from .evaluate import (
    ConfusionMatrix,
    CrossvalSummary,
    MetricsReport,
    RocCurve,
    classification_metrics,
    confusion_matrix,
    crossval_report,
    metrics_csv,
    roc_auc,
    write_metrics_csv,
)
from .exceptions import DataError, MouseVisionError, NumericError, ShapeError, UsageError
from .model import EpochStats, FrameClassifier, TrainConfig, train_model
from .monitor import (
    AlertEvent,
    BaselineProfile,
    DeviationMonitor,
    DeviationScore,
    SessionReport,
    alert_indices,
    baseline_profile,
    classify_session,
    detect_alerts,
    deviation_score,
    monitor_session,
    window_distributions,
)
from .network import GradCheckResult, grad_check
from .pgm import read_pgm, write_pgm
from .preprocess import (
    AUGMENT_OPS,
    Frame,
    augment,
    augment_training_frames,
    extract_frames,
    normalize,
    resize_bilinear,
)
from .synthgen import (
    GenSpec,
    SessionSpec,
    generate_corpus,
    generate_session,
    render_frame,
    session_labels,
)
from .validation import ABNORMAL, LABELS

__version__ = "0.1.0"

__all__ = [
    "ABNORMAL",
    "AUGMENT_OPS",
    "AlertEvent",
    "BaselineProfile",
    "ConfusionMatrix",
    "Corpus",
    "CrossvalSummary",
    "DataError",
    "DeviationMonitor",
    "DeviationScore",
    "EpochStats",
    "FoldSplit",
    "Frame",
    "FrameClassifier",
    "GenSpec",
    "GradCheckResult",
    "LABELS",
    "LabeledFrame",
    "MetricsReport",
    "ModelCheckpoint",
    "MouseVisionError",
    "NumericError",
    "RocCurve",
    "SessionReport",
    "SessionSpec",
    "ShapeError",
    "TrainConfig",
    "UsageError",
    "alert_indices",
    "augment",
    "augment_training_frames",
    "baseline_profile",
    "classification_metrics",
    "classify_session",
    "confusion_matrix",
    "crossval_report",
    "detect_alerts",
    "deviation_score",
    "extract_frames",
    "fold_corpora",
    "generate_corpus",
    "generate_session",
    "grad_check",
    "kfold_split",
    "load_checkpoint",
    "load_frame_tensors",
    "load_manifest",
    "metrics_csv",
    "monitor_session",
    "normalize",
    "read_pgm",
    "render_frame",
    "resize_bilinear",
    "roc_auc",
    "save_checkpoint",
    "session_labels",
    "stratified_split",
    "train_model",
    "window_distributions",
    "write_metrics_csv",
    "write_pgm",
]
