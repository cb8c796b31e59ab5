"""Temporal deviation monitoring against a pre-vaccination baseline.

Per-frame predictions are windowed into behavior-frequency distributions;
the pre-phase windows define a baseline profile (mean and per-label spread),
and post-phase windows are scored by total variation distance from that
baseline. An alert fires when ``m_consecutive`` window scores in a row reach
the threshold; each alert consumes its run, so the next one needs a fresh
run of m.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .checkpoint import ModelCheckpoint
from .exceptions import DataError, UsageError
from .model import FrameClassifier
from .validation import ABNORMAL, LABELS, LABEL_INDEX

#: Standard-deviation floor for z-scores; identical pre-phase windows would
#: otherwise divide by zero.
STD_FLOOR = 0.01


def classify_session(
    model: FrameClassifier | ModelCheckpoint,
    frames: np.ndarray | Sequence[np.ndarray],
) -> list[tuple[str, float]]:
    """Per-frame (label, abnormal probability) for frames in time order.

    Frames must already be preprocessed to the model's input size; output
    order equals input order.
    """
    clf = FrameClassifier.from_checkpoint(model) if isinstance(model, ModelCheckpoint) else model
    if ABNORMAL not in clf.classes_:
        raise DataError(f"model has no {ABNORMAL!r} class; cannot monitor with it")
    frames = np.asarray(frames, dtype=np.float32)
    if frames.shape[0] == 0:
        return []
    proba = clf.predict_proba(frames)
    abnormal_col = list(clf.classes_).index(ABNORMAL)
    labels = [str(clf.classes_[i]) for i in np.argmax(proba, axis=1)]
    return [(label, float(p[abnormal_col])) for label, p in zip(labels, proba)]


def window_distributions(labels: Sequence[str], window: int, stride: int) -> list[np.ndarray]:
    """Label-frequency distribution of each complete window.

    Windows start at 0, ``stride`` apart; an incomplete tail is dropped.
    """
    if window < 1 or stride < 1:
        raise UsageError(f"window and stride must be >= 1, got window={window}, stride={stride}")
    out = []
    for start in range(0, len(labels) - window + 1, stride):
        freq = np.zeros(len(LABELS), dtype=np.float64)
        for label in labels[start : start + window]:
            freq[LABEL_INDEX[label]] += 1.0
        out.append(freq / window)
    return out


@dataclass
class BaselineProfile:
    """Mean and per-label population spread of the pre-phase windows."""

    mean: np.ndarray
    std: np.ndarray
    window_count: int


def baseline_profile(pre_distributions: Sequence[np.ndarray]) -> BaselineProfile:
    if len(pre_distributions) < 2:
        raise DataError(
            f"baseline needs >= 2 pre-phase windows, got {len(pre_distributions)}"
        )
    stacked = np.stack([np.asarray(d, dtype=np.float64) for d in pre_distributions])
    return BaselineProfile(stacked.mean(axis=0), stacked.std(axis=0), stacked.shape[0])


@dataclass
class DeviationScore:
    """One window's deviation from baseline: bounded distance plus z-scores."""

    tv: float
    z_scores: np.ndarray

    @property
    def top_deviant_label(self) -> str:
        # largest |z|; on ties prefer the behavior that increased
        order = np.lexsort((-self.z_scores, -np.abs(self.z_scores)))
        return LABELS[int(order[0])]


def deviation_score(distribution: np.ndarray, profile: BaselineProfile) -> DeviationScore:
    """Total variation distance from the baseline mean, plus per-label z-scores."""
    d = np.asarray(distribution, dtype=np.float64)
    if d.shape != profile.mean.shape:
        raise UsageError(f"distribution shape {d.shape} does not match baseline {profile.mean.shape}")
    tv = 0.5 * float(np.abs(d - profile.mean).sum())
    z = (d - profile.mean) / np.maximum(profile.std, STD_FLOOR)
    return DeviationScore(tv, z)


@dataclass
class AlertEvent:
    """A flagged post-phase deviation; window_index counts post windows from 0."""

    session_id: str
    window_index: int
    deviation_score: float
    top_deviant_label: str
    z_scores: np.ndarray


def alert_indices(scores: Sequence[float], threshold: float, m_consecutive: int) -> list[int]:
    """Window indices where the m-th consecutive score >= threshold lands.

    After an alert the run resets, so another alert needs a fresh run of m.
    """
    if not 0.0 < threshold < 1.0:
        raise UsageError(f"threshold must lie in (0, 1), got {threshold}")
    if m_consecutive < 1:
        raise UsageError(f"m_consecutive must be >= 1, got {m_consecutive}")
    hits = []
    run = 0
    for i, score in enumerate(scores):
        run = run + 1 if score >= threshold else 0
        if run == m_consecutive:
            hits.append(i)
            run = 0
    return hits


def detect_alerts(
    deviations: Sequence[DeviationScore],
    threshold: float,
    m_consecutive: int,
    session_id: str = "",
) -> list[AlertEvent]:
    """Apply the consecutive-threshold rule to per-window deviation scores."""
    indices = alert_indices([d.tv for d in deviations], threshold, m_consecutive)
    return [
        AlertEvent(
            session_id=session_id,
            window_index=i,
            deviation_score=deviations[i].tv,
            top_deviant_label=deviations[i].top_deviant_label,
            z_scores=deviations[i].z_scores,
        )
        for i in indices
    ]


@dataclass
class SessionReport:
    """Everything the monitor derived from one session."""

    session_id: str
    baseline: BaselineProfile
    pre_distributions: list[np.ndarray]
    post_distributions: list[np.ndarray]
    deviations: list[DeviationScore]
    alerts: list[AlertEvent]


class DeviationMonitor(BaseEstimator):
    """Baseline/deviation detector over per-frame behavior labels.

    fit() learns the baseline from pre-phase labels; detect() scores
    post-phase labels and returns alert events. Window parameters follow the
    sklearn convention of being set at construction.

    Parameters
    ----------
    window : int, default=50
        Frames per behavior-frequency window.
    stride : int, default=50
        Step between window starts (50 = non-overlapping).
    threshold : float, default=0.2
        Total-variation score a window must reach to count toward an alert.
    m_consecutive : int, default=2
        Number of consecutive qualifying windows required per alert.
    """

    def __init__(self, window: int = 50, stride: int = 50, threshold: float = 0.2, m_consecutive: int = 2):
        self.window = window
        self.stride = stride
        self.threshold = threshold
        self.m_consecutive = m_consecutive

    def fit(self, pre_labels: Sequence[str], y=None) -> "DeviationMonitor":
        """Build the baseline profile from pre-phase frame labels."""
        dists = window_distributions(pre_labels, self.window, self.stride)
        self.baseline_ = baseline_profile(dists)
        self.pre_distributions_ = dists
        return self

    def _check_fitted(self):
        if not hasattr(self, "baseline_"):
            raise NotFittedError("DeviationMonitor is not fitted yet; call fit first")

    def score_windows(self, post_labels: Sequence[str]) -> list[DeviationScore]:
        """Deviation of each complete post-phase window from the baseline."""
        self._check_fitted()
        dists = window_distributions(post_labels, self.window, self.stride)
        return [deviation_score(d, self.baseline_) for d in dists]

    def detect(self, post_labels: Sequence[str], session_id: str = "") -> list[AlertEvent]:
        """Alert events for a post-phase label sequence."""
        return detect_alerts(
            self.score_windows(post_labels), self.threshold, self.m_consecutive, session_id
        )


def monitor_session(
    model: FrameClassifier | ModelCheckpoint,
    session_id: str,
    pre_frames: np.ndarray,
    post_frames: np.ndarray,
    window: int = 50,
    stride: int = 50,
    threshold: float = 0.2,
    m_consecutive: int = 2,
) -> SessionReport:
    """Full pipeline for one session: classify, window, baseline, score, alert."""
    pre_series = classify_session(model, pre_frames)
    post_series = classify_session(model, post_frames)
    mon = DeviationMonitor(window, stride, threshold, m_consecutive)
    mon.fit([label for label, _ in pre_series])
    post_labels = [label for label, _ in post_series]
    deviations = mon.score_windows(post_labels)
    alerts = detect_alerts(deviations, threshold, m_consecutive, session_id)
    return SessionReport(
        session_id=session_id,
        baseline=mon.baseline_,
        pre_distributions=mon.pre_distributions_,
        post_distributions=window_distributions(post_labels, window, stride),
        deviations=deviations,
        alerts=alerts,
    )
