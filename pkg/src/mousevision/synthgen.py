"""Deterministic synthetic frame corpus with known behavior labels.

Each frame shows Gaussian blobs on a dark noisy background; class identity
is carried by where the blob sits and how it moves within the frame's
internal micro-trajectory, rendered as motion blur over a few sub-steps:

    eating    small orbit around a fixed "feeder" corner (smeared ring)
    grooming  wide high-frequency jitter mid-cage (diffuse cloud)
    nesting   slow drift toward the corner opposite the feeder (streak)
    social    two blobs whose separation shrinks over time
    abnormal  near-immobile sharp blob with high-frequency intensity tremor

Every frame is a pure function of (seed, label, index): its generator stream
is ``derive(seed, "frame", label, index)``, so frames can be re-rendered
from their filenames alone and generated in parallel.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._rng import Rng, derive
from .dataset import write_manifest
from .exceptions import DataError, UsageError
from .pgm import write_pgm
from .preprocess import Frame
from .validation import ABNORMAL, LABELS

SUBSTEPS = 8
BACKGROUND = 12.0
MANIFEST_NAME = "manifest.tsv"

_NORMAL_LABELS = tuple(name for name in LABELS if name != ABNORMAL)
_FILENAME_RE = re.compile(r"^cls-([a-z]+)_i-(\d+)_s-(\d+)\.pgm$")


@dataclass
class GenSpec:
    """Parameters of a labeled training corpus."""

    frames_per_class: int
    frame_size: tuple[int, int] = (32, 32)
    seed: int = 0
    noise_sigma: float = 8.0

    def validate(self) -> None:
        if self.frames_per_class < 1:
            raise UsageError(f"frames_per_class must be >= 1, got {self.frames_per_class}")
        if self.frame_size[0] < 16 or self.frame_size[1] < 16:
            raise UsageError(f"frame size must be at least 16x16, got {self.frame_size}")
        if self.noise_sigma < 0:
            raise UsageError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


@dataclass
class SessionSpec:
    """Parameters of one pre/post monitoring session."""

    pre_frames: int
    post_frames: int
    pre_abnormal_rate: float
    post_abnormal_rate: float
    seed: int = 0

    def validate(self) -> None:
        if self.pre_frames < 1 or self.post_frames < 1:
            raise UsageError("pre_frames and post_frames must be >= 1")
        for name, rate in (("pre", self.pre_abnormal_rate), ("post", self.post_abnormal_rate)):
            if not 0.0 <= rate <= 1.0:
                raise UsageError(f"{name} abnormal rate must lie in [0, 1], got {rate}")


def _add_blob(canvas: np.ndarray, cx: float, cy: float, sigma: float, amp: float) -> None:
    h, w = canvas.shape
    r = int(math.ceil(4.0 * sigma))
    x0, x1 = max(0, int(cx) - r), min(w, int(cx) + r + 1)
    y0, y1 = max(0, int(cy) - r), min(h, int(cy) + r + 1)
    if x0 >= x1 or y0 >= y1:
        return
    xs = np.arange(x0, x1, dtype=np.float64)[None, :]
    ys = np.arange(y0, y1, dtype=np.float64)[:, None]
    canvas[y0:y1, x0:x1] += amp * np.exp(
        -((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * sigma * sigma)
    )


def _micro_trajectory(label: str, index: int, rng: Rng, w: int, h: int):
    """Per-substep blob placements [(cx, cy, sigma, amp), ...] for one frame."""
    s = float(min(w, h))
    steps = []
    if label == "eating":
        cx = 0.25 * w + rng.uniform(-0.02, 0.02) * s
        cy = 0.25 * h + rng.uniform(-0.02, 0.02) * s
        phase = rng.uniform(0.0, 2.0 * math.pi)
        radius = 0.055 * s
        for t in range(SUBSTEPS):
            theta = phase + 2.0 * math.pi * t / SUBSTEPS
            steps.append([(cx + radius * math.cos(theta), cy + radius * math.sin(theta), 0.07 * s, 200.0)])
    elif label == "grooming":
        cx = 0.5 * w + rng.uniform(-0.14, 0.14) * s
        cy = 0.5 * h + rng.uniform(-0.14, 0.14) * s
        for _ in range(SUBSTEPS):
            jx = rng.uniform(-0.14, 0.14) * s
            jy = rng.uniform(-0.14, 0.14) * s
            steps.append([(cx + jx, cy + jy, 0.05 * s, 200.0)])
    elif label == "nesting":
        progress = (index % 40) / 40.0
        cx = (0.55 + 0.25 * progress) * w + rng.uniform(-0.02, 0.02) * s
        cy = (0.55 + 0.25 * progress) * h + rng.uniform(-0.02, 0.02) * s
        drift = 0.18 * s / math.sqrt(2.0)
        for t in range(SUBSTEPS):
            frac = t / (SUBSTEPS - 1) - 0.5
            steps.append([(cx + drift * frac, cy + drift * frac, 0.06 * s, 200.0)])
    elif label == "social":
        cx = 0.5 * w + rng.uniform(-0.05, 0.05) * s
        cy = 0.5 * h + rng.uniform(-0.05, 0.05) * s
        angle = rng.uniform(0.0, math.pi)
        sep = (0.42 - 0.18 * ((index % 50) / 50.0)) * s
        ux, uy = math.cos(angle), math.sin(angle)
        for t in range(SUBSTEPS):
            sep_t = sep - 0.04 * s * t / (SUBSTEPS - 1)
            dx, dy = 0.5 * sep_t * ux, 0.5 * sep_t * uy
            steps.append(
                [
                    (cx - dx, cy - dy, 0.055 * s, 185.0),
                    (cx + dx, cy + dy, 0.055 * s, 185.0),
                ]
            )
    elif label == ABNORMAL:
        # placement range ends before the nesting drift corridor
        cx = 0.42 * w + rng.uniform(-0.14, 0.14) * s
        cy = 0.42 * h + rng.uniform(-0.14, 0.14) * s
        for t in range(SUBSTEPS):
            jx = rng.uniform(-0.008, 0.008) * s
            jy = rng.uniform(-0.008, 0.008) * s
            tremor = 1.0 + 0.7 * (1.0 if t % 2 == 0 else -1.0)
            steps.append([(cx + jx, cy + jy, 0.04 * s, 230.0 * tremor)])
    else:
        raise UsageError(f"unknown label {label!r}")
    return steps


def render_frame(
    label: str,
    index: int,
    seed: int,
    frame_size: tuple[int, int] = (32, 32),
    noise_sigma: float = 8.0,
) -> Frame:
    """Render one frame; a pure function of its arguments."""
    w, h = frame_size
    rng = Rng(derive(seed, "frame", label, index))
    canvas = np.zeros((h, w), dtype=np.float64)
    for placements in _micro_trajectory(label, index, rng, w, h):
        for cx, cy, sigma, amp in placements:
            _add_blob(canvas, cx, cy, sigma, amp)
    image = BACKGROUND + canvas / SUBSTEPS
    if noise_sigma > 0:
        image = image + rng.normals(h * w, noise_sigma).reshape(h, w)
    return Frame(np.clip(np.floor(image + 0.5), 0, 255).astype(np.uint8))


def frame_filename(label: str, index: int, seed: int) -> str:
    return f"cls-{label}_i-{index}_s-{seed}.pgm"


def parse_frame_filename(name: str) -> tuple[str, int, int]:
    """Recover (label, index, seed) from a generated frame's filename."""
    m = _FILENAME_RE.match(name)
    if not m:
        raise DataError(f"not a generated frame filename: {name!r}")
    return m.group(1), int(m.group(2)), int(m.group(3))


def generate_corpus(spec: GenSpec, out_dir: str | Path) -> Path:
    """Write frames_per_class frames for each of the 5 labels plus a manifest."""
    spec.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for label in LABELS:
        for i in range(spec.frames_per_class):
            frame = render_frame(label, i, spec.seed, spec.frame_size, spec.noise_sigma)
            name = frame_filename(label, i, spec.seed)
            frame.write(out_dir / name)
            records.append((name, f"gen-{label}", "pre", i, label))
    return write_manifest(records, out_dir / MANIFEST_NAME)


def session_labels(spec: SessionSpec) -> list[tuple[str, int, str]]:
    """The (phase, t_index, label) sequence of a session, without rendering.

    Each frame is abnormal with its phase's rate; the remaining probability
    mass is uniform over the four normal behaviors.
    """
    spec.validate()
    rng = Rng(derive(spec.seed, "labels"))
    out = []
    for t in range(spec.pre_frames + spec.post_frames):
        phase = "pre" if t < spec.pre_frames else "post"
        rate = spec.pre_abnormal_rate if phase == "pre" else spec.post_abnormal_rate
        if rng.uniform() < rate:
            label = ABNORMAL
        else:
            label = _NORMAL_LABELS[rng.randbelow(len(_NORMAL_LABELS))]
        out.append((phase, t, label))
    return out


def generate_session(
    spec: SessionSpec,
    out_dir: str | Path,
    frame_size: tuple[int, int] = (32, 32),
    noise_sigma: float = 8.0,
    session_id: str | None = None,
) -> Path:
    """Write one pre/post session's frames and manifest; returns manifest path."""
    spec.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sid = session_id if session_id is not None else f"session-{spec.seed}"
    records = []
    for phase, t, label in session_labels(spec):
        frame = render_frame(label, t, spec.seed, frame_size, noise_sigma)
        name = frame_filename(label, t, spec.seed)
        write_pgm(out_dir / name, frame.pixels)
        records.append((name, sid, phase, t, label))
    return write_manifest(records, out_dir / MANIFEST_NAME)
