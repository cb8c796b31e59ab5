"""Frame preprocessing: rate-based extraction, resizing, scaling, augmentation.

Augmentation is restricted to the five lossless pixel permutations
(flip_h, flip_v, rot90, rot180, rot270), so augmented labels stay valid and
results are byte-exact. rot90 is clockwise: out[r][c] = in[H-1-c][r].
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._rng import Rng, derive
from . import pgm
from .exceptions import DataError, UsageError

AUGMENT_OPS: tuple[str, ...] = ("flip_h", "flip_v", "rot90", "rot180", "rot270")


@dataclass
class Frame:
    """One grayscale frame: 8-bit pixels in a (height, width) array."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.ascontiguousarray(self.pixels)
        if self.pixels.ndim != 2 or self.pixels.dtype != np.uint8:
            raise DataError(
                f"frame pixels must be a 2-D uint8 array, got "
                f"{self.pixels.dtype}{self.pixels.shape}"
            )
        if self.pixels.size == 0:
            raise DataError("frame has zero pixels")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def read(cls, path: str | Path) -> "Frame":
        _, _, pixels = pgm.read_pgm(path)
        return cls(pixels)

    def write(self, path: str | Path) -> Path:
        return pgm.write_pgm(path, self.pixels)


def extract_frames(session_frame_paths: Sequence, rate_divisor: int) -> list:
    """Keep every rate_divisor-th frame (indices 0, d, 2d, ...) in order."""
    if not isinstance(rate_divisor, int) or rate_divisor < 1:
        raise UsageError(f"rate divisor must be a positive integer, got {rate_divisor}")
    return list(session_frame_paths[::rate_divisor])


def resize_bilinear(frame: Frame, out_w: int, out_h: int) -> Frame:
    """Bilinear resize with pixel-center alignment and edge clamping.

    Source coordinates follow src = (dst + 0.5) * (in_size / out_size) - 0.5,
    clamped to the valid range; results are rounded half-up to 8 bits.
    Resizing to the input dimensions is a byte-exact identity.
    """
    if out_w < 1 or out_h < 1:
        raise UsageError(f"resize target must be at least 1x1, got {out_w}x{out_h}")
    in_h, in_w = frame.pixels.shape

    src_x = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0.0, in_w - 1.0)
    src_y = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0.0, in_h - 1.0)
    x0 = np.floor(src_x).astype(np.int64)
    y0 = np.floor(src_y).astype(np.int64)
    x1 = np.minimum(x0 + 1, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    fx = src_x - x0
    fy = src_y - y0

    px = frame.pixels.astype(np.float64)
    top = px[y0][:, x0] * (1 - fx) + px[y0][:, x1] * fx
    bottom = px[y1][:, x0] * (1 - fx) + px[y1][:, x1] * fx
    value = top * (1 - fy)[:, None] + bottom * fy[:, None]
    return Frame(np.clip(np.floor(value + 0.5), 0, 255).astype(np.uint8))


def normalize(frame: Frame) -> np.ndarray:
    """Map 8-bit pixels to a float32 (1, H, W) tensor in [-0.5, 0.5]."""
    scaled = frame.pixels.astype(np.float32) / np.float32(255.0) - np.float32(0.5)
    return scaled[None, :, :]


def augment(frame: Frame, op: str) -> Frame:
    """Apply one of the five lossless augmentation ops."""
    px = frame.pixels
    if op == "flip_h":
        out = px[:, ::-1]
    elif op == "flip_v":
        out = px[::-1, :]
    elif op == "rot90":
        out = np.rot90(px, k=-1)  # clockwise
    elif op == "rot180":
        out = px[::-1, ::-1]
    elif op == "rot270":
        out = np.rot90(px, k=1)
    else:
        raise UsageError(f"unknown augment op {op!r}; expected one of {', '.join(AUGMENT_OPS)}")
    return Frame(np.ascontiguousarray(out))


def augment_training_frames(
    frames: Sequence[Frame],
    labels: Sequence[str],
    copies_per_frame: int,
    seed: int,
) -> tuple[list[Frame], list[str]]:
    """Expand a training set with randomly chosen augmentation ops.

    Each source frame gains ``copies_per_frame`` augmented copies whose ops
    are drawn uniformly from the five-op set, deterministically in ``seed``.
    Validation and test frames must never pass through here; the caller owns
    that policy.
    """
    if len(frames) != len(labels):
        raise UsageError(f"got {len(labels)} labels for {len(frames)} frames")
    if copies_per_frame < 0:
        raise UsageError(f"copies_per_frame must be >= 0, got {copies_per_frame}")
    out_frames = list(frames)
    out_labels = list(labels)
    for i, (frame, label) in enumerate(zip(frames, labels)):
        rng = Rng(derive(seed, "augment", i))
        for _ in range(copies_per_frame):
            op = AUGMENT_OPS[rng.randbelow(len(AUGMENT_OPS))]
            out_frames.append(augment(frame, op))
            out_labels.append(label)
    return out_frames, out_labels
