"""Labeled-corpus loading, train/validation splitting, k-fold partitioning.

The on-disk manifest is UTF-8 text, one record per line, tab-separated:

    frame_path<TAB>session_id<TAB>phase<TAB>t_index<TAB>label

Lines starting with ``#`` are ignored; record order is significant. Relative
frame paths are resolved against the manifest's directory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from ._io import write_text_atomic
from ._rng import Rng, derive
from .exceptions import DataError, UsageError
from .preprocess import Frame, normalize, resize_bilinear
from .validation import LABELS, PHASES


@dataclass(frozen=True)
class LabeledFrame:
    """One annotated frame within a session."""

    frame_path: Path
    label: str
    session_id: str
    phase: str
    t_index: int


@dataclass
class Corpus:
    """Ordered collection of labeled frames, as loaded from one manifest."""

    frames: list[LabeledFrame] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[LabeledFrame]:
        return iter(self.frames)

    def __getitem__(self, i: int) -> LabeledFrame:
        return self.frames[i]

    def labels(self) -> list[str]:
        return [f.label for f in self.frames]

    def classes_present(self) -> list[str]:
        present = {f.label for f in self.frames}
        return [name for name in LABELS if name in present]

    def class_counts(self) -> dict[str, int]:
        counts = {name: 0 for name in LABELS}
        for f in self.frames:
            counts[f.label] += 1
        return counts

    def filter(self, keep: Callable[[LabeledFrame], bool]) -> "Corpus":
        return Corpus([f for f in self.frames if keep(f)])

    def session_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for f in self.frames:
            seen.setdefault(f.session_id, None)
        return list(seen)

    def subset(self, indices: Sequence[int]) -> "Corpus":
        return Corpus([self.frames[i] for i in indices])


def load_manifest(path: str | Path) -> Corpus:
    """Parse and validate a manifest file."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    root = path.parent
    frames: list[LabeledFrame] = []
    seen_paths: dict[Path, int] = {}
    last_t: dict[tuple[str, str], int] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 tab-separated fields, got {len(fields)}")
            raw_path, session_id, phase, t_raw, label = fields
            if label not in LABELS:
                raise DataError(
                    f"{path}:{lineno}: unknown label {label!r}; expected one of {', '.join(LABELS)}"
                )
            if phase not in PHASES:
                raise DataError(f"{path}:{lineno}: phase must be 'pre' or 'post', got {phase!r}")
            try:
                t_index = int(t_raw)
            except ValueError:
                raise DataError(f"{path}:{lineno}: t_index must be an integer, got {t_raw!r}") from None
            if t_index < 0:
                raise DataError(f"{path}:{lineno}: t_index must be >= 0, got {t_index}")
            frame_path = Path(raw_path)
            if not frame_path.is_absolute():
                frame_path = root / frame_path
            if frame_path in seen_paths:
                raise DataError(
                    f"{path}:{lineno}: duplicate frame path {raw_path!r} "
                    f"(first seen on line {seen_paths[frame_path]})"
                )
            seen_paths[frame_path] = lineno
            key = (session_id, phase)
            if key in last_t and t_index <= last_t[key]:
                raise DataError(
                    f"{path}:{lineno}: t_index {t_index} not strictly increasing within "
                    f"session {session_id!r} phase {phase!r} (previous was {last_t[key]})"
                )
            last_t[key] = t_index
            if not frame_path.is_file():
                raise DataError(f"{path}:{lineno}: frame file not found: {frame_path}")
            frames.append(LabeledFrame(frame_path, label, session_id, phase, t_index))
    return Corpus(frames)


def write_manifest(records: Sequence[tuple[str, str, str, int, str]], path: str | Path) -> Path:
    """Write manifest records (path, session, phase, t_index, label) to disk."""
    lines = [f"{p}\t{s}\t{ph}\t{t}\t{lb}" for p, s, ph, t, lb in records]
    return write_text_atomic(path, "\n".join(lines) + ("\n" if lines else ""))


def _per_class_indices(corpus: Corpus) -> list[tuple[int, list[int]]]:
    """Indices grouped by class, in canonical label order; absent classes skipped."""
    groups: list[tuple[int, list[int]]] = []
    for ci, name in enumerate(LABELS):
        idx = [i for i, f in enumerate(corpus.frames) if f.label == name]
        if idx:
            groups.append((ci, idx))
    return groups


def stratified_split(
    corpus: Corpus,
    train_fraction: float,
    seed: int,
    group_by_session: bool = False,
) -> tuple[Corpus, Corpus]:
    """Shuffle within each class and split off round(fraction * n) for training.

    The two parts partition the corpus exactly and each preserves original
    corpus order. With ``group_by_session`` whole sessions are assigned to one
    side instead (label stratification is then best-effort only).
    """
    if not 0.0 < train_fraction < 1.0:
        raise UsageError(f"train fraction must lie strictly between 0 and 1, got {train_fraction}")
    if len(corpus) == 0:
        raise DataError("cannot split an empty corpus")

    train_idx: list[int] = []
    if group_by_session:
        sessions = corpus.session_ids()
        rng = Rng(derive(seed, "split-sessions"))
        rng.shuffle(sessions)
        n_train = int(np.floor(train_fraction * len(sessions) + 0.5))
        chosen = set(sessions[:n_train])
        train_idx = [i for i, f in enumerate(corpus.frames) if f.session_id in chosen]
    else:
        for ci, idx in _per_class_indices(corpus):
            if len(idx) < 2:
                raise DataError(
                    f"class {LABELS[ci]!r} has {len(idx)} sample(s); "
                    f"need at least 2 to split"
                )
            rng = Rng(derive(seed, "split", ci))
            shuffled = list(idx)
            rng.shuffle(shuffled)
            n_train = int(np.floor(train_fraction * len(idx) + 0.5))
            train_idx.extend(shuffled[:n_train])

    train_set = set(train_idx)
    train = corpus.subset([i for i in range(len(corpus)) if i in train_set])
    val = corpus.subset([i for i in range(len(corpus)) if i not in train_set])
    return train, val


@dataclass
class FoldSplit:
    """A k-fold assignment: fold index in [0, k) for every corpus position."""

    k: int
    assignments: np.ndarray

    def fold_indices(self, fold: int) -> list[int]:
        return [i for i, a in enumerate(self.assignments) if a == fold]


def kfold_split(corpus: Corpus, k: int, seed: int, group_by_session: bool = False) -> FoldSplit:
    """Stratified k-fold assignment: per-class seeded shuffle, then round-robin.

    Every sample lands in exactly one fold and per-class fold sizes differ by
    at most one. Requires 2 <= k <= smallest class count.
    """
    if len(corpus) == 0:
        raise DataError("cannot fold an empty corpus")
    if k < 2:
        raise UsageError(f"k must be at least 2, got {k}")
    assignments = np.full(len(corpus), -1, dtype=np.int64)
    if group_by_session:
        sessions = corpus.session_ids()
        if k > len(sessions):
            raise UsageError(f"k={k} exceeds the number of sessions ({len(sessions)})")
        rng = Rng(derive(seed, "fold-sessions"))
        rng.shuffle(sessions)
        fold_of = {s: i % k for i, s in enumerate(sessions)}
        for i, f in enumerate(corpus.frames):
            assignments[i] = fold_of[f.session_id]
    else:
        min_count = min(len(idx) for _, idx in _per_class_indices(corpus))
        if k > min_count:
            raise UsageError(f"k={k} exceeds the smallest class count ({min_count})")
        for ci, idx in _per_class_indices(corpus):
            rng = Rng(derive(seed, "fold", ci))
            shuffled = list(idx)
            rng.shuffle(shuffled)
            for j, sample in enumerate(shuffled):
                assignments[sample] = j % k
    return FoldSplit(k, assignments)


def fold_corpora(corpus: Corpus, split: FoldSplit, fold: int) -> tuple[Corpus, Corpus]:
    """Training and validation corpora for one fold index."""
    if not 0 <= fold < split.k:
        raise UsageError(f"fold {fold} out of range for k={split.k}")
    train = corpus.subset([i for i, a in enumerate(split.assignments) if a != fold])
    val = corpus.subset([i for i, a in enumerate(split.assignments) if a == fold])
    return train, val


def load_frame_tensors(corpus: Corpus, input_size: int | tuple[int, int] | None = None):
    """Read, optionally resize, and normalize every frame of a corpus.

    Returns (X, y): X is float32 of shape (n, 1, h, w), y the label list.
    ``input_size`` may be one side length (square) or an (h, w) pair; without
    it all frames must already share one size.
    """
    if len(corpus) == 0:
        raise DataError("corpus is empty")
    target = None
    if input_size is not None:
        target = (input_size, input_size) if isinstance(input_size, int) else tuple(input_size)
    tensors = []
    size = None
    for f in corpus.frames:
        frame = Frame.read(f.frame_path)
        if target is not None and (frame.height, frame.width) != target:
            frame = resize_bilinear(frame, target[1], target[0])
        if size is None:
            size = (frame.height, frame.width)
        elif (frame.height, frame.width) != size:
            raise DataError(
                f"frame size mismatch: {f.frame_path} is {frame.width}x{frame.height}, "
                f"expected {size[1]}x{size[0]}"
            )
        tensors.append(normalize(frame))
    return np.stack(tensors), corpus.labels()
