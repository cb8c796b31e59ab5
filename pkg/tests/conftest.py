import os

# single-threaded BLAS keeps the timing-gated tests honest and reproducible
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import numpy as np
import pytest

from mousevision.dataset import load_frame_tensors, load_manifest, stratified_split
from mousevision.model import FrameClassifier
from mousevision.preprocess import normalize
from mousevision.synthgen import GenSpec, generate_corpus, render_frame
from mousevision.validation import LABELS

ACCEPTANCE_SEED = 42
ACCEPTANCE_FRAMES_PER_CLASS = 500


@pytest.fixture(scope="session")
def small_corpus_dir(tmp_path_factory):
    """A quick 20-frames-per-class 16x16 corpus on disk."""
    out = tmp_path_factory.mktemp("small-corpus")
    generate_corpus(GenSpec(frames_per_class=20, frame_size=(16, 16), seed=3), out)
    return out


@pytest.fixture(scope="session")
def small_corpus(small_corpus_dir):
    return load_manifest(small_corpus_dir / "manifest.tsv")


@pytest.fixture(scope="session")
def twoclass_data():
    """In-memory eating-vs-abnormal task: linearly distinguishable patterns."""
    per_class, seed = 60, 5
    X, y = [], []
    for label in ("eating", "abnormal"):
        for i in range(per_class):
            X.append(normalize(render_frame(label, i, seed)))
            y.append(label)
    X = np.stack(X)
    rng = np.random.default_rng(0)
    order = rng.permutation(len(y))
    X, y = X[order], [y[i] for i in order]
    n_train = int(0.8 * len(y))
    return X[:n_train], y[:n_train], X[n_train:], y[n_train:]


@pytest.fixture(scope="session")
def acceptance_corpus_dir(tmp_path_factory):
    """The desk-scale corpus the acceptance criteria run against."""
    out = tmp_path_factory.mktemp("acceptance-corpus")
    generate_corpus(
        GenSpec(frames_per_class=ACCEPTANCE_FRAMES_PER_CLASS, seed=ACCEPTANCE_SEED), out
    )
    return out


@pytest.fixture(scope="session")
def acceptance_split(acceptance_corpus_dir):
    corpus = load_manifest(acceptance_corpus_dir / "manifest.tsv")
    train_c, val_c = stratified_split(corpus, 0.8, seed=ACCEPTANCE_SEED)
    X_train, y_train = load_frame_tensors(train_c)
    X_val, y_val = load_frame_tensors(val_c)
    return corpus, (X_train, y_train), (X_val, y_val)


@pytest.fixture(scope="session")
def acceptance_model(acceptance_split):
    """Classifier trained with the default TrainConfig, plus its fit wall time."""
    import time

    _, (X_train, y_train), (X_val, y_val) = acceptance_split
    clf = FrameClassifier(epochs=20, batch_size=32, learning_rate=0.01, seed=ACCEPTANCE_SEED)
    start = time.monotonic()
    clf.fit(X_train, y_train, X_val, y_val)
    elapsed = time.monotonic() - start
    return clf, elapsed


def label_cycle(n):
    return [LABELS[i % len(LABELS)] for i in range(n)]
