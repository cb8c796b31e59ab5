"""Training: the FrameClassifier estimator and the corpus-level train entry.

Training is deterministic: given the same frames, labels, and configuration
the per-epoch shuffles, the He-uniform initialization, and therefore the
final parameters are bit-identical across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from ._rng import Rng, derive
from .checkpoint import ModelCheckpoint, VERSION
from .dataset import Corpus, load_frame_tensors
from .exceptions import DataError, NumericError, UsageError
from .layers import sgd_step, softmax
from .network import Network, default_architecture, grad_check
from .validation import LABELS, check_frames_array, check_labels_array


@dataclass
class TrainConfig:
    """Hyperparameters of one training run."""

    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 0.01
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 0:
            raise UsageError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise UsageError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise UsageError(f"learning_rate must be positive, got {self.learning_rate}")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_accuracy: float | None


class FrameClassifier(BaseEstimator, ClassifierMixin):
    """Behavior classifier: a small fixed conv/pool/dense stack over frames.

    The architecture is conv(8, 3x3) -> ReLU -> maxpool2 -> conv(16, 3x3)
    -> ReLU -> maxpool2 -> flatten -> dense(C), trained with softmax
    cross-entropy and plain SGD on shuffled mini-batches.

    Parameters
    ----------
    epochs : int, default=20
        Number of passes over the training set.
    batch_size : int, default=32
        Mini-batch size; must not exceed the training-set size.
    learning_rate : float, default=0.01
        SGD step size.
    seed : int, default=0
        Seeds weight initialization and the per-epoch shuffles.

    Attributes
    ----------
    classes_ : ndarray of str
        Classes seen during fit, in canonical label order (not sorted
        alphabetically); columns of predict_proba follow this order.
    network_ : Network
        The fitted parameters and architecture.
    history_ : list of EpochStats
        Per-epoch mean training loss and validation accuracy.
    """

    def __init__(self, epochs: int = 20, batch_size: int = 32, learning_rate: float = 0.01, seed: int = 0):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed

    # ------------------------------------------------------------ fitting

    def fit(self, X, y, X_val=None, y_val=None) -> "FrameClassifier":
        """Fit on frames X of shape (n, 1, h, w) and string labels y.

        If a validation set is supplied, its accuracy is recorded per epoch
        in ``history_``.
        """
        config = TrainConfig(self.epochs, self.batch_size, self.learning_rate, self.seed)
        config.validate()
        X = check_frames_array(X)
        y = check_labels_array(y, X.shape[0])
        n, _, h, w = X.shape
        if h % 4 or w % 4:
            raise DataError(f"frame size {w}x{h} must be divisible by 4 (two pooling stages)")
        if config.batch_size > n:
            raise UsageError(f"batch_size {config.batch_size} exceeds training-set size {n}")

        class_names = [name for name in LABELS if name in set(y)]
        if len(class_names) < 2:
            raise DataError(f"training labels cover {len(class_names)} class(es); need at least 2")
        class_index = {name: i for i, name in enumerate(class_names)}
        targets = np.array([class_index[v] for v in y], dtype=np.int64)

        if X_val is not None:
            X_val = check_frames_array(X_val)
            y_val = check_labels_array(y_val, X_val.shape[0])
            if X_val.shape[1:] != X.shape[1:]:
                raise DataError(
                    f"validation frame shape {X_val.shape[1:]} differs from "
                    f"training shape {X.shape[1:]}"
                )

        net = Network.initialized(default_architecture((h, w), len(class_names)), config.seed)
        history: list[EpochStats] = []
        for epoch in range(config.epochs):
            order = Rng(derive(config.seed, "shuffle", epoch)).permutation(n)
            loss_sum = 0.0
            for start in range(0, n, config.batch_size):
                batch = order[start : start + config.batch_size]
                scale = np.float32(1.0 / len(batch))
                sums = None
                for i in batch:
                    loss, grads = net.sample_gradients(X[i], int(targets[i]))
                    loss_sum += loss
                    if sums is None:
                        sums = [(gw, gb) for gw, gb in grads]
                    else:
                        sums = [(sw + gw, sb + gb) for (sw, sb), (gw, gb) in zip(sums, grads)]
                mean_grads = [(sw * scale, sb * scale) for sw, sb in sums]
                net.params = sgd_step(net.params, mean_grads, config.learning_rate)
            mean_loss = loss_sum / n
            if not math.isfinite(mean_loss):
                raise NumericError(f"training loss became non-finite in epoch {epoch}")
            val_acc = None
            if X_val is not None:
                val_acc = _accuracy(net, class_names, X_val, y_val)
            history.append(EpochStats(epoch, mean_loss, val_acc))

        self.classes_ = np.array(class_names, dtype=object)
        self.network_ = net
        self.history_ = history
        self.input_shape_ = (1, h, w)
        return self

    # ------------------------------------------------------------ inference

    def _check_fitted(self) -> None:
        if not hasattr(self, "network_"):
            raise NotFittedError("this FrameClassifier is not fitted yet; call fit first")

    def _check_input_batch(self, X) -> np.ndarray:
        X = check_frames_array(X)
        if X.shape[1:] != self.input_shape_:
            raise DataError(f"expected frames of shape {self.input_shape_}, got {X.shape[1:]}")
        return X

    def predict_proba(self, X) -> np.ndarray:
        """Class probabilities, columns ordered like ``classes_``."""
        self._check_fitted()
        X = self._check_input_batch(X)
        out = np.empty((X.shape[0], len(self.classes_)), dtype=np.float32)
        for i in range(X.shape[0]):
            out[i] = softmax(self.network_.forward(X[i]))
        return out

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    # ------------------------------------------------------------ persistence

    def to_checkpoint(self) -> ModelCheckpoint:
        self._check_fitted()
        net = self.network_
        return ModelCheckpoint(
            version=VERSION,
            architecture=list(net.arch),
            params=[p.copy() for p in net.params],
            rng_seed=self.seed,
            class_names=list(self.classes_),
        )

    @classmethod
    def from_checkpoint(cls, ckpt: ModelCheckpoint) -> "FrameClassifier":
        ckpt.validate()
        clf = cls(seed=ckpt.rng_seed)
        clf.network_ = ckpt.to_network()
        clf.classes_ = np.array(ckpt.class_names, dtype=object)
        clf.history_ = []
        clf.input_shape_ = ckpt.input_shape
        return clf

    def check_gradients(self, x, true_class: int, eps: float = 1e-3, gradient_scale: float = 1.0) -> float:
        """Run the finite-difference gradient check on the fitted network."""
        self._check_fitted()
        return grad_check(self.network_, x, true_class, eps, gradient_scale)


def _accuracy(net: Network, class_names: list[str], X: np.ndarray, y: list[str]) -> float:
    correct = 0
    for i in range(X.shape[0]):
        pred = class_names[int(np.argmax(net.forward(X[i])))]
        correct += pred == y[i]
    return correct / X.shape[0]


def train_model(
    corpus_train: Corpus,
    corpus_val: Corpus,
    config: TrainConfig,
    input_size: int | None = None,
) -> tuple[ModelCheckpoint, list[EpochStats]]:
    """Train the default classifier on corpora of frame files.

    Frames are read from disk, optionally resized to ``input_size``, and
    normalized. Returns the final checkpoint and the per-epoch history.
    """
    config.validate()
    if len(corpus_train) == 0 or len(corpus_val) == 0:
        raise DataError("training and validation corpora must be non-empty")
    X_train, y_train = load_frame_tensors(corpus_train, input_size)
    X_val, y_val = load_frame_tensors(corpus_val, input_size)
    if X_val.shape[1:] != X_train.shape[1:]:
        raise DataError(
            f"validation frames are {X_val.shape[1:]}, training frames {X_train.shape[1:]}"
        )
    clf = FrameClassifier(config.epochs, config.batch_size, config.learning_rate, config.seed)
    clf.fit(X_train, y_train, X_val, y_val)
    return clf.to_checkpoint(), clf.history_
