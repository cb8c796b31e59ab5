"""Forward and backward passes for the micro-CNN layers.

Each forward returns its output together with the cache the matching
backward needs. All math is float32. Two conventions are pinned for
determinism: the ReLU gradient at exactly 0 is 0, and max-pooling ties
route the gradient to the first position in row-major window order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import Rng
from .exceptions import NumericError, ShapeError
from .tensor import as_float, col2im, im2col, matmul
from .validation import check_rank


@dataclass
class LayerParams:
    """Weights and bias of one parametric layer.

    kind is "conv" (weights shaped (F, C, kh, kw)) or "dense"
    (weights shaped (out, in)); bias length is F or out respectively.
    """

    kind: str
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.kind not in ("conv", "dense"):
            raise ShapeError(f"unknown layer kind {self.kind!r}")
        self.weights = as_float(self.weights)
        self.bias = as_float(self.bias)
        if self.weights.dtype != self.bias.dtype:
            raise ShapeError(
                f"{self.kind} weights ({self.weights.dtype}) and bias "
                f"({self.bias.dtype}) must share a dtype"
            )
        expect_rank = 4 if self.kind == "conv" else 2
        check_rank(self.weights, expect_rank, f"{self.kind} weights")
        check_rank(self.bias, 1, f"{self.kind} bias")
        if self.bias.shape[0] != self.weights.shape[0]:
            raise ShapeError(
                f"{self.kind} bias length {self.bias.shape[0]} does not match "
                f"output width {self.weights.shape[0]}"
            )

    def copy(self) -> "LayerParams":
        return LayerParams(self.kind, self.weights.copy(), self.bias.copy())


def he_uniform(kind: str, shape: tuple[int, ...], rng: Rng) -> LayerParams:
    """He-uniform weights (limit sqrt(6/fan_in)) with zero bias.

    Weights are drawn in row-major element order from ``rng`` so that
    initialization is reproducible from the seed alone.
    """
    if kind == "conv":
        fan_in = shape[1] * shape[2] * shape[3]
    else:
        fan_in = shape[1]
    limit = math.sqrt(6.0 / fan_in)
    w = rng.uniforms(int(np.prod(shape)), -limit, limit).astype(np.float32).reshape(shape)
    return LayerParams(kind, w, np.zeros(shape[0], dtype=np.float32))


# ---------------------------------------------------------------- conv


def conv2d(x: np.ndarray, p: LayerParams, stride: int = 1, pad: int = 0):
    """2-D convolution of a (C, H, W) input, computed as weights @ im2col(x)."""
    x = as_float(x)
    check_rank(x, 3, "conv2d input")
    f, c, kh, kw = p.weights.shape
    if x.shape[0] != c:
        raise ShapeError(f"conv2d expects {c} input channels, got {x.shape}")
    cols = im2col(x, kh, kw, stride, pad)
    w2 = p.weights.reshape(f, c * kh * kw)
    out = matmul(w2, cols) + p.bias[:, None]
    out_h = (x.shape[1] + 2 * pad - kh) // stride + 1
    out_w = (x.shape[2] + 2 * pad - kw) // stride + 1
    cache = (x.shape, cols, p, stride, pad)
    return out.reshape(f, out_h, out_w), cache


def conv2d_backward(upstream: np.ndarray, cache):
    """Gradients of conv2d w.r.t. input, weights, and bias."""
    in_shape, cols, p, stride, pad = cache
    f, c, kh, kw = p.weights.shape
    g2 = as_float(upstream).reshape(f, -1)
    if g2.shape[1] != cols.shape[1]:
        raise ShapeError(f"conv2d upstream shape {upstream.shape} does not match forward output")
    gw = matmul(g2, cols.T).reshape(f, c, kh, kw)
    gb = g2.sum(axis=1)
    gcols = matmul(p.weights.reshape(f, -1).T, g2)
    gx = col2im(gcols, in_shape, kh, kw, stride, pad)
    return gx, gw, gb


# ---------------------------------------------------------------- pooling


def maxpool2(x: np.ndarray):
    """2x2 max pooling with stride 2 over a (C, H, W) tensor; H and W even."""
    x = as_float(x)
    check_rank(x, 3, "maxpool2 input")
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2 requires even H and W, got {x.shape}")
    windows = x.reshape(c, h // 2, 2, w // 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h // 2, w // 2, 4)
    argmax = windows.argmax(axis=3)  # first maximal position on ties
    out = np.take_along_axis(windows, argmax[..., None], axis=3)[..., 0]
    return out, (x.shape, argmax)


def maxpool2_backward(upstream: np.ndarray, cache) -> np.ndarray:
    in_shape, argmax = cache
    c, h, w = in_shape
    g = as_float(upstream)
    if g.shape != (c, h // 2, w // 2):
        raise ShapeError(f"maxpool2 upstream shape {g.shape} does not match {(c, h // 2, w // 2)}")
    gwin = np.zeros((c, h // 2, w // 2, 4), dtype=g.dtype)
    np.put_along_axis(gwin, argmax[..., None], g[..., None], axis=3)
    return np.ascontiguousarray(
        gwin.reshape(c, h // 2, w // 2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h, w)
    )


# ---------------------------------------------------------------- relu


def relu(x: np.ndarray) -> np.ndarray:
    x = as_float(x)
    return np.maximum(x, x.dtype.type(0.0))


def relu_backward(upstream: np.ndarray, x: np.ndarray) -> np.ndarray:
    # gradient at exactly 0 is 0
    return as_float(upstream) * (x > 0)


# ---------------------------------------------------------------- dense


def dense(x: np.ndarray, p: LayerParams) -> np.ndarray:
    """Fully connected layer: W @ x + b on a rank-1 input."""
    x = as_float(x)
    check_rank(x, 1, "dense input")
    out, inp = p.weights.shape
    if x.shape[0] != inp:
        raise ShapeError(f"dense expects input length {inp}, got {x.shape[0]}")
    return p.weights @ x + p.bias


def dense_backward(upstream: np.ndarray, x: np.ndarray, p: LayerParams):
    g = as_float(upstream)
    if g.shape != (p.weights.shape[0],):
        raise ShapeError(f"dense upstream shape {g.shape} does not match {p.weights.shape[0]}")
    gx = p.weights.T @ g
    gw = np.outer(g, x).astype(g.dtype)
    gb = g.copy()
    return gx, gw, gb


# ---------------------------------------------------------------- loss


def softmax(logits: np.ndarray) -> np.ndarray:
    z = as_float(logits)
    e = np.exp(z - z.max())
    return e / e.sum()


def softmax_xent(logits: np.ndarray, true_class: int):
    """Softmax cross-entropy loss and its gradient w.r.t. the logits.

    Uses max-subtraction for stability; the loss is computed as
    ``log(sum(exp(z - max))) - (z[t] - max)`` to stay accurate when the true
    class saturates.
    """
    z = as_float(logits)
    check_rank(z, 1, "logits")
    if not np.all(np.isfinite(z)):
        raise NumericError("softmax_xent received non-finite logits")
    if not 0 <= true_class < z.shape[0]:
        raise ShapeError(f"true_class {true_class} out of range for {z.shape[0]} logits")
    shifted = z - z.max()
    exp = np.exp(shifted)
    total = exp.sum()
    loss = float(np.log(total) - shifted[true_class])
    grad = exp / total
    grad[true_class] -= z.dtype.type(1.0)
    return loss, grad


# ---------------------------------------------------------------- optimizer


def sgd_step(params: list[LayerParams], grads: list[tuple[np.ndarray, np.ndarray]], learning_rate: float):
    """Plain SGD: w <- w - lr * g. Returns a new parameter list."""
    if len(params) != len(grads):
        raise ShapeError(f"got {len(grads)} gradients for {len(params)} parameter sets")
    updated = []
    for p, (gw, gb) in zip(params, grads):
        if gw.shape != p.weights.shape or gb.shape != p.bias.shape:
            raise ShapeError(
                f"gradient shapes {gw.shape}/{gb.shape} do not match "
                f"parameter shapes {p.weights.shape}/{p.bias.shape}"
            )
        lr = p.weights.dtype.type(learning_rate)
        updated.append(LayerParams(p.kind, p.weights - lr * gw, p.bias - lr * gb))
    return updated
