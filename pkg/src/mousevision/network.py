"""The micro-CNN: architecture descriptors, forward/backward, gradient check.

The fixed classifier stack is conv(8, 3x3, stride 1, pad 1) -> ReLU ->
maxpool2 -> conv(16, 3x3, stride 1, pad 1) -> ReLU -> maxpool2 -> flatten ->
dense(C). Input height and width must therefore be divisible by 4.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import Rng, derive
from .exceptions import DataError, ShapeError
from .layers import (
    LayerParams,
    conv2d,
    conv2d_backward,
    dense,
    dense_backward,
    he_uniform,
    maxpool2,
    maxpool2_backward,
    relu,
    relu_backward,
    softmax_xent,
)
from .tensor import conv_output_size

PARAM_KINDS = ("conv", "dense")


@dataclass(frozen=True)
class LayerSpec:
    """One architecture table entry: a kind plus its integer dimensions.

    dims by kind: input (C, H, W); conv (F, C, kh, kw, stride, pad);
    dense (out, in); relu/pool/flatten ().
    """

    kind: str
    dims: tuple[int, ...] = field(default_factory=tuple)


def default_architecture(input_hw: tuple[int, int], n_classes: int) -> list[LayerSpec]:
    h, w = input_hw
    flat = 16 * (h // 4) * (w // 4)
    return [
        LayerSpec("input", (1, h, w)),
        LayerSpec("conv", (8, 1, 3, 3, 1, 1)),
        LayerSpec("relu"),
        LayerSpec("pool"),
        LayerSpec("conv", (16, 8, 3, 3, 1, 1)),
        LayerSpec("relu"),
        LayerSpec("pool"),
        LayerSpec("flatten"),
        LayerSpec("dense", (n_classes, flat)),
    ]


def validate_architecture(arch: list[LayerSpec]) -> int:
    """Check layer-to-layer shape consistency; return the output width."""
    if not arch or arch[0].kind != "input":
        raise DataError("architecture must start with an input descriptor")
    if len(arch[0].dims) != 3:
        raise DataError(f"input descriptor needs (C, H, W), got {arch[0].dims}")
    shape: tuple[int, ...] = arch[0].dims
    width = None
    for i, spec in enumerate(arch[1:], start=1):
        if spec.kind == "conv":
            if len(shape) != 3:
                raise DataError(f"layer {i}: conv requires a (C, H, W) input, have {shape}")
            f, c, kh, kw, stride, pad = spec.dims
            if c != shape[0]:
                raise DataError(f"layer {i}: conv expects {c} channels but gets {shape[0]}")
            oh = conv_output_size(shape[1], kh, stride, pad)
            ow = conv_output_size(shape[2], kw, stride, pad)
            if oh < 1 or ow < 1:
                raise DataError(f"layer {i}: conv output collapses to {oh}x{ow}")
            shape = (f, oh, ow)
        elif spec.kind == "relu":
            pass
        elif spec.kind == "pool":
            if len(shape) != 3 or shape[1] % 2 or shape[2] % 2:
                raise DataError(f"layer {i}: maxpool2 requires even (C, H, W) input, have {shape}")
            shape = (shape[0], shape[1] // 2, shape[2] // 2)
        elif spec.kind == "flatten":
            shape = (int(np.prod(shape)),)
        elif spec.kind == "dense":
            out, inp = spec.dims
            if len(shape) != 1 or shape[0] != inp:
                raise DataError(f"layer {i}: dense expects input width {inp}, have {shape}")
            shape = (out,)
            width = out
        else:
            raise DataError(f"layer {i}: unknown layer kind {spec.kind!r}")
    if width is None or len(shape) != 1:
        raise DataError("architecture must end in a dense layer")
    return shape[0]


def init_params(arch: list[LayerSpec], seed: int) -> list[LayerParams]:
    """He-uniform parameters for every conv/dense layer, zero biases.

    Each layer draws from its own substream ``derive(seed, "init", i)`` so the
    initialization of one layer does not depend on the sizes of the others.
    """
    params = []
    for i, spec in enumerate(arch):
        if spec.kind == "conv":
            shape = spec.dims[:4]
        elif spec.kind == "dense":
            shape = spec.dims
        else:
            continue
        params.append(he_uniform(spec.kind, shape, Rng(derive(seed, "init", i))))
    return params


class Network:
    """Parameterized instance of an architecture table."""

    def __init__(self, arch: list[LayerSpec], params: list[LayerParams]):
        self.arch = list(arch)
        self.n_classes = validate_architecture(self.arch)
        self.param_layers = [i for i, s in enumerate(self.arch) if s.kind in PARAM_KINDS]
        if len(params) != len(self.param_layers):
            raise ShapeError(
                f"architecture has {len(self.param_layers)} parametric layers, got {len(params)}"
            )
        self.params = list(params)
        self._param_index = {layer: pi for pi, layer in enumerate(self.param_layers)}
        dtypes = {p.weights.dtype for p in self.params}
        if len(dtypes) != 1:
            raise ShapeError(f"all layer parameters must share one dtype, got {dtypes}")
        self.dtype = self.params[0].weights.dtype

    @classmethod
    def initialized(cls, arch: list[LayerSpec], seed: int) -> "Network":
        return cls(arch, init_params(arch, seed))

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return self.arch[0].dims

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=self.dtype)
        if x.shape != self.input_shape:
            raise ShapeError(f"network expects input {self.input_shape}, got {x.shape}")
        return x

    def as_dtype(self, dtype) -> "Network":
        """A copy of this network with parameters cast to ``dtype``."""
        return Network(
            self.arch,
            [LayerParams(p.kind, p.weights.astype(dtype), p.bias.astype(dtype)) for p in self.params],
        )

    def _param_for(self, layer_index: int) -> LayerParams:
        return self.params[self._param_index[layer_index]]

    def _run_layer(self, i: int, a: np.ndarray):
        """Apply arch layer i to activation a; returns (out, cache)."""
        spec = self.arch[i]
        if spec.kind == "conv":
            _, _, _, _, stride, pad = spec.dims
            return conv2d(a, self._param_for(i), stride, pad)
        if spec.kind == "relu":
            return relu(a), a
        if spec.kind == "pool":
            return maxpool2(a)
        if spec.kind == "flatten":
            return np.ascontiguousarray(a).reshape(-1), a.shape
        if spec.kind == "dense":
            return dense(a, self._param_for(i)), a
        raise ShapeError(f"cannot run layer kind {spec.kind!r}")

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Logits for one (C, H, W) input."""
        a = self._check_input(x)
        for i in range(1, len(self.arch)):
            a, _ = self._run_layer(i, a)
        return a

    def forward_recorded(self, x: np.ndarray):
        """Forward pass keeping per-layer input activations and caches.

        Returns (logits, acts, caches) where acts[i] is the input to arch
        layer i and caches[i] is the backward cache produced by layer i.
        """
        a = self._check_input(x)
        acts: list = [None] * len(self.arch)
        caches: list = [None] * len(self.arch)
        for i in range(1, len(self.arch)):
            acts[i] = a
            a, caches[i] = self._run_layer(i, a)
        return a, acts, caches

    def backward(self, grad_logits: np.ndarray, acts, caches):
        """Backpropagate a logits gradient; returns (gw, gb) per param layer."""
        grads: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        g = grad_logits
        for i in range(len(self.arch) - 1, 0, -1):
            spec = self.arch[i]
            if spec.kind == "conv":
                g, gw, gb = conv2d_backward(g, caches[i])
                grads[i] = (gw, gb)
            elif spec.kind == "relu":
                g = relu_backward(g, caches[i])
            elif spec.kind == "pool":
                g = maxpool2_backward(g, caches[i])
            elif spec.kind == "flatten":
                g = g.reshape(caches[i])
            elif spec.kind == "dense":
                g, gw, gb = dense_backward(g, acts[i], self._param_for(i))
                grads[i] = (gw, gb)
        return [grads[i] for i in self.param_layers]

    def sample_gradients(self, x: np.ndarray, true_class: int):
        """Loss and parameter gradients for a single labeled input."""
        logits, acts, caches = self.forward_recorded(x)
        loss, grad_logits = softmax_xent(logits, true_class)
        return loss, self.backward(grad_logits, acts, caches)


class _ReferenceEvaluator:
    """Independent float64 forward used as the finite-difference oracle.

    A float32 loss carries ~1e-7 of rounding, which at eps = 1e-3 floors the
    finite-difference resolution near 6e-5 and drowns small gradients. The
    oracle therefore re-evaluates the architecture in float64, written as a
    separate sliding-window walk so the check does not share the production
    im2col/GEMM code path it verifies.
    """

    def __init__(self, net: Network, x: np.ndarray):
        self.net = net
        self.params64 = [
            (p.weights.astype(np.float64), p.bias.astype(np.float64)) for p in net.params
        ]
        self.acts = self._record(np.asarray(x, dtype=np.float64))
        # A perturbed conv layer never sees a perturbed input, so its patch
        # matrix can be extracted once.
        self.patches: dict[int, np.ndarray] = {
            i: self._patch_matrix(i, self.acts[i])
            for i, spec in enumerate(net.arch)
            if spec.kind == "conv"
        }

    def _windows(self, i: int, a: np.ndarray) -> np.ndarray:
        _, _, kh, kw, stride, pad = self.net.arch[i].dims
        xp = np.pad(a, ((0, 0), (pad, pad), (pad, pad))) if pad else a
        win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
        return win[:, ::stride, ::stride]  # (C, oh, ow, kh, kw)

    def _patch_matrix(self, i: int, a: np.ndarray) -> np.ndarray:
        win = self._windows(i, a)
        c, oh, ow, kh, kw = win.shape
        return np.ascontiguousarray(win.transpose(0, 3, 4, 1, 2).reshape(c * kh * kw, oh * ow))

    def _layer(self, i: int, a: np.ndarray, at_start: bool) -> np.ndarray:
        spec = self.net.arch[i]
        if spec.kind == "conv":
            w, b = self.params64[self.net._param_index[i]]
            f = spec.dims[0]
            if at_start:
                win = self.patches[i]
                oh = conv_output_size(a.shape[1], spec.dims[2], spec.dims[4], spec.dims[5])
                ow = conv_output_size(a.shape[2], spec.dims[3], spec.dims[4], spec.dims[5])
                return (w.reshape(f, -1) @ win + b[:, None]).reshape(f, oh, ow)
            win = self._windows(i, a)
            return np.einsum("cijuv,fcuv->fij", win, w) + b[:, None, None]
        if spec.kind == "relu":
            return np.maximum(a, 0.0)
        if spec.kind == "pool":
            c, h, w = a.shape
            return a.reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4))
        if spec.kind == "flatten":
            return a.reshape(-1)
        w, b = self.params64[self.net._param_index[i]]
        return w @ a + b

    def _record(self, x: np.ndarray) -> list:
        acts: list = [None] * len(self.net.arch)
        a = x
        for i in range(1, len(self.net.arch)):
            acts[i] = a
            a = self._layer(i, a, at_start=False)
        return acts

    def loss_from(self, start: int, true_class: int) -> tuple[float, bytes]:
        """Loss from layer ``start`` onward plus the activation-pattern signature.

        The signature records every ReLU sign mask and pooling argmax along
        the way; two perturbed evaluations with different signatures straddle
        a non-differentiable point, where a finite difference says nothing
        about the analytic gradient.
        """
        a = self.acts[start]
        signature = []
        for i in range(start, len(self.net.arch)):
            kind = self.net.arch[i].kind
            if kind == "relu":
                signature.append((a > 0).tobytes())
            elif kind == "pool":
                c, h, w = a.shape
                win = a.reshape(c, h // 2, 2, w // 2, 2).transpose(0, 1, 3, 2, 4)
                signature.append(win.reshape(c, h // 2, w // 2, 4).argmax(axis=3).astype(np.uint8).tobytes())
            a = self._layer(i, a, at_start=(i == start))
        shifted = a - a.max()
        loss = float(np.log(np.exp(shifted).sum()) - shifted[true_class])
        return loss, b"".join(signature)

    def perturbed_loss(
        self, layer_index: int, which: int, j: int, delta: float, true_class: int
    ) -> tuple[float, bytes]:
        """Loss and signature with parameter scalar j of (weights|bias)[which] shifted."""
        arr = self.params64[self.net._param_index[layer_index]][which]
        flat = arr.reshape(-1)
        orig = flat[j]
        flat[j] = orig + delta
        try:
            return self.loss_from(layer_index, true_class)
        finally:
            flat[j] = orig


@dataclass
class GradCheckResult:
    """Outcome of a finite-difference gradient check."""

    max_relative_error: float
    checked: int
    skipped_nondifferentiable: int

    def __float__(self) -> float:
        return self.max_relative_error


def grad_check(
    net: Network,
    x: np.ndarray,
    true_class: int,
    eps: float = 1e-3,
    gradient_scale: float = 1.0,
    detail: bool = False,
):
    """Compare the analytic backward pass to central finite differences.

    For every parameter scalar the check computes
    (loss(w+eps) - loss(w-eps)) / (2*eps) with the float64 reference forward
    and the relative error |analytic - fd| / max(|analytic|, |fd|, 1e-6);
    it returns the maximum over all parameters (or a
    :class:`GradCheckResult` when ``detail`` is set). Layers upstream of the
    perturbed one are never recomputed, since their activations cannot
    change.

    The analytic side runs the production backward code on a float64 copy of
    the parameters: the check targets the gradient formulas, which do not
    depend on precision, and at float32 the comparison would bottom out in
    rounding noise (~1e-7 per loss) instead. Parameters whose +-eps
    evaluations land on different ReLU sign patterns or pooling argmaxes
    straddle a kink of the piecewise-linear loss; the finite difference is
    undefined as a derivative estimate there, so such parameters are skipped
    and counted separately. In a correct network they are a small fraction
    of the total.

    gradient_scale multiplies the analytic gradients and exists as a
    corruption probe: a correct backward pass must fail loudly when its
    output is deliberately scaled.
    """
    if eps <= 0:
        raise ShapeError(f"eps must be positive, got {eps}")
    net64 = net.as_dtype(np.float64)
    x64 = np.ascontiguousarray(x, dtype=np.float64)
    logits, acts, caches = net64.forward_recorded(x64)
    _, grad_logits = softmax_xent(logits, true_class)
    grads = net64.backward(grad_logits, acts, caches)
    oracle = _ReferenceEvaluator(net64, x64)

    max_rel = 0.0
    checked = 0
    skipped = 0
    for pi, layer_index in enumerate(net.param_layers):
        for which in (0, 1):  # weights, then bias
            gflat = grads[pi][which].reshape(-1)
            for j in range(gflat.shape[0]):
                loss_plus, sig_plus = oracle.perturbed_loss(layer_index, which, j, eps, true_class)
                loss_minus, sig_minus = oracle.perturbed_loss(layer_index, which, j, -eps, true_class)
                if sig_plus != sig_minus:
                    skipped += 1
                    continue
                checked += 1
                fd = (loss_plus - loss_minus) / (2.0 * eps)
                analytic = float(gflat[j]) * gradient_scale
                rel = abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-6)
                if rel > max_rel:
                    max_rel = rel
    if detail:
        return GradCheckResult(max_rel, checked, skipped)
    return max_rel
