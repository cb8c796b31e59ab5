"""Dense float32 tensor primitives for the network.

Tensors are plain numpy float32 arrays in C (row-major) order; frames use a
channel-first (C, H, W) layout. There is no broadcasting here: every shape
mismatch is a hard :class:`~mousevision.exceptions.ShapeError`.

The pipeline runs float32 end to end. The ops below nevertheless preserve a
float64 input instead of down-casting it, so the gradient checker can run
the identical code on a double-precision copy of the parameters.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ShapeError
from .validation import check_rank


def as_float(a) -> np.ndarray:
    """Coerce to C-contiguous float32, preserving an existing float64 array."""
    a = np.asarray(a)
    dtype = np.float64 if a.dtype == np.float64 else np.float32
    return np.ascontiguousarray(a, dtype=dtype)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Multiply two rank-2 tensors, accumulating in the operand precision."""
    a = as_float(a)
    b = as_float(b)
    check_rank(a, 2, "matmul lhs")
    check_rank(b, 2, "matmul rhs")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def conv_output_size(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - kernel) // stride + 1


def _patch_indices(h: int, w: int, kh: int, kw: int, stride: int, pad: int):
    """Row/col index grids mapping padded input pixels to im2col cells."""
    out_h = conv_output_size(h, kh, stride, pad)
    out_w = conv_output_size(w, kw, stride, pad)
    ki = np.repeat(np.arange(kh), kw)  # within-patch rows, row-major
    kj = np.tile(np.arange(kw), kh)
    oy = stride * np.repeat(np.arange(out_h), out_w)  # output positions, row-major
    ox = stride * np.tile(np.arange(out_w), out_h)
    rows = ki[:, None] + oy[None, :]  # (kh*kw, out_h*out_w)
    cols = kj[:, None] + ox[None, :]
    return rows, cols, out_h, out_w


def im2col(x: np.ndarray, kernel_h: int, kernel_w: int, stride: int = 1, pad: int = 0) -> np.ndarray:
    """Unroll receptive fields of a (C, H, W) tensor into matrix columns.

    Column p holds the receptive field of output position p (row-major over
    output rows then columns); rows are ordered channel-major, then patch row,
    then patch column. Padding positions contribute exactly 0.0, so a
    convolution becomes ``weights_as_rows @ im2col(x)``.
    """
    x = as_float(x)
    check_rank(x, 3, "im2col input")
    if stride < 1 or pad < 0:
        raise ShapeError(f"invalid stride/pad: stride={stride}, pad={pad}")
    c, h, w = x.shape
    out_h = conv_output_size(h, kernel_h, stride, pad)
    out_w = conv_output_size(w, kernel_w, stride, pad)
    if out_h < 1 or out_w < 1:
        raise ShapeError(
            f"kernel {kernel_h}x{kernel_w} (stride {stride}, pad {pad}) does not fit "
            f"input {c}x{h}x{w}: output would be {out_h}x{out_w}"
        )
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad))) if pad else x
    rows, cols, _, _ = _patch_indices(h, w, kernel_h, kernel_w, stride, pad)
    patches = xp[:, rows, cols]  # (C, kh*kw, out_h*out_w)
    return np.ascontiguousarray(patches.reshape(c * kernel_h * kernel_w, out_h * out_w))


def col2im(
    cols: np.ndarray,
    in_shape: tuple[int, int, int],
    kernel_h: int,
    kernel_w: int,
    stride: int = 1,
    pad: int = 0,
) -> np.ndarray:
    """Scatter-add an im2col-layout gradient back onto the (C, H, W) input."""
    cols = as_float(cols)
    c, h, w = in_shape
    rows, idx_cols, out_h, out_w = _patch_indices(h, w, kernel_h, kernel_w, stride, pad)
    if cols.shape != (c * kernel_h * kernel_w, out_h * out_w):
        raise ShapeError(
            f"col2im expected {(c * kernel_h * kernel_w, out_h * out_w)}, got {cols.shape}"
        )
    xp = np.zeros((c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    patches = cols.reshape(c, kernel_h * kernel_w, out_h * out_w)
    np.add.at(xp, (np.arange(c)[:, None, None], rows[None], idx_cols[None]), patches)
    if pad:
        return np.ascontiguousarray(xp[:, pad : pad + h, pad : pad + w])
    return xp
