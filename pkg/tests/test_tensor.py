import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mousevision.exceptions import ShapeError
from mousevision.tensor import col2im, im2col, matmul


def naive_matmul(a, b):
    """Triple-loop oracle, accumulated in float64."""
    m, k = a.shape
    k2, n = b.shape
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            for t in range(k):
                out[i, j] += float(a[i, t]) * float(b[t, j])
    return out


def sliding_window_columns(x, kh, kw, stride, pad):
    """Direct patch-enumeration oracle for im2col."""
    c, h, w = x.shape
    xp = np.zeros((c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
    xp[:, pad : pad + h, pad : pad + w] = x
    out_h = (h + 2 * pad - kh) // stride + 1
    out_w = (w + 2 * pad - kw) // stride + 1
    cols = []
    for oy in range(out_h):
        for ox in range(out_w):
            patch = xp[:, oy * stride : oy * stride + kh, ox * stride : ox * stride + kw]
            cols.append(patch.reshape(-1))
    return np.stack(cols, axis=1)


def test_matmul_hand_example():
    a = np.array([[1, 2], [3, 4]], dtype=np.float32)
    b = np.array([[5, 6], [7, 8]], dtype=np.float32)
    assert np.array_equal(matmul(a, b), np.array([[19, 22], [43, 50]], dtype=np.float32))


def test_matmul_identity_is_exact():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(6, 6)).astype(np.float32)
    assert np.array_equal(matmul(a, np.eye(6, dtype=np.float32)), a)


def test_matmul_matches_triple_loop_oracle():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(7, 5)).astype(np.float32)
    b = rng.normal(size=(5, 3)).astype(np.float32)
    got = matmul(a, b)
    want = naive_matmul(a, b)
    assert np.max(np.abs(got - want) / np.maximum(np.abs(want), 1e-6)) < 1e-5


def test_matmul_identity_association():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(4, 4)).astype(np.float32)
    b = rng.normal(size=(4, 4)).astype(np.float32)
    eye = np.eye(4, dtype=np.float32)
    left = matmul(matmul(a, eye), b)
    right = matmul(a, matmul(eye, b))
    assert np.max(np.abs(left - right) / np.maximum(np.abs(right), 1e-6)) < 1e-5


def test_matmul_shape_errors_name_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(np.zeros((2, 3), np.float32), np.zeros((2, 3), np.float32))
    with pytest.raises(ShapeError):
        matmul(np.zeros(3, np.float32), np.zeros((3, 2), np.float32))


def test_im2col_hand_example():
    x = np.arange(1, 10, dtype=np.float32).reshape(1, 3, 3)
    cols = im2col(x, 2, 2, stride=1, pad=0)
    want = np.array([[1, 2, 4, 5], [2, 3, 5, 6], [4, 5, 7, 8], [5, 6, 8, 9]], np.float32).T
    assert np.array_equal(cols, want)


def test_im2col_padding_contributes_zero():
    x = np.array([[[5.0]]], dtype=np.float32)
    cols = im2col(x, 3, 3, stride=1, pad=1)
    assert cols.shape == (9, 1)
    assert np.array_equal(cols[:, 0], np.array([0, 0, 0, 0, 5, 0, 0, 0, 0], np.float32))


def test_im2col_matches_sliding_window_oracle():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(3, 8, 8)).astype(np.float32)
    cols = im2col(x, 3, 3, stride=2, pad=1)
    assert cols.shape == (27, 16)
    assert np.array_equal(cols, sliding_window_columns(x, 3, 3, 2, 1))


def test_im2col_rejects_collapsed_output():
    with pytest.raises(ShapeError, match="does not fit"):
        im2col(np.zeros((1, 2, 2), np.float32), 3, 3, stride=1, pad=0)
    with pytest.raises(ShapeError):
        im2col(np.zeros((1, 4, 4), np.float32), 2, 2, stride=0, pad=0)


@settings(max_examples=60, deadline=None)
@given(
    c=st.integers(1, 3),
    h=st.integers(1, 10),
    w=st.integers(1, 10),
    kh=st.integers(1, 4),
    kw=st.integers(1, 4),
    stride=st.integers(1, 3),
    pad=st.integers(0, 2),
)
def test_im2col_shape_formula(c, h, w, kh, kw, stride, pad):
    out_h = (h + 2 * pad - kh) // stride + 1
    out_w = (w + 2 * pad - kw) // stride + 1
    x = np.arange(c * h * w, dtype=np.float32).reshape(c, h, w)
    if out_h < 1 or out_w < 1:
        with pytest.raises(ShapeError):
            im2col(x, kh, kw, stride, pad)
    else:
        assert im2col(x, kh, kw, stride, pad).shape == (c * kh * kw, out_h * out_w)


def test_conv_as_matmul_equals_direct_convolution():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(2, 6, 6)).astype(np.float32)
    weights = rng.normal(size=(4, 2, 3, 3)).astype(np.float32)
    got = matmul(weights.reshape(4, -1), im2col(x, 3, 3, 1, 1)).reshape(4, 6, 6)

    xp = np.zeros((2, 8, 8))
    xp[:, 1:7, 1:7] = x
    want = np.zeros((4, 6, 6))
    for f in range(4):
        for oy in range(6):
            for ox in range(6):
                want[f, oy, ox] = np.sum(xp[:, oy : oy + 3, ox : ox + 3] * weights[f])
    assert np.max(np.abs(got - want) / np.maximum(np.abs(want), 1e-6)) < 1e-5


def test_col2im_is_adjoint_of_im2col():
    # <im2col(x), C> == <x, col2im(C)> for random C: the scatter is the
    # exact transpose of the gather
    rng = np.random.default_rng(5)
    x = rng.normal(size=(2, 5, 5)).astype(np.float32)
    cols = im2col(x, 3, 3, stride=2, pad=1)
    c = rng.normal(size=cols.shape).astype(np.float32)
    lhs = float(np.sum(cols * c))
    rhs = float(np.sum(x * col2im(c, (2, 5, 5), 3, 3, stride=2, pad=1)))
    assert abs(lhs - rhs) / max(abs(lhs), 1e-6) < 1e-5
