"""Backend parity and correctness of the gather/scatter/distance kernels."""

import numpy as np
import pytest

from outfitgen import kernels
from outfitgen.kernels import (
    col2im_numpy,
    conv_output_size,
    im2col_numpy,
    pairwise_sqdist_numpy,
)


def naive_im2col(x, ksize, stride, pad):
    n, c, h, w = x.shape
    oh = conv_output_size(h, ksize, stride, pad)
    ow = conv_output_size(w, ksize, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.zeros((n * oh * ow, c * ksize * ksize))
    for i in range(n):
        for oy in range(oh):
            for ox in range(ow):
                patch = xp[i, :, oy * stride : oy * stride + ksize,
                           ox * stride : ox * stride + ksize]
                cols[(i * oh + oy) * ow + ox] = patch.reshape(-1)
    return cols


@pytest.mark.parametrize("shape,ksize,stride,pad", [
    ((2, 3, 8, 8), 3, 2, 1),
    ((1, 2, 6, 6), 3, 1, 1),
    ((3, 4, 5, 5), 3, 2, 0),
    ((2, 1, 7, 9), 3, 1, 0),
])
def test_im2col_matches_naive_and_backend(shape, ksize, stride, pad, rng):
    x = rng.normal(size=shape)
    expected = naive_im2col(x, ksize, stride, pad)
    np.testing.assert_array_equal(im2col_numpy(x, ksize, stride, pad), expected)
    np.testing.assert_array_equal(kernels.im2col(x, ksize, stride, pad), expected)


@pytest.mark.parametrize("shape,ksize,stride,pad", [
    ((2, 3, 8, 8), 3, 2, 1),
    ((1, 2, 6, 6), 3, 1, 1),
    ((3, 4, 5, 5), 3, 2, 0),
])
def test_col2im_is_adjoint_of_im2col(shape, ksize, stride, pad, rng):
    # <im2col(x), g> == <x, col2im(g)> characterizes the scatter exactly
    x = rng.normal(size=shape)
    cols = kernels.im2col(x, ksize, stride, pad)
    g = rng.normal(size=cols.shape)
    lhs = float(np.sum(cols * g))
    back = kernels.col2im(g, shape, ksize, stride, pad)
    rhs = float(np.sum(x * back))
    assert back.shape == shape
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


def test_col2im_backend_parity(rng):
    shape = (2, 3, 8, 8)
    cols = rng.normal(size=(2 * 16, 27))
    a = col2im_numpy(cols, shape, 3, 2, 1)
    b = kernels.col2im(cols, shape, 3, 2, 1)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


def test_pairwise_sqdist_matches_naive(rng):
    a = rng.normal(size=(9, 5))
    b = rng.normal(size=(7, 5))
    expected = np.zeros((9, 7))
    for i in range(9):
        for j in range(7):
            expected[i, j] = np.sum((a[i] - b[j]) ** 2)
    np.testing.assert_allclose(pairwise_sqdist_numpy(a, b), expected, rtol=1e-12)
    np.testing.assert_allclose(kernels.pairwise_sqdist(a, b), expected, rtol=1e-12)


def test_backend_resolved():
    assert kernels.BACKEND in ("numpy", "numba")
