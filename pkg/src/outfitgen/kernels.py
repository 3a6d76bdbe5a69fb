"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is picked once at import time from the ``OUTFITGEN_BACKEND``
environment variable: ``numba`` (default when numba imports cleanly) or
``numpy``. Both paths implement identical semantics; ``benchmarks/``
contains a script timing them against each other.

Kernels here are the patch gather/scatter used by the convolutional
backbone (``im2col``/``col2im``) and the pairwise squared-distance scan
used by search, generation, and evaluation. Dense matrix products stay
in numpy/BLAS on both backends.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ConfigError


def _resolve_backend() -> str:
    choice = os.environ.get("OUTFITGEN_BACKEND", "").strip().lower()
    if choice not in ("", "numpy", "numba"):
        raise ConfigError(f"OUTFITGEN_BACKEND must be 'numpy' or 'numba', got {choice!r}")
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise
        return "numpy"
    return "numba"


BACKEND = _resolve_backend()


def conv_output_size(size: int, ksize: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - ksize) // stride + 1


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------


def _pad_input(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def im2col_numpy(x: np.ndarray, ksize: int, stride: int, pad: int) -> np.ndarray:
    """Extract conv patches from (N, C, H, W) into (N*OH*OW, C*ksize*ksize)."""
    n, c, h, w = x.shape
    oh = conv_output_size(h, ksize, stride, pad)
    ow = conv_output_size(w, ksize, stride, pad)
    xp = _pad_input(x, pad)
    windows = np.lib.stride_tricks.sliding_window_view(xp, (ksize, ksize), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride, :, :]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * ksize * ksize)
    return np.ascontiguousarray(cols)


def col2im_numpy(
    cols: np.ndarray, x_shape: tuple, ksize: int, stride: int, pad: int
) -> np.ndarray:
    """Scatter-add patch gradients back to the (N, C, H, W) input layout."""
    n, c, h, w = x_shape
    oh = conv_output_size(h, ksize, stride, pad)
    ow = conv_output_size(w, ksize, stride, pad)
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    patches = cols.reshape(n, oh, ow, c, ksize, ksize).transpose(0, 3, 1, 2, 4, 5)
    for ky in range(ksize):
        for kx in range(ksize):
            xp[:, :, ky : ky + oh * stride : stride, kx : kx + ow * stride : stride] += patches[
                :, :, :, :, ky, kx
            ]
    if pad == 0:
        return xp
    return xp[:, :, pad : pad + h, pad : pad + w]


def pairwise_sqdist_numpy(a: np.ndarray, b: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Squared Euclidean distances between rows of a (n, d) and b (m, d).

    Row-chunked so the broadcast temporary stays bounded for large scans.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = np.empty((a.shape[0], b.shape[0]))
    for start in range(0, a.shape[0], chunk):
        diff = a[start : start + chunk, None, :] - b[None, :, :]
        out[start : start + chunk] = np.einsum("nmd,nmd->nm", diff, diff)
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if BACKEND == "numba":
    from numba import njit

    @njit(cache=True)
    def _im2col_fill(xp, ksize, stride, oh, ow, cols):  # pragma: no cover - jit
        n, c, _, _ = xp.shape
        for i in range(n):
            for oy in range(oh):
                for ox in range(ow):
                    row = (i * oh + oy) * ow + ox
                    col = 0
                    for ch in range(c):
                        for ky in range(ksize):
                            for kx in range(ksize):
                                cols[row, col] = xp[i, ch, oy * stride + ky, ox * stride + kx]
                                col += 1

    @njit(cache=True)
    def _col2im_fill(cols, ksize, stride, oh, ow, xp):  # pragma: no cover - jit
        n, c, _, _ = xp.shape
        for i in range(n):
            for oy in range(oh):
                for ox in range(ow):
                    row = (i * oh + oy) * ow + ox
                    col = 0
                    for ch in range(c):
                        for ky in range(ksize):
                            for kx in range(ksize):
                                xp[i, ch, oy * stride + ky, ox * stride + kx] += cols[row, col]
                                col += 1

    @njit(cache=True)
    def _pairwise_sqdist_fill(a, b, out):  # pragma: no cover - jit
        n, d = a.shape
        m = b.shape[0]
        for i in range(n):
            for j in range(m):
                acc = 0.0
                for k in range(d):
                    delta = a[i, k] - b[j, k]
                    acc += delta * delta
                out[i, j] = acc

    def im2col_numba(x: np.ndarray, ksize: int, stride: int, pad: int) -> np.ndarray:
        n, c, h, w = x.shape
        oh = conv_output_size(h, ksize, stride, pad)
        ow = conv_output_size(w, ksize, stride, pad)
        xp = np.ascontiguousarray(_pad_input(x, pad))
        cols = np.empty((n * oh * ow, c * ksize * ksize), dtype=x.dtype)
        _im2col_fill(xp, ksize, stride, oh, ow, cols)
        return cols

    def col2im_numba(
        cols: np.ndarray, x_shape: tuple, ksize: int, stride: int, pad: int
    ) -> np.ndarray:
        n, c, h, w = x_shape
        oh = conv_output_size(h, ksize, stride, pad)
        ow = conv_output_size(w, ksize, stride, pad)
        xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
        _col2im_fill(np.ascontiguousarray(cols), ksize, stride, oh, ow, xp)
        if pad == 0:
            return xp
        return xp[:, :, pad : pad + h, pad : pad + w]

    def pairwise_sqdist_numba(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
        _pairwise_sqdist_fill(
            np.ascontiguousarray(a, dtype=np.float64),
            np.ascontiguousarray(b, dtype=np.float64),
            out,
        )
        return out

    im2col = im2col_numba
    col2im = col2im_numba
    pairwise_sqdist = pairwise_sqdist_numba
else:
    im2col = im2col_numpy
    col2im = col2im_numpy
    pairwise_sqdist = pairwise_sqdist_numpy


def pairwise_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distances between rows of a (n, d) and b (m, d)."""
    return np.sqrt(pairwise_sqdist(a, b))
