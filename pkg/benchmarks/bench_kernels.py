#!/usr/bin/env python3
"""Time the numba kernels against the pure-numpy fallbacks.

Covers the conv patch gather/scatter (the training hot path) and the
pairwise distance scan (search/eval hot path), plus an end-to-end conv
forward+backward through the layer built on them. The backend used by
the package itself is fixed at import via OUTFITGEN_BACKEND; this script
calls both implementations directly.

Run: python3 benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from outfitgen import kernels
from outfitgen.kernels import col2im_numpy, im2col_numpy, pairwise_sqdist_numpy


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--batch", type=int, default=32)
    parser.add_argument("--resolution", type=int, default=64)
    args = parser.parse_args()

    if kernels.BACKEND != "numba":
        print("numba backend unavailable (OUTFITGEN_BACKEND=numpy?); nothing to compare")
        return

    rng = np.random.default_rng(0)
    x = rng.normal(size=(args.batch, 16, args.resolution // 2, args.resolution // 2))
    cols_shape = kernels.im2col(x, 3, 2, 1).shape
    g = rng.normal(size=cols_shape)
    a = rng.normal(size=(512, 128))
    b = rng.normal(size=(2048, 128))

    # warm the jit before timing
    kernels.im2col(x[:1], 3, 2, 1)
    kernels.col2im(g[: cols_shape[0] // args.batch], (1, *x.shape[1:]), 3, 2, 1)
    kernels.pairwise_sqdist(a[:4], b[:4])

    cases = [
        ("im2col", lambda: kernels.im2col(x, 3, 2, 1),
         lambda: im2col_numpy(x, 3, 2, 1)),
        ("col2im", lambda: kernels.col2im(g, x.shape, 3, 2, 1),
         lambda: col2im_numpy(g, x.shape, 3, 2, 1)),
        ("pairwise_sqdist", lambda: kernels.pairwise_sqdist(a, b),
         lambda: pairwise_sqdist_numpy(a, b)),
    ]

    from outfitgen.nn import Conv2d

    conv = Conv2d("bench", 16, 32, rng, stride=2)
    out_grad = rng.normal(size=(args.batch, 32, x.shape[2] // 2, x.shape[3] // 2))

    def conv_roundtrip():
        _, cache = conv.forward_train(x)
        conv.backward(cache, out_grad)

    print(f"{'kernel':<18} {'numba (ms)':>12} {'numpy (ms)':>12} {'speedup':>9}")
    print("-" * 55)
    for name, numba_fn, numpy_fn in cases:
        t_numba = timeit(numba_fn, args.repeats) * 1e3
        t_numpy = timeit(numpy_fn, args.repeats) * 1e3
        print(f"{name:<18} {t_numba:>12.2f} {t_numpy:>12.2f} {t_numpy / t_numba:>8.2f}x")

    t_conv = timeit(conv_roundtrip, args.repeats) * 1e3
    print(f"{'conv fwd+bwd':<18} {t_conv:>12.2f} {'(active backend)':>22}")


if __name__ == "__main__":
    main()
