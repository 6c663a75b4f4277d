"""Benchmark the numba-jitted hot kernels against the pure-numpy fallback.

Run:  python3 benchmarks/bench_kernels.py

Shapes mirror the three conv blocks of the default 64x64 model at batch 32.
The matmul inside the convolution stays on BLAS in both backends; what is
compared here is the data movement around it (im2col / col2im / pooling)
and the component labeling used by the scene detector.
"""

import time

import numpy as np

from cornspect.kernels import numba_impl, numpy_impl

REPEATS = 5


def bench(fn, *args):
    fn(*args)  # warm-up (and JIT compile for the numba side)
    times = []
    for _ in range(REPEATS):
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return min(times)


def compare(name, args_fn):
    args = args_fn()
    t_np = bench(getattr(numpy_impl, name.split("/")[0]), *args)
    t_nb = bench(getattr(numba_impl, name.split("/")[0]), *args)
    print(f"{name:<28} numpy {t_np * 1e3:8.2f} ms   numba {t_nb * 1e3:8.2f} ms   x{t_np / t_nb:5.2f}")


def main():
    rng = np.random.default_rng(0)
    # (batch, channels, H, W, kernel) per conv block of the default model
    blocks = [(32, 3, 64, 64), (32, 16, 32, 32), (32, 32, 16, 16)]

    print(f"{'kernel':<28} {'numpy':>14} {'numba':>16} {'speedup':>8}")
    for i, (n, c, h, w) in enumerate(blocks, start=1):
        x = np.ascontiguousarray(rng.normal(size=(n, c, h + 2, w + 2)))  # padded input
        compare(f"im2col/block{i}", lambda x=x, h=h, w=w: (x, 3, 3, 1, 1, h, w))
        cols = np.ascontiguousarray(rng.normal(size=(n, c * 9, h * w)))
        compare(
            f"col2im/block{i}",
            lambda cols=cols, c=c, h=h, w=w: (cols, c, h + 2, w + 2, 3, 3, 1, 1, h, w),
        )
    x = np.ascontiguousarray(rng.normal(size=(32, 16, 64, 64)))
    compare("maxpool2x2_forward/block1", lambda: (x,))
    g = np.ascontiguousarray(rng.normal(size=(32, 16, 32, 32)))
    arg = rng.integers(0, 4, size=(32, 16, 32, 32)).astype(np.int64)
    compare("maxpool2x2_backward/block1", lambda: (g, arg, 64, 64))
    mask = rng.random((640, 640)) > 0.8
    compare("label_components/scene", lambda: (np.ascontiguousarray(mask),))


if __name__ == "__main__":
    main()
