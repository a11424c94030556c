"""Benchmark the numba kernels against the pure-numpy fallback.

Run: python3 benchmarks/bench_kernels.py [--repeat N]
Both backends are imported into one process (the private implementations are
always defined), timed on identical inputs, and checked for agreement.
"""

import argparse
import time

import numpy as np

from multibind import kernels


def timeit(fn, args, repeat):
    fn(*args)  # warm: triggers JIT on the numba side
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench(name, nb_fn, np_fn, args, repeat, check=lambda a, b: a == b):
    r_nb = nb_fn(*args)
    r_np = np_fn(*args)
    assert check(r_nb, r_np), f"{name}: backend disagreement"
    t_nb = timeit(nb_fn, args, repeat)
    t_np = timeit(np_fn, args, repeat)
    speedup = t_np / t_nb if t_nb > 0 else float("inf")
    print(f"{name:<22} numba {t_nb * 1e3:8.3f} ms   numpy {t_np * 1e3:8.3f} ms   x{speedup:5.1f}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    if not kernels.NUMBA_ENABLED:
        raise SystemExit("numba backend disabled (MULTIBIND_DISABLE_NUMBA set); nothing to compare")

    rng = np.random.default_rng(0)

    # packed masks the size of a 2000x1500 image
    nbytes = 2000 * 1500 // 8
    a = rng.integers(0, 256, nbytes).astype(np.uint8)
    b = rng.integers(0, 256, nbytes).astype(np.uint8)
    bench("popcount", kernels._popcount_nb, kernels._popcount_np, (a,), args.repeat)
    bench("popcount_and", kernels._popcount_and_nb, kernels._popcount_and_np, (a, b), args.repeat)
    bench("popcount_or", kernels._popcount_or_nb, kernels._popcount_or_np, (a, b), args.repeat)

    w, h = 1600, 1200
    arr = rng.random((h, w)) < 0.3
    packed = np.packbits(arr, axis=1)
    bench(
        "centroid_sums", kernels._centroid_sums_nb, kernels._centroid_sums_np,
        (packed, w), args.repeat,
    )

    # large OKS batch: 64 x 64 skeleton pairs, 17 keypoints
    nr = nc = 64
    k = 17
    rx, ry = rng.random((nr, k)), rng.random((nr, k))
    cx, cy = rng.random((nc, k)), rng.random((nc, k))
    rv = (rng.random((nr, k)) < 0.8).astype(np.float64)
    cv = (rng.random((nc, k)) < 0.8).astype(np.float64)
    s2 = rng.random((nr, nc)) * 0.4 + 1e-4
    kappa = rng.random(k) * 0.2 + 0.05
    bench(
        "oks_matrix 64x64x17", kernels._oks_matrix_nb, kernels._oks_matrix_np,
        (rx, ry, rv, cx, cy, cv, s2, kappa), args.repeat,
        check=lambda x, y: np.allclose(x, y, rtol=0, atol=1e-12, equal_nan=True),
    )


if __name__ == "__main__":
    main()
