"""Hot numeric kernels: packed-bitmask population counts and batched OKS.

Two interchangeable backends live here. The default is numba @njit; setting
the environment variable MULTIBIND_DISABLE_NUMBA=1 (before import) selects
the pure-numpy fallback. Integer kernels are bit-identical across backends;
the OKS kernel agrees to floating round-off (different summation order).
`benchmarks/bench_kernels.py` compares the two.
"""

import os

import numpy as np

_POPCOUNT8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)

NUMBA_ENABLED = os.environ.get("MULTIBIND_DISABLE_NUMBA", "") not in ("1", "true", "yes")
if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------

def _popcount_np(buf):
    return int(_POPCOUNT8[buf].sum())


def _popcount_and_np(a, b):
    return int(_POPCOUNT8[a & b].sum())


def _popcount_or_np(a, b):
    return int(_POPCOUNT8[a | b].sum())


def _centroid_sums_np(packed, width):
    bits = np.unpackbits(packed, axis=1, count=width)
    ys, xs = np.nonzero(bits)
    return int(xs.size), int(xs.sum()), int(ys.sum())


def _oks_matrix_np(rx, ry, rv, cx, cy, cv, s2, kappa):
    # rx/ry: (nr, K) normalized row keypoints; rv: (nr, K) visibility (0/1)
    # s2: (nr, nc) squared scale per pair; kappa: (K,)
    d2 = (rx[:, None, :] - cx[None, :, :]) ** 2 + (ry[:, None, :] - cy[None, :, :]) ** 2
    joint = rv[:, None, :] * cv[None, :, :]
    denom = 2.0 * s2[:, :, None] * (kappa[None, None, :] ** 2)
    terms = np.exp(-d2 / denom) * joint
    support = joint.sum(axis=2)
    out = np.full(support.shape, np.nan)
    ok = support > 0
    out[ok] = terms.sum(axis=2)[ok] / support[ok]
    return out


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:

    @njit(cache=True)
    def _popcount_nb(buf):
        total = 0
        for i in range(buf.size):
            total += _POPCOUNT8[buf[i]]
        return total

    @njit(cache=True)
    def _popcount_and_nb(a, b):
        total = 0
        for i in range(a.size):
            total += _POPCOUNT8[a[i] & b[i]]
        return total

    @njit(cache=True)
    def _popcount_or_nb(a, b):
        total = 0
        for i in range(a.size):
            total += _POPCOUNT8[a[i] | b[i]]
        return total

    @njit(cache=True)
    def _centroid_sums_nb(packed, width):
        h, stride = packed.shape
        count = 0
        sx = 0
        sy = 0
        for y in range(h):
            for bi in range(stride):
                v = packed[y, bi]
                if v == 0:
                    continue
                base = bi * 8
                for bit in range(8):
                    if v & (0x80 >> bit):
                        count += 1
                        sx += base + bit
                        sy += y
        return count, sx, sy

    @njit(cache=True)
    def _oks_matrix_nb(rx, ry, rv, cx, cy, cv, s2, kappa):
        nr, k = rx.shape
        nc = cx.shape[0]
        out = np.full((nr, nc), np.nan)
        for i in range(nr):
            for j in range(nc):
                num = 0.0
                support = 0
                for p in range(k):
                    if rv[i, p] and cv[j, p]:
                        dx = rx[i, p] - cx[j, p]
                        dy = ry[i, p] - cy[j, p]
                        num += np.exp(-(dx * dx + dy * dy) / (2.0 * s2[i, j] * kappa[p] * kappa[p]))
                        support += 1
                if support > 0:
                    out[i, j] = num / support
        return out


if NUMBA_ENABLED:
    popcount = _popcount_nb
    popcount_and = _popcount_and_nb
    popcount_or = _popcount_or_nb
    centroid_sums = _centroid_sums_nb
    oks_matrix = _oks_matrix_nb
else:
    popcount = _popcount_np
    popcount_and = _popcount_and_np
    popcount_or = _popcount_or_np
    centroid_sums = _centroid_sums_np
    oks_matrix = _oks_matrix_np


def warmup():
    """Trigger JIT compilation on tiny inputs so timed runs exclude it."""
    buf = np.zeros(8, dtype=np.uint8)
    popcount(buf)
    popcount_and(buf, buf)
    popcount_or(buf, buf)
    centroid_sums(np.ones((2, 1), dtype=np.uint8), 8)
    z = np.zeros((1, 2), dtype=np.float64)
    v = np.ones((1, 2), dtype=np.float64)
    oks_matrix(z, z, v, z, z, v, np.ones((1, 1)), np.full(2, 0.1))
