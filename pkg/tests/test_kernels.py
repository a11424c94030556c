import numpy as np
import pytest

from multibind import kernels

needs_numba = pytest.mark.skipif(not kernels.NUMBA_ENABLED, reason="numba backend disabled")


@needs_numba
class TestBackendAgreement:
    def test_popcounts_bit_identical(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 4096))
            a = rng.integers(0, 256, n).astype(np.uint8)
            b = rng.integers(0, 256, n).astype(np.uint8)
            assert kernels._popcount_nb(a) == kernels._popcount_np(a)
            assert kernels._popcount_and_nb(a, b) == kernels._popcount_and_np(a, b)
            assert kernels._popcount_or_nb(a, b) == kernels._popcount_or_np(a, b)

    def test_centroid_sums_bit_identical(self, rng):
        for _ in range(30):
            w = int(rng.integers(1, 70))
            h = int(rng.integers(1, 70))
            arr = rng.random((h, w)) < 0.4
            packed = np.packbits(arr, axis=1)
            assert kernels._centroid_sums_nb(packed, w) == kernels._centroid_sums_np(packed, w)

    def test_oks_matrix_close(self, rng):
        for _ in range(20):
            nr, nc, k = int(rng.integers(1, 5)), int(rng.integers(1, 5)), 17
            rx, ry = rng.random((nr, k)), rng.random((nr, k))
            cx, cy = rng.random((nc, k)), rng.random((nc, k))
            rv = (rng.random((nr, k)) < 0.7).astype(np.float64)
            cv = (rng.random((nc, k)) < 0.7).astype(np.float64)
            s2 = rng.random((nr, nc)) * 0.5 + 1e-4
            kappa = rng.random(k) * 0.2 + 0.05
            got_nb = kernels._oks_matrix_nb(rx, ry, rv, cx, cy, cv, s2, kappa)
            got_np = kernels._oks_matrix_np(rx, ry, rv, cx, cy, cv, s2, kappa)
            both_nan = np.isnan(got_nb) & np.isnan(got_np)
            assert np.array_equal(np.isnan(got_nb), np.isnan(got_np))
            np.testing.assert_allclose(
                np.where(both_nan, 0.0, got_nb), np.where(both_nan, 0.0, got_np),
                rtol=0, atol=1e-12,
            )

    def test_empty_support_is_nan(self):
        z = np.zeros((1, 3))
        off = np.zeros((1, 3))
        vis_a = np.array([[1.0, 1.0, 0.0]])
        vis_b = np.array([[0.0, 0.0, 1.0]])
        out = kernels.oks_matrix(z, z, vis_a, off, off, vis_b, np.ones((1, 1)), np.full(3, 0.1))
        assert np.isnan(out[0, 0])


def test_fallback_env_flag_subprocess(tmp_path):
    import subprocess
    import sys

    code = (
        "import multibind.kernels as k; "
        "assert not k.NUMBA_ENABLED; "
        "import numpy as np; "
        "print(k.popcount(np.array([255, 3], dtype=np.uint8)))"
    )
    env = {"MULTIBIND_DISABLE_NUMBA": "1", "PATH": "/usr/bin:/bin"}
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, env=env
    )
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == "10"
