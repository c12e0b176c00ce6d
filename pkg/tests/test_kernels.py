import os
import subprocess
import sys

import numpy as np
import pytest

from oclncm.kernels import pure

try:
    from oclncm.kernels import _fast
except ImportError:
    _fast = None

needs_compiled = pytest.mark.skipif(_fast is None, reason="compiled kernels not built")


def _random_case(seed, n_rows=6, n_rec=80, dim=12):
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((n_rows, dim))
    counts = rng.integers(0, 50, size=n_rows)
    vecs = rng.standard_normal((n_rec, dim))
    rows = rng.integers(0, n_rows, size=n_rec)
    return (
        np.ascontiguousarray(means),
        counts.astype(np.int64),
        np.ascontiguousarray(vecs),
        rows.astype(np.int64),
    )


@needs_compiled
class TestBackendParity:
    def test_mean_update_chunk_matches(self):
        for seed in range(10):
            means_a, counts_a, vecs, rows = _random_case(seed)
            means_b, counts_b = means_a.copy(), counts_a.copy()
            pure.mean_update_chunk(means_a, counts_a, vecs, rows)
            _fast.mean_update_chunk(means_b, counts_b, vecs, rows)
            np.testing.assert_array_equal(counts_a, counts_b)
            np.testing.assert_array_equal(means_a, means_b)

    def test_sq_dist_chunk_matches(self):
        rng = np.random.default_rng(0)
        queries = np.ascontiguousarray(rng.standard_normal((40, 32)))
        means = np.ascontiguousarray(rng.standard_normal((15, 32)))
        a = pure.sq_dist_chunk(queries, means)
        b = _fast.sq_dist_chunk(queries, means)
        assert np.abs(a - b).max() < 1e-12

    def test_sq_dist_matches_norm_recomputation(self):
        rng = np.random.default_rng(1)
        queries = np.ascontiguousarray(rng.standard_normal((10, 16)))
        means = np.ascontiguousarray(rng.standard_normal((7, 16)))
        got = _fast.sq_dist_chunk(queries, means)
        for q in range(10):
            for c in range(7):
                want = float(np.linalg.norm(queries[q] - means[c])) ** 2
                assert abs(got[q, c] - want) < 1e-10 * max(1.0, want)


class TestBackendSelection:
    def test_env_var_forces_pure(self):
        env = dict(os.environ, OCLNCM_PURE="1")
        out = subprocess.run(
            [sys.executable, "-c", "from oclncm import kernels; print(kernels.BACKEND)"],
            capture_output=True, text=True, env=env, check=True,
        )
        assert out.stdout.strip() == "numpy"

    @needs_compiled
    def test_compiled_preferred_by_default(self):
        env = {k: v for k, v in os.environ.items() if k != "OCLNCM_PURE"}
        out = subprocess.run(
            [sys.executable, "-c", "from oclncm import kernels; print(kernels.BACKEND)"],
            capture_output=True, text=True, env=env, check=True,
        )
        assert out.stdout.strip() == "cython"
