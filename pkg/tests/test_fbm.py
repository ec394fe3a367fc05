import warnings

import numpy as np
import pytest

from edwardsim import (
    GridCovariance,
    ModelParams,
    cov_h,
    make_grid,
    sample_fbm,
    sample_fbm_batch,
    stream,
)
from edwardsim.fbm import _cholesky_with_jitter, build_covariance


class TestCovH:
    def test_frozen_values(self):
        assert cov_h(0.5, 1.0, 2.0) == 1.0
        assert cov_h(0.5, 0.25, 0.25) == 0.25
        assert abs(cov_h(0.25, 2.0, 1.0) - 2.0**-0.5) < 1e-15
        assert cov_h(0.7, 3.0, 0.0) == 0.0

    def test_variance_on_diagonal(self):
        for H in (0.3, 0.5, 0.8):
            for t in (0.2, 1.0, 2.5):
                assert abs(cov_h(H, t, t) - t ** (2 * H)) < 1e-14 * t ** (2 * H)

    def test_symmetry_exact(self, rng):
        t = rng.uniform(0.0, 3.0, size=50)
        s = rng.uniform(0.0, 3.0, size=50)
        for H in (0.3, 0.5, 0.7):
            assert np.array_equal(cov_h(H, t, s), cov_h(H, s, t))

    def test_self_similarity(self, rng):
        # cov(a t, a s) = a^2H cov(t, s)
        t = rng.uniform(0.1, 2.0, size=20)
        s = rng.uniform(0.1, 2.0, size=20)
        for H in (0.3, 0.5, 0.7):
            for a in (0.5, 2.0, 3.7):
                lhs = cov_h(H, a * t, a * s)
                rhs = a ** (2 * H) * cov_h(H, t, s)
                assert np.allclose(lhs, rhs, rtol=1e-12, atol=0.0)

    def test_rejects_bad_hurst(self):
        for H in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ValueError, match="H"):
                cov_h(H, 1.0, 1.0)

    def test_rejects_negative_times(self):
        with pytest.raises(ValueError, match="nonnegative"):
            cov_h(0.5, -1.0, 1.0)

    def test_broadcasting(self):
        t = np.linspace(0.0, 1.0, 5)
        out = cov_h(0.5, t[:, None], t[None, :])
        assert out.shape == (5, 5)


class TestGridCovariance:
    def test_entries_match_cov_h(self):
        p = ModelParams(H=0.7, N=12)
        grid = make_grid(p)
        sigma = build_covariance(p, grid)
        pts = grid.points[1:]
        for i in range(11):
            for j in range(11):
                assert sigma[i, j] == cov_h(0.7, pts[i], pts[j])

    def test_symmetric_positive_definite(self):
        for H in (0.3, 0.5, 0.7):
            sigma = build_covariance(ModelParams(H=H, N=64), make_grid(ModelParams(N=64)))
            assert np.array_equal(sigma, sigma.T)
            np.linalg.cholesky(sigma)  # raises if not PD

    def test_factor_identity(self):
        # L L^T must reproduce sigma to 1e-8 relative Frobenius error
        for H in (0.3, 0.5, 0.7):
            cov = GridCovariance(ModelParams(H=H, N=256))
            assert cov.factor_residual() < 1e-8
            assert not cov.jittered

    def test_solve(self, small_cov):
        b = np.arange(1.0, small_cov.sigma.shape[0] + 1.0)
        x = small_cov.solve(b)
        assert np.allclose(small_cov.sigma @ x, b, rtol=1e-9, atol=1e-12)

    def test_grid_size_mismatch(self):
        p = ModelParams(N=16)
        with pytest.raises(ValueError, match="grid size"):
            GridCovariance(p, make_grid(ModelParams(N=8)))

    def test_jitter_retry_on_singular(self):
        # rank-2 PSD matrix: plain factorization fails, the single jitter
        # retry succeeds and warns
        v = np.array([1.0, 2.0, 3.0, 4.0])
        w = np.array([0.0, 1.0, -1.0, 0.5])
        a = np.outer(v, v) + np.outer(w, w)
        with pytest.warns(RuntimeWarning, match="jitter"):
            chol, jittered = _cholesky_with_jitter(a)
        assert jittered
        jit = 1e-12 * np.trace(a) / 4
        assert np.allclose(chol @ chol.T, a + jit * np.eye(4), rtol=0.0, atol=1e-10)

    def test_jitter_fails_on_indefinite(self):
        a = np.diag([1.0, -1.0, 1.0])
        with pytest.raises(np.linalg.LinAlgError, match="leading minor"):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                _cholesky_with_jitter(a)


class TestSampleFbm:
    def test_shape_and_pinning(self, small_params, small_cov):
        path = sample_fbm(small_params, cov=small_cov)
        assert path.values.shape == (64, 2)
        assert np.all(path.values[0] == 0.0)
        path.check()

    def test_deterministic(self, small_params, small_cov):
        a = sample_fbm(small_params, cov=small_cov, rng=stream(small_params.seed, 0))
        b = sample_fbm(small_params, cov=small_cov, rng=stream(small_params.seed, 0))
        assert np.array_equal(a.values, b.values)

    def test_unknown_method(self, small_params, small_cov):
        with pytest.raises(ValueError, match="method"):
            sample_fbm(small_params, cov=small_cov, method="spectral")

    def test_davies_harte_shape_and_determinism(self):
        p = ModelParams(H=0.7, N=33, d=2, seed=5)
        a = sample_fbm(p, method="davies-harte", rng=stream(5, 0))
        b = sample_fbm(p, method="davies-harte", rng=stream(5, 0))
        assert a.values.shape == (33, 2)
        assert np.all(a.values[0] == 0.0)
        assert np.array_equal(a.values, b.values)


class TestSampleBatch:
    def test_subset_reproducibility(self):
        # replica i is keyed by (seed, offset + i): any sub-batch matches
        # the corresponding rows of the larger batch bit for bit
        p = ModelParams(N=17, d=2, seed=99)
        cov = GridCovariance(p)
        full = sample_fbm_batch(p, 7, cov=cov)
        part = sample_fbm_batch(p, 4, cov=cov, stream_offset=3)
        assert np.array_equal(full[3:], part)

    def test_matches_single_path_sampler(self):
        p = ModelParams(N=17, d=2, seed=99)
        cov = GridCovariance(p)
        batch = sample_fbm_batch(p, 3, cov=cov)
        one = sample_fbm(p, cov=cov, rng=stream(p.seed, 0))
        assert np.array_equal(batch[0], one.values)

    def test_thread_count_invariance(self):
        # chunk boundaries are fixed, so the thread count cannot change bits
        p = ModelParams(N=17, d=2, seed=3)
        cov = GridCovariance(p)
        a = sample_fbm_batch(p, 600, cov=cov, threads=1)
        b = sample_fbm_batch(p, 600, cov=cov, threads=3)
        assert np.array_equal(a, b)

    def test_davies_harte_batch(self):
        p = ModelParams(H=0.3, N=33, d=1, seed=11)
        a = sample_fbm_batch(p, 5, method="davies-harte", grid=make_grid(p))
        b = sample_fbm_batch(p, 3, method="davies-harte", grid=make_grid(p), stream_offset=2)
        assert a.shape == (5, 33, 1)
        assert np.array_equal(a[2:], b)


class TestSamplerStatistics:
    M = 6000

    def test_empirical_covariance(self):
        p = ModelParams(H=0.5, N=33, d=2, seed=12345)
        cov = GridCovariance(p)
        x = sample_fbm_batch(p, self.M, cov=cov)
        t = cov.grid.points
        r = np.random.default_rng(0)
        for _ in range(10):
            i, j = sorted(r.integers(1, 33, size=2))
            prod = x[:, i, :] * x[:, j, :]  # (M, d)
            est = prod.mean(axis=0)
            se = prod.std(axis=0, ddof=1) / np.sqrt(self.M)
            assert np.all(np.abs(est - cov_h(0.5, t[i], t[j])) <= 5.0 * se)

    def test_mean_zero(self):
        p = ModelParams(H=0.5, N=33, d=2, seed=999)
        x = sample_fbm_batch(p, self.M, cov=GridCovariance(p))
        end = x[:, -1, :]
        se = end.std(axis=0, ddof=1) / np.sqrt(self.M)
        assert np.all(np.abs(end.mean(axis=0)) <= 5.0 * se)

    def test_stationary_increments(self):
        # E[(B_t - B_s)^2] = |t - s|^{2H} per component
        p = ModelParams(H=0.7, N=33, d=2, seed=777)
        cov = GridCovariance(p)
        x = sample_fbm_batch(p, self.M, cov=cov)
        t = cov.grid.points
        r = np.random.default_rng(1)
        for _ in range(10):
            i, j = sorted(r.integers(0, 33, size=2))
            if i == j:
                continue
            sq = (x[:, j, :] - x[:, i, :]) ** 2
            est = sq.mean(axis=0)
            se = sq.std(axis=0, ddof=1) / np.sqrt(self.M)
            assert np.all(np.abs(est - (t[j] - t[i]) ** 1.4) <= 5.0 * se)

    def test_brownian_disjoint_increments_uncorrelated(self):
        p = ModelParams(H=0.5, N=33, d=1, seed=31337)
        x = sample_fbm_batch(p, self.M, cov=GridCovariance(p))
        inc1 = x[:, 8, 0] - x[:, 0, 0]
        inc2 = x[:, 24, 0] - x[:, 16, 0]
        prod = inc1 * inc2
        se = prod.std(ddof=1) / np.sqrt(self.M)
        assert abs(prod.mean()) <= 5.0 * se

    def test_davies_harte_matches_cholesky_law(self):
        # same covariance structure from both backends, checked at 3 pairs
        p = ModelParams(H=0.3, N=33, d=1, seed=2024)
        cov = GridCovariance(p)
        x = sample_fbm_batch(p, self.M, method="davies-harte", grid=cov.grid)
        t = cov.grid.points
        for i, j in [(32, 32), (8, 24), (16, 32)]:
            prod = x[:, i, 0] * x[:, j, 0]
            se = prod.std(ddof=1) / np.sqrt(self.M)
            assert abs(prod.mean() - cov_h(0.3, t[i], t[j])) <= 5.0 * se
