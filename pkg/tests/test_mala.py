import warnings
from types import SimpleNamespace

import numpy as np
import pytest

from edwardsim import (
    GridCovariance,
    ModelParams,
    batch_means_stderr,
    load_checkpoint,
    run_mala,
    save_checkpoint,
    silt_raw,
)
from edwardsim.mala import _Target, _full, _make_state


@pytest.fixture(scope="module")
def chain_setup():
    p = ModelParams(H=0.5, d=2, T=1.0, g=0.1, N=32, seed=0)
    return p, GridCovariance(p)


def _random_free_coords(cov, rng):
    return cov.chol @ rng.standard_normal((cov.grid.n - 1, cov.params.d))


class TestTarget:
    def test_raw_matches_silt(self, chain_setup, rng):
        p, cov = chain_setup
        target = _Target(p, cov, 0.05)
        for _ in range(5):
            xr = _random_free_coords(cov, rng)
            x = _full(xr)
            path = SimpleNamespace(values=x, grid=cov.grid)
            assert abs(target.raw(x) / silt_raw(path, 0.05) - 1.0) < 1e-12

    def test_rejects_bad_eps(self, chain_setup):
        p, cov = chain_setup
        with pytest.raises(ValueError, match="eps"):
            _Target(p, cov, 0.0)

    def test_silt_gradient_against_finite_differences(self, chain_setup, rng):
        p, cov = chain_setup
        target = _Target(p, cov, 0.05)
        delta = 1e-6
        for _ in range(20):
            xr = _random_free_coords(cov, rng)
            _, grad = target.raw_and_grad(_full(xr))
            v = rng.standard_normal(xr.shape)
            v /= np.linalg.norm(v)
            analytic = float(np.sum(grad * v))
            fd = (
                target.raw(_full(xr + delta * v)) - target.raw(_full(xr - delta * v))
            ) / (2.0 * delta)
            assert abs(analytic - fd) / max(abs(analytic), 1e-10) < 1e-5

    def test_log_target_gradient_against_finite_differences(
        self, chain_setup, rng
    ):
        p, cov = chain_setup
        target = _Target(p, cov, 0.05)
        delta = 1e-5
        for _ in range(20):
            xr = _random_free_coords(cov, rng)
            st = _make_state(target, xr)
            v = rng.standard_normal(xr.shape)
            v /= np.linalg.norm(v)
            analytic = float(np.sum(st.glog * v))
            up = _make_state(target, xr + delta * v).logpi
            dn = _make_state(target, xr - delta * v).logpi
            fd = (up - dn) / (2.0 * delta)
            assert abs(analytic - fd) / max(abs(analytic), 1e-10) < 1e-5

    def test_state_identities(self, chain_setup, rng):
        p, cov = chain_setup
        target = _Target(p, cov, 0.05)
        xr = _random_free_coords(cov, rng)
        st = _make_state(target, xr)
        assert st.raw is not None
        drift_direct = -xr - p.g * (cov.sigma @ (-(st.glog + st.prec) / p.g))
        assert np.allclose(st.drift, drift_direct, rtol=1e-10, atol=1e-12)

    def test_gaussian_fast_path(self, rng):
        p = ModelParams(H=0.5, d=2, N=32, g=0.0, seed=0)
        cov = GridCovariance(p)
        target = _Target(p, cov, 0.05)
        xr = _random_free_coords(cov, rng)
        st = _make_state(target, xr)
        assert st.raw is None
        assert np.array_equal(st.drift, -xr)
        assert np.array_equal(st.glog, -st.prec)


class TestRunMala:
    def test_trace_shapes_and_determinism(self, chain_setup):
        p, cov = chain_setup
        kwargs = dict(
            eps=0.05, n_iter=800, burn_in=200, cov=cov, step=0.5, thin=20
        )
        a = run_mala(p, **kwargs)
        b = run_mala(p, **kwargs)
        n_rec = (800 - 200) // 20
        assert a.traces["lc"].shape == (n_rec,)
        assert a.traces["coord"].shape == (n_rec, 2)
        assert a.traces["logpi"].shape == (n_rec,)
        assert 0.0 < a.acceptance_rate <= 1.0
        for key in ("lc", "coord", "logpi"):
            assert np.array_equal(a.traces[key], b.traces[key])
        assert np.array_equal(a.state.xr, b.state.xr)

    def test_zero_coupling_chain(self, chain_setup):
        p, cov = chain_setup
        p0 = ModelParams(H=0.5, d=2, N=32, g=0.0, seed=1)
        res = run_mala(p0, eps=0.05, n_iter=1500, burn_in=500, cov=cov, step=0.8)
        assert np.all(np.isfinite(res.traces["lc"]))
        assert res.traces["lc"].size == 50

    def test_vanishing_step_accepts_everything(self, chain_setup):
        p, cov = chain_setup
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = run_mala(
                p,
                eps=0.05,
                n_iter=400,
                burn_in=0,
                cov=cov,
                step=1e-6,
                adapt=False,
            )
        assert res.acceptance_rate >= 0.99

    def test_acceptance_warning_when_step_is_huge(self, chain_setup):
        p, cov = chain_setup
        with pytest.warns(RuntimeWarning, match="acceptance rate"):
            run_mala(
                p,
                eps=0.05,
                n_iter=300,
                burn_in=0,
                cov=cov,
                step=80.0,
                adapt=False,
            )

    def test_validation(self, chain_setup):
        p, cov = chain_setup
        with pytest.raises(ValueError, match="n_iter"):
            run_mala(p, eps=0.05, n_iter=0, burn_in=0, cov=cov)
        with pytest.raises(ValueError, match="record_index"):
            run_mala(
                p, eps=0.05, n_iter=10, burn_in=0, cov=cov, record_index=0
            )
        with pytest.raises(ValueError, match="record_index"):
            run_mala(
                p, eps=0.05, n_iter=10, burn_in=0, cov=cov, record_index=32
            )

    def test_gaussian_marginal_moments(self):
        # g = 0 target is the exact path law: the recorded coordinate has
        # mean 0 and variance t^{2H} up to Monte Carlo error
        p = ModelParams(H=0.5, d=2, N=32, g=0.0, seed=3)
        cov = GridCovariance(p)
        res = run_mala(
            p, eps=0.05, n_iter=24_000, burn_in=4_000, cov=cov, step=0.8, thin=10
        )
        x = res.traces["coord"][:, 0]
        t_mid = cov.grid.points[16]
        assert abs(x.mean()) <= 5.0 * batch_means_stderr(x)
        sq = x * x
        assert abs(sq.mean() - t_mid) <= 5.0 * batch_means_stderr(sq)


class TestCheckpoint:
    def test_resume_reproduces_uninterrupted_chain(self, chain_setup, tmp_path):
        p, cov = chain_setup
        kwargs = dict(eps=0.05, cov=cov, step=0.5, thin=20)
        full = run_mala(p, n_iter=1000, burn_in=200, **kwargs)
        first = run_mala(p, n_iter=600, burn_in=200, **kwargs)
        ck = tmp_path / "chain.npz"
        save_checkpoint(ck, first.state)
        state = load_checkpoint(ck)
        second = run_mala(p, n_iter=400, burn_in=0, resume=state, **kwargs)
        assert second.burn_in == 0
        for key in ("lc", "logpi"):
            joined = np.concatenate([first.traces[key], second.traces[key]])
            assert np.array_equal(joined, full.traces[key])
        joined_coord = np.vstack([first.traces["coord"], second.traces["coord"]])
        assert np.array_equal(joined_coord, full.traces["coord"])
        assert np.array_equal(second.state.xr, full.state.xr)
        assert second.state.iteration == 1000

    def test_checkpoint_round_trip_fields(self, chain_setup, tmp_path):
        p, cov = chain_setup
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = run_mala(p, eps=0.05, n_iter=100, burn_in=0, cov=cov, step=0.4)
        ck = tmp_path / "state.npz"
        save_checkpoint(ck, res.state)
        back = load_checkpoint(ck)
        assert np.array_equal(back.xr, res.state.xr)
        assert back.step == res.state.step
        assert back.iteration == res.state.iteration
        rs_a, rs_b = back.rng_state, res.state.rng_state
        assert rs_a["bit_generator"] == rs_b["bit_generator"] == "Philox"
        assert np.array_equal(rs_a["state"]["counter"], rs_b["state"]["counter"])
        assert np.array_equal(rs_a["state"]["key"], rs_b["state"]["key"])

    def test_rejects_foreign_checkpoint(self, tmp_path):
        ck = tmp_path / "bad.npz"
        np.savez(
            ck,
            xr=np.zeros((3, 1)),
            step=np.float64(0.1),
            iteration=np.int64(5),
            rng_json=np.bytes_(b'{"bit_generator": "PCG64"}'),
        )
        with pytest.raises(ValueError, match="sampler"):
            load_checkpoint(ck)


class TestBatchMeans:
    def test_iid_scale(self):
        x = np.random.default_rng(0).standard_normal(4096)
        se = batch_means_stderr(x)
        iid = 1.0 / np.sqrt(4096)
        assert 0.5 * iid < se < 2.0 * iid

    def test_too_short(self):
        with pytest.raises(ValueError, match="short"):
            batch_means_stderr(np.ones(3))

    def test_result_stderr_accessor(self, chain_setup):
        p, cov = chain_setup
        res = run_mala(p, eps=0.05, n_iter=600, burn_in=100, cov=cov, step=0.5, thin=5)
        assert res.stderr("lc") >= 0.0
        assert res.stderr("logpi") >= 0.0
