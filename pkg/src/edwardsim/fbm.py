"""Exact simulation of d-dimensional fractional Brownian motion on a grid.

The covariance of one component is

    cov_h(H, t, s) = 0.5 * (t^{2H} + s^{2H} - |t - s|^{2H}),

and the d components are independent copies. Sampling is exact: the grid
covariance (t_0 = 0 excluded, where the path is pinned to zero) is factored
once by a dense Cholesky decomposition and reused for every path and every
component. A circulant-embedding backend for the increment process is
available for large N; it produces the same law and is checked against the
Cholesky marginals in the test suite.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .params import ModelParams, TimeGrid, make_grid
from .rng import stream

__all__ = [
    "cov_h",
    "build_covariance",
    "GridCovariance",
    "FbmPath",
    "sample_fbm",
    "sample_fbm_batch",
]


def cov_h(H: float, t, s):
    """One-component fBm covariance 0.5*(t^2H + s^2H - |t-s|^2H).

    Accepts scalars or broadcastable arrays; times must be nonnegative.
    """
    if not 0.0 < H < 1.0:
        raise ValueError(f"H must lie in (0, 1), got H={H}")
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0.0) or np.any(s < 0.0):
        raise ValueError("cov_h: times must be nonnegative")
    two_h = 2.0 * H
    out = 0.5 * (t**two_h + s**two_h - np.abs(t - s) ** two_h)
    return out if out.ndim else float(out)


def build_covariance(params: ModelParams, grid: TimeGrid) -> np.ndarray:
    """(N-1) x (N-1) covariance matrix of one component at t_1..t_{N-1}."""
    pts = grid.points[1:]
    return cov_h(params.H, pts[:, None], pts[None, :])


def _cholesky_with_jitter(sigma: np.ndarray) -> tuple[np.ndarray, bool]:
    """Lower Cholesky factor; one jitter retry of 1e-12 * trace/N, then fail.

    Returns (L, jittered). Failure raises LinAlgError naming the offending
    leading minor.
    """
    c, info = scipy.linalg.lapack.dpotrf(sigma, lower=1, clean=1, overwrite_a=0)
    if info == 0:
        return c, False
    n = sigma.shape[0]
    jitter = 1e-12 * np.trace(sigma) / n
    bumped = sigma + jitter * np.eye(n)
    c, info = scipy.linalg.lapack.dpotrf(bumped, lower=1, clean=1, overwrite_a=0)
    if info == 0:
        warnings.warn(
            f"covariance required diagonal jitter {jitter:.3e} to factor",
            RuntimeWarning,
            stacklevel=3,
        )
        return c, True
    raise np.linalg.LinAlgError(
        f"covariance is not positive definite: leading minor {info} "
        f"failed even after jitter {jitter:.3e}"
    )


class GridCovariance:
    """Grid covariance of one fBm component with a cached Cholesky factor.

    Shared across the d components and across paths; also provides the
    linear solves used by Cameron-Martin weights and the path sampler.
    """

    def __init__(self, params: ModelParams, grid: TimeGrid | None = None):
        self.params = params
        self.grid = make_grid(params) if grid is None else grid
        if self.grid.n != params.N:
            raise ValueError("grid size does not match params.N")
        self.sigma = build_covariance(params, self.grid)
        self.chol, self.jittered = _cholesky_with_jitter(self.sigma)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve sigma @ x = b via the cached factor."""
        return scipy.linalg.cho_solve((self.chol, True), b)

    def factor_residual(self) -> float:
        """Relative Frobenius error of L L^T against sigma."""
        rec = self.chol @ self.chol.T
        return float(
            np.linalg.norm(rec - self.sigma) / np.linalg.norm(self.sigma)
        )


@dataclass(eq=False)
class FbmPath:
    """One sampled path: grid, values (N, d) with values[0] = 0, and the
    covariance object whose factor generated it."""

    grid: TimeGrid
    values: np.ndarray
    cov: GridCovariance

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def params(self) -> ModelParams:
        return self.cov.params

    def check(self, tol: float = 1e-8) -> None:
        if self.values.shape != (self.grid.n, self.d):
            raise AssertionError("value array shape does not match grid")
        if np.any(self.values[0] != 0.0):
            raise AssertionError("path must start at 0")
        if self.cov.factor_residual() > tol:
            raise AssertionError("cached factor does not reproduce sigma")


# ---------------------------------------------------------------- samplers #


def _fgn_davies_harte(H: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n steps of unit-spacing fractional Gaussian noise via circulant
    embedding. Eigenvalues of the embedding are clipped at zero if they
    undershoot by rounding only; a genuinely negative spectrum is an error.
    """
    k = np.arange(n, dtype=float)
    gamma = 0.5 * ((k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))
    row = np.concatenate([gamma, [0.0], gamma[:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-8 * lam.max():
        raise np.linalg.LinAlgError(
            f"circulant embedding not nonnegative (min eigenvalue {lam.min():.3e})"
        )
    lam = np.clip(lam, 0.0, None)
    m = 2 * n
    z = rng.standard_normal(m)
    a = np.zeros(m, dtype=complex)
    a[0] = np.sqrt(lam[0] / m) * z[0]
    a[n] = np.sqrt(lam[n] / m) * z[n]
    half = np.sqrt(lam[1:n] / (2.0 * m))
    a[1:n] = half * (z[1:n] + 1j * z[n + 1 :])
    a[n + 1 :] = np.conj(a[1:n][::-1])
    return np.fft.fft(a).real[:n]


def sample_fbm(
    params: ModelParams,
    grid: TimeGrid | None = None,
    rng: np.random.Generator | None = None,
    *,
    cov: GridCovariance | None = None,
    method: str = "cholesky",
) -> FbmPath:
    """Draw one path with d independent components, pinned to 0 at t_0.

    `rng` defaults to stream(params.seed, 0). With method="cholesky" the
    draw is values[1:] = L @ z, one (N-1, d) normal block per path. With
    method="davies-harte" the increments come from the circulant embedding
    and are scaled by spacing^H (exact by self-similarity on a uniform grid).
    """
    if cov is None:
        cov = GridCovariance(params, grid)
    grid = cov.grid
    if rng is None:
        rng = stream(params.seed, 0)
    n = grid.n - 1
    values = np.zeros((grid.n, params.d))
    if method == "cholesky":
        z = rng.standard_normal((n, params.d))
        values[1:] = cov.chol @ z
    elif method == "davies-harte":
        scale = grid.spacing**params.H
        for c in range(params.d):
            fgn = _fgn_davies_harte(params.H, n, rng)
            values[1:, c] = scale * np.cumsum(fgn)
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return FbmPath(grid=grid, values=values, cov=cov)


def sample_fbm_batch(
    params: ModelParams,
    m: int,
    *,
    cov: GridCovariance | None = None,
    grid: TimeGrid | None = None,
    stream_offset: int = 0,
    threads: int = 1,
    method: str = "cholesky",
) -> np.ndarray:
    """M paths as one (M, N, d) array.

    Replica i draws from stream(params.seed, stream_offset + i), so any
    subset of replicas reproduces bit-identically no matter how the batch is
    chunked or threaded.
    """
    if cov is None:
        cov = GridCovariance(params, grid)
    grid = cov.grid
    n = grid.n - 1
    out = np.zeros((m, grid.n, params.d))

    if method == "cholesky":
        z = np.empty((m, n, params.d))
        for i in range(m):
            z[i] = stream(params.seed, stream_offset + i).standard_normal(
                (n, params.d)
            )

        def fill(lo: int, hi: int) -> None:
            block = z[lo:hi].transpose(1, 0, 2).reshape(n, -1)
            vals = cov.chol @ block
            out[lo:hi, 1:, :] = vals.reshape(n, hi - lo, params.d).transpose(1, 0, 2)

    elif method == "davies-harte":
        scale = grid.spacing**params.H

        def fill(lo: int, hi: int) -> None:
            for i in range(lo, hi):
                r = stream(params.seed, stream_offset + i)
                for c in range(params.d):
                    fgn = _fgn_davies_harte(params.H, n, r)
                    out[i, 1:, c] = scale * np.cumsum(fgn)

    else:
        raise ValueError(f"unknown sampling method {method!r}")

    bounds = _chunk_bounds(m, threads)
    if threads <= 1 or len(bounds) <= 1:
        for lo, hi in bounds:
            fill(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda b: fill(*b), bounds))
    return out


def _chunk_bounds(m: int, threads: int, target: int = 256) -> list[tuple[int, int]]:
    """Fixed chunking of m items, independent of the thread count."""
    size = max(1, min(target, m))
    return [(lo, min(lo + size, m)) for lo in range(0, m, size)]
