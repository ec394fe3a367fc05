"""Admissible path-space shifts and the Gaussian change-of-measure density.

A shift direction is a path k in the reproducing-kernel space of the fBm
covariance. On the grid a shift is represented by its samples k (with
k(t_0) = 0) together with the weight vector w solving sigma @ w = k[1:],
one weight column per component. The discrete energy w^T k plays the role
of the squared reproducing-kernel norm, and the density of the law of
(X + u k) against the law of X is

    exp(u * w^T x - 0.5 * u^2 * w^T k),

multiplied over the d independent components.

For H > 1/2 the kernel

    R_H(t, s) = C_H * s^{1/2 - H} * int_s^t (u - s)^{H - 3/2} u^{H - 1/2} du

with C_H = sqrt(H * (2H - 1) / beta(2 - 2H, H - 1/2)) factorizes the
covariance as cov(t, s) = int_0^{t^s} R_H(t, r) R_H(s, r) dr, and shifts can
alternatively be built from an L^2 control h via k(t) = int_0^t R_H(t,s) h(s) ds.
The grid constructor above is the primary route and works for every H,
including H <= 1/2 where this kernel formula has no real normalization.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.integrate
import scipy.special

from .fbm import FbmPath, GridCovariance
from .params import ModelParams, TimeGrid

__all__ = [
    "c_h_norm",
    "kernel_rh",
    "CMShift",
    "make_shift_from_target",
    "make_shift_from_h",
    "builtin_shift",
    "ShiftedPath",
    "log_gaussian_rn_density",
    "gaussian_rn_density",
]

# log-density threshold beyond which exp() leaves the double range
_LOG_OVERFLOW = 700.0


def c_h_norm(H: float) -> float:
    """Normalization C_H = sqrt(H(2H-1)/beta(2-2H, H-1/2)); real for H > 1/2."""
    if H <= 0.5:
        raise ValueError(
            "C_H is real only for H > 1/2; for H <= 1/2 build shifts with "
            "make_shift_from_target"
        )
    if H >= 1.0:
        raise ValueError(f"H must lie in (1/2, 1), got H={H}")
    return float(
        np.sqrt(H * (2.0 * H - 1.0) / scipy.special.beta(2.0 - 2.0 * H, H - 0.5))
    )


@lru_cache(maxsize=8)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def kernel_rh(H: float, t: float, s: float, n_quad: int = 64) -> float:
    """Square-root kernel R_H(t, s) for H > 1/2; zero for t <= s.

    The endpoint singularity (u - s)^{H - 3/2} is removed by substituting
    u = s + tau^{1/(H - 1/2)}, after which the integrand is the smooth
    function (s + tau^{1/a})^a / a and n_quad-point Gauss-Legendre applies.
    """
    c = c_h_norm(H)
    if s <= 0.0:
        raise ValueError("kernel_rh requires s > 0")
    if t <= s:
        return 0.0
    a = H - 0.5
    upper = (t - s) ** a
    nodes, weights = _gauss_legendre(n_quad)
    tau = 0.5 * upper * (nodes + 1.0)
    integral = 0.5 * upper * np.sum(weights * (s + tau ** (1.0 / a)) ** a) / a
    return float(c * s ** (0.5 - H) * integral)


@dataclass(eq=False)
class CMShift:
    """Grid realization of a shift direction.

    k has shape (N, d) with k[0] = 0; w has shape (N-1, d) and solves
    sigma @ w[:, c] = k[1:, c] per component; h is the generating control
    when the shift was built from one (None otherwise).
    """

    grid: TimeGrid
    k: np.ndarray
    w: np.ndarray
    h: np.ndarray | None = None

    @property
    def d(self) -> int:
        return self.k.shape[1]

    @property
    def energy(self) -> float:
        """Discrete squared norm w^T k summed over components."""
        return float(np.sum(self.w * self.k[1:]))

    def check(self, cov: GridCovariance, tol: float = 1e-8) -> None:
        if np.any(self.k[0] != 0.0):
            raise AssertionError("shift must vanish at t_0")
        resid = cov.sigma @ self.w - self.k[1:]
        scale = max(np.linalg.norm(self.k[1:]), 1e-300)
        if np.linalg.norm(resid) / scale > tol:
            raise AssertionError("weights do not solve sigma @ w = k")
        if self.energy < 0.0:
            raise AssertionError("shift energy must be nonnegative")


def _as_columns(arr: np.ndarray, n: int, d: int, what: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1:
        full = np.zeros((n, d))
        full[:, 0] = arr
        arr = full
    if arr.shape != (n, d):
        raise ValueError(f"{what} must have shape ({n},) or ({n}, {d})")
    return arr


def make_shift_from_target(
    params: ModelParams,
    grid: TimeGrid | None = None,
    k=None,
    *,
    cov: GridCovariance | None = None,
) -> CMShift:
    """Shift from target samples: stores k and solves sigma @ w = k[1:].

    Valid for every H in (0, 1); this is the primary constructor. A 1-d k is
    placed in the first component.
    """
    if cov is None:
        cov = GridCovariance(params, grid)
    grid = cov.grid
    k = _as_columns(k, grid.n, params.d, "k")
    if np.any(np.abs(k[0]) > 1e-12):
        raise ValueError("shift target must vanish at t_0")
    k = k.copy()
    k[0] = 0.0
    w = cov.solve(k[1:])
    return CMShift(grid=grid, k=k, w=w)


def make_shift_from_h(
    params: ModelParams,
    grid: TimeGrid | None = None,
    h=None,
    *,
    cov: GridCovariance | None = None,
    n_quad: int = 64,
) -> CMShift:
    """Shift from an L^2 control h via k(t) = int_0^t R_H(t, s) h(s) ds.

    Requires H > 1/2 (kernel route). h is given by its grid samples and
    interpolated linearly inside the quadrature. Kept as a consistency
    check against the grid constructor; the integrable s^{1/2-H} endpoint
    is handled by the adaptive integrator.
    """
    if params.H <= 0.5:
        raise ValueError(
            "make_shift_from_h needs H > 1/2; use make_shift_from_target"
        )
    if cov is None:
        cov = GridCovariance(params, grid)
    grid = cov.grid
    h = _as_columns(h, grid.n, params.d, "h")
    pts = grid.points
    k = np.zeros((grid.n, params.d))
    for c in range(params.d):
        if not np.any(h[:, c]):
            continue
        for i in range(1, grid.n):
            t = pts[i]

            def integrand(s: float) -> float:
                return kernel_rh(params.H, t, s, n_quad) * np.interp(s, pts, h[:, c])

            val, _ = scipy.integrate.quad(
                integrand, 0.0, t, limit=200, epsabs=1e-10, epsrel=1e-8
            )
            k[i, c] = val
    shift = make_shift_from_target(params, grid, k, cov=cov)
    return CMShift(grid=shift.grid, k=shift.k, w=shift.w, h=h)


def builtin_shift(
    name: str,
    params: ModelParams,
    grid: TimeGrid | None = None,
    *,
    cov: GridCovariance | None = None,
) -> CMShift:
    """Named shifts: "linear" (t in component 1), "sine" (sin(pi t / T) in
    component 1), "covcol:j" (j-th covariance column, 1-based)."""
    if cov is None:
        cov = GridCovariance(params, grid)
    grid = cov.grid
    t = grid.points
    if name == "linear":
        return make_shift_from_target(params, grid, t, cov=cov)
    if name == "sine":
        return make_shift_from_target(
            params, grid, np.sin(np.pi * t / grid.horizon), cov=cov
        )
    if name.startswith("covcol:"):
        j = int(name.split(":", 1)[1])
        if not 1 <= j <= grid.n - 1:
            raise ValueError(f"covcol index must lie in 1..{grid.n - 1}, got {j}")
        k = np.zeros(grid.n)
        k[1:] = cov.sigma[:, j - 1]
        return make_shift_from_target(params, grid, k, cov=cov)
    raise ValueError(f"unknown shift name {name!r}")


@dataclass(eq=False)
class ShiftedPath:
    """base + u * k, materialized so downstream code sees plain values."""

    base: FbmPath
    shift: CMShift
    u: float

    def __post_init__(self):
        if not self.base.grid.same_as(self.shift.grid):
            raise ValueError("path and shift must share a grid")
        if self.shift.k.shape[1] != self.base.d:
            raise ValueError("path and shift must share the component count")
        self.values = self.base.values + self.u * self.shift.k

    @property
    def grid(self) -> TimeGrid:
        return self.base.grid

    @property
    def cov(self) -> GridCovariance:
        return self.base.cov

    @property
    def params(self) -> ModelParams:
        return self.base.params

    @property
    def d(self) -> int:
        return self.base.d


def log_gaussian_rn_density(shift: CMShift, u: float, path) -> float:
    """log of the shift-u density: u * w^T x - 0.5 * u^2 * w^T k, summed
    over components. Affine in the path values."""
    if not shift.grid.same_as(path.grid):
        raise ValueError("shift and path must share a grid")
    x = path.values[1:]
    return float(u * np.sum(shift.w * x) - 0.5 * u * u * shift.energy)


def gaussian_rn_density(shift: CMShift, u: float, path) -> float:
    """Density of law(X + u k) against law(X) at the given path.

    Strictly positive; equal to 1 at u = 0. Raises OverflowError when the
    value leaves the double range instead of returning inf.
    """
    log_val = log_gaussian_rn_density(shift, u, path)
    if log_val > _LOG_OVERFLOW:
        raise OverflowError(
            f"gaussian_rn_density overflows: log density {log_val:.3e}"
        )
    return float(np.exp(log_val))
