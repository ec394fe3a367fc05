"""Reweighted path ensembles, cylinder functions, and the quadratic form.

The reweighted (polymer-type) path law is

    d nu_g = exp(-g * L_c) d nu / E[exp(-g * L_c)],

realized here by self-normalized importance sampling: an ensemble of fBm
paths with weights exp(-g * lc), where lc is the centered SILT at the
bottom of an eps ladder. Cylinder functions f(l_1(x), ..., l_n(x)) built
from linear grid functionals have exact directional derivatives along
Cameron-Martin shifts, and the quadratic (Dirichlet-type) form

    E_g[ sum_n  d_k_n f * d_k_n h ]

is estimated over a truncated orthonormal shift basis built from
covariance columns.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .cameron_martin import CMShift
from .fbm import GridCovariance, sample_fbm_batch
from .params import ModelParams, TimeGrid
from .silt import LadderConfig, silt_expectation_grid, silt_raw_batch

__all__ = [
    "WeightedEnsemble",
    "edwards_ensemble",
    "coordinate_functional",
    "weighted_functional",
    "SmoothFn",
    "make_tanh",
    "make_linear",
    "make_poly_bump",
    "CylinderFunction",
    "random_cylinder",
    "gradient_cylinder",
    "orthonormal_shift_basis",
    "dirichlet_form",
]

ESS_DEGENERACY_FRACTION = 0.01


@dataclass(eq=False)
class WeightedEnsemble:
    """Paths, centered SILT values, and unnormalized weights exp(-g * lc).

    lc_ladder holds the centered values across the whole eps ladder
    (column -1 is the working value lc). Weights are finite by
    construction; non-finite weights abort ensemble construction.
    """

    params: ModelParams
    grid: TimeGrid
    values: np.ndarray
    lc: np.ndarray
    weights: np.ndarray
    epsilons: np.ndarray
    lc_ladder: np.ndarray

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def eps(self) -> float:
        """Working regularization: the smallest rung of the ladder."""
        return float(self.epsilons[-1])

    @property
    def ess(self) -> float:
        s1 = float(np.sum(self.weights))
        s2 = float(np.sum(self.weights**2))
        return s1 * s1 / s2

    @property
    def normalized_weights(self) -> np.ndarray:
        return self.weights / np.sum(self.weights)

    def expectation(self, a: np.ndarray) -> tuple[float, float]:
        """Self-normalized weighted mean of a per-path array, with stderr."""
        a = np.asarray(a, dtype=float)
        wn = self.normalized_weights
        mean = float(np.dot(wn, a))
        stderr = float(np.sqrt(np.sum(wn**2 * (a - mean) ** 2)))
        return mean, stderr

    def mgf_diagnostic(self) -> float:
        """Empirical E[exp(-2 g L_c)]; finiteness proxy for the weight tail."""
        return float(np.mean(self.weights**2))

    def weight_tail(self, qs=(0.5, 0.9, 0.99, 1.0)) -> np.ndarray:
        """Weight quantiles, the plot-ready degeneracy diagnostic."""
        return np.quantile(self.weights, np.asarray(qs))


def edwards_ensemble(
    params: ModelParams,
    m: int,
    ladder: LadderConfig | None = None,
    *,
    cov: GridCovariance | None = None,
    stream_offset: int = 0,
    threads: int = 1,
    method: str = "cholesky",
) -> WeightedEnsemble:
    """Sample M paths on index-derived streams and weight them by
    exp(-g * lc) at the bottom of the eps ladder."""
    if ladder is None:
        ladder = LadderConfig()
    if cov is None:
        cov = GridCovariance(params)
    values = sample_fbm_batch(
        params, m, cov=cov, stream_offset=stream_offset, threads=threads, method=method
    )
    eps = ladder.epsilons
    raw = silt_raw_batch(values, cov.grid, eps, threads=threads)
    expect = np.array([silt_expectation_grid(params, cov.grid, e) for e in eps])
    lc_ladder = raw - expect[None, :]
    lc = lc_ladder[:, -1]
    log_w = -params.g * lc
    with np.errstate(over="ignore"):
        weights = np.exp(log_w)
    if not np.all(np.isfinite(weights)):
        raise FloatingPointError(
            "non-finite importance weights; g is outside the admissible range"
        )
    ens = WeightedEnsemble(
        params=params,
        grid=cov.grid,
        values=values,
        lc=lc,
        weights=weights,
        epsilons=eps,
        lc_ladder=lc_ladder,
    )
    if ens.ess < ESS_DEGENERACY_FRACTION * m:
        warnings.warn(
            f"importance weights degenerate: ess {ens.ess:.1f} of {m}",
            RuntimeWarning,
            stacklevel=2,
        )
    return ens


# ------------------------------------------------------- cylinder functions #


def coordinate_functional(grid: TimeGrid, d: int, time_index: int, component: int) -> np.ndarray:
    """Linear functional x -> x(t_i)[c], as a weight array."""
    if not 0 <= time_index < grid.n:
        raise ValueError("time index out of range")
    w = np.zeros((grid.n, d))
    w[time_index, component] = 1.0
    return w


def weighted_functional(weights: np.ndarray) -> np.ndarray:
    """Linear functional x -> sum_ic weights[i, c] * x(t_i)[c]."""
    return np.asarray(weights, dtype=float)


@dataclass(eq=False)
class SmoothFn:
    """Smooth bounded R^n -> R map with an exact gradient, both vectorized
    over leading batch axes."""

    f: callable
    grad: callable
    name: str = "smooth"


def make_tanh(a, b: float = 0.0) -> SmoothFn:
    """f(z) = tanh(a . z + b)."""
    a = np.asarray(a, dtype=float)

    def f(z):
        return np.tanh(z @ a + b)

    def grad(z):
        t = np.tanh(z @ a + b)
        return (1.0 - t * t)[..., None] * a

    return SmoothFn(f=f, grad=grad, name="tanh")


def make_linear(a, b: float = 0.0) -> SmoothFn:
    """f(z) = a . z + b. Unbounded; for exact-identity checks and linear
    observables where boundedness does not matter."""
    a = np.asarray(a, dtype=float)

    def f(z):
        return np.asarray(z) @ a + b

    def grad(z):
        z = np.asarray(z)
        return np.broadcast_to(a, z.shape).copy()

    return SmoothFn(f=f, grad=grad, name="linear")


def make_poly_bump(c0: float, lin, quad) -> SmoothFn:
    """f(z) = (c0 + lin . z + sum_i quad_i z_i^2) * exp(-|z|^2 / 2)."""
    lin = np.asarray(lin, dtype=float)
    quad = np.asarray(quad, dtype=float)

    def f(z):
        p = c0 + z @ lin + (z * z) @ quad
        return p * np.exp(-0.5 * np.sum(z * z, axis=-1))

    def grad(z):
        e = np.exp(-0.5 * np.sum(z * z, axis=-1))
        p = c0 + z @ lin + (z * z) @ quad
        return e[..., None] * (lin + 2.0 * quad * z - p[..., None] * z)

    return SmoothFn(f=f, grad=grad, name="poly_bump")


@dataclass(eq=False)
class CylinderFunction:
    """f(l_1(x), ..., l_n(x)) with linear grid functionals l_i.

    `weights` has shape (n, N, d): one weight array per functional.
    """

    weights: np.ndarray
    fn: SmoothFn

    @property
    def n_args(self) -> int:
        return self.weights.shape[0]

    def z(self, values: np.ndarray) -> np.ndarray:
        """Functional values; accepts (N, d) or batched (M, N, d)."""
        return np.tensordot(values, self.weights, axes=([-2, -1], [1, 2]))

    def value(self, values: np.ndarray):
        return self.fn.f(self.z(values))

    def grad_coeffs(self, values: np.ndarray) -> np.ndarray:
        return self.fn.grad(self.z(values))


def random_cylinder(
    rng: np.random.Generator, grid: TimeGrid, d: int, n_args: int = 2
) -> CylinderFunction:
    """Random test function: a mix of coordinate and smoothed-weight
    functionals composed with a random bounded smooth map."""
    ws = []
    for _ in range(n_args):
        if rng.random() < 0.5:
            i = int(rng.integers(1, grid.n))
            c = int(rng.integers(0, d))
            ws.append(coordinate_functional(grid, d, i, c))
        else:
            w = rng.standard_normal((grid.n, d))
            w[0] = 0.0
            ws.append(w / (np.linalg.norm(w) * np.sqrt(grid.n)))
    weights = np.stack(ws)
    if rng.random() < 0.5:
        fn = make_tanh(rng.standard_normal(n_args), float(rng.standard_normal()))
    else:
        fn = make_poly_bump(
            float(rng.standard_normal()),
            rng.standard_normal(n_args),
            0.5 * rng.standard_normal(n_args),
        )
    return CylinderFunction(weights=weights, fn=fn)


def gradient_cylinder(fcn: CylinderFunction, shift: CMShift, values: np.ndarray):
    """Directional derivative of the cylinder function along the shift:
    sum_i d_i f(l(x)) * l_i(k). Exact by the chain rule (l_i are linear).

    Accepts (N, d) or batched (M, N, d) values.
    """
    zk = fcn.z(shift.k)
    g = fcn.grad_coeffs(np.asarray(values, dtype=float))
    return g @ zk


# -------------------------------------------------- quadratic form estimate #


def orthonormal_shift_basis(
    params: ModelParams,
    *,
    cov: GridCovariance | None = None,
    n_trunc: int = 8,
) -> list[CMShift]:
    """Covariance-column shifts, orthonormalized in the shift inner product
    <a, b> = sum_c w_a^T k_b. Columns cycle through components so the basis
    spans all d components; truncation defaults to 8 directions."""
    if cov is None:
        cov = GridCovariance(params)
    grid = cov.grid
    n = grid.n - 1
    if n_trunc > n * params.d:
        raise ValueError("truncation exceeds the available directions")
    raw: list[tuple[np.ndarray, np.ndarray]] = []
    j = 0
    while len(raw) < n_trunc:
        col = j // params.d
        comp = j % params.d
        if col >= n:
            raise ValueError("truncation exceeds the available columns")
        k = np.zeros((grid.n, params.d))
        k[1:, comp] = cov.sigma[:, col]
        w = np.zeros((n, params.d))
        w[col, comp] = 1.0
        raw.append((k, w))
        j += 1

    basis: list[tuple[np.ndarray, np.ndarray]] = []
    for k, w in raw:
        k = k.copy()
        w = w.copy()
        for _ in range(2):  # re-orthogonalization pass for stability
            for kb, wb in basis:
                proj = float(np.sum(wb * k[1:]))
                k -= proj * kb
                w -= proj * wb
        norm = np.sqrt(float(np.sum(w * k[1:])))
        if norm <= 0.0:
            raise np.linalg.LinAlgError("degenerate shift basis")
        k /= norm
        w /= norm
        basis.append((k, w))
    return [CMShift(grid=grid, k=k, w=w) for k, w in basis]


def dirichlet_form(
    f: CylinderFunction,
    h: CylinderFunction,
    ensemble: WeightedEnsemble,
    basis: list[CMShift],
) -> tuple[float, float]:
    """Weighted estimate of sum_n E_g[d_k_n f * d_k_n h] over the basis.

    The per-path summand is formed identically for (f, h) and (h, f), so
    the estimate is symmetric to the bit; for f = h it is a weighted mean
    of squares and therefore nonnegative. Returns (value, stderr).
    """
    lf = np.stack([f.z(s.k) for s in basis], axis=1)  # (n_f, n_basis)
    lh = np.stack([h.z(s.k) for s in basis], axis=1)
    gf = f.grad_coeffs(ensemble.values) @ lf  # (M, n_basis)
    gh = h.grad_coeffs(ensemble.values) @ lh
    per_path = np.sum(gf * gh, axis=1)
    return ensemble.expectation(per_path)
