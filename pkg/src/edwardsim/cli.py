"""Command-line front end: orchestration, persistence, and the selftest.

Every run resolves a RunConfig (file plus flag overrides), writes its
outputs under <outdir>/<subcommand>/, copies the config next to them, and
finishes with manifest.json carrying a sha256 for every output file, so a
run can be diffed or reproduced by checksum alone.

Exit codes: 0 success, 1 config error, 2 numeric failure, 3 selftest
failure. The output directory resolves, in order: EDWARDSIM_OUTDIR
environment variable, --out flag, config outdir.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import shutil
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cameron_martin import builtin_shift, gaussian_rn_density
from .config import ConfigError, RunConfig, config_hash, dump_config, load_config
from .edwards import (
    dirichlet_form,
    edwards_ensemble,
    orthonormal_shift_basis,
    random_cylinder,
)
from .fbm import GridCovariance, cov_h, sample_fbm, sample_fbm_batch
from .mala import _Target, batch_means_stderr, load_checkpoint, run_mala, save_checkpoint
from .moments import (
    continuity_scan,
    density_process_batch,
    gaussian_moment_integral,
    holder_verify,
    sigma_matrix,
)
from .params import ModelParams, make_grid
from .pathio import (
    read_path_binary,
    read_path_csv,
    read_shift_csv,
    write_path_binary,
    write_path_csv,
    write_shift_csv,
)
from .rng import stream
from .silt import (
    LadderConfig,
    brownian_plane_expectation,
    heat_kernel,
    silt_expectation,
    silt_expectation_grid,
    silt_limit,
    silt_raw_batch,
)

OUTDIR_ENV = "EDWARDSIM_OUTDIR"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_SELFTEST = 3


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _resolve_shift(name: str, params: ModelParams, cov: GridCovariance):
    """Built-in shift name or a CSV file path."""
    if name in ("linear", "sine") or name.startswith("covcol:"):
        return builtin_shift(name, params, cov.grid, cov=cov)
    p = Path(name)
    if p.suffix == ".csv" or p.exists():
        return read_shift_csv(p, params, cov=cov)
    raise ConfigError(
        f"unknown shift {name!r}; use linear, sine, covcol:<j>, or a CSV file"
    )


def _write_csv(path: Path, header: list[str], rows: np.ndarray, fmt) -> None:
    np.savetxt(path, rows, fmt=fmt, delimiter=",", header=",".join(header), comments="")


def _json_dump(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


# ------------------------------------------------------------- subcommands #


def _cmd_sample_fbm(cfg: RunConfig, args, outdir: Path) -> list[Path]:
    params = cfg.model_params()
    cov = GridCovariance(params)
    n_paths = 1 if args.paths is None else args.paths
    written = []
    for i in range(n_paths):
        path = sample_fbm(params, rng=stream(params.seed, i), cov=cov)
        csv = outdir / f"path_{i:05d}.csv"
        bin_ = outdir / f"path_{i:05d}.fbmp"
        write_path_csv(csv, path)
        write_path_binary(bin_, path)
        written += [csv, bin_]
    return written


def _cmd_silt(cfg: RunConfig, args, outdir: Path) -> list[Path]:
    params = cfg.model_params()
    cov = GridCovariance(params)
    ladder = LadderConfig(eps0=cfg.eps0, levels=cfg.levels)
    eps = ladder.epsilons
    values = sample_fbm_batch(params, cfg.paths, cov=cov, threads=cfg.threads)
    raw = silt_raw_batch(values, cov.grid, eps, threads=cfg.threads)
    expect = np.array([silt_expectation_grid(params, cov.grid, e) for e in eps])
    centered = raw - expect[None, :]

    m, k = raw.shape
    rows = np.zeros((m * k, 5))
    rows[:, 0] = np.repeat(np.arange(m), k)
    rows[:, 1] = np.tile(eps, m)
    rows[:, 2] = raw.ravel()
    rows[:, 3] = np.tile(expect, m)
    rows[:, 4] = centered.ravel()
    table = outdir / "silt.csv"
    _write_csv(
        table,
        ["path_id", "eps", "raw", "expectation", "centered"],
        rows,
        ["%d"] + ["%.17g"] * 4,
    )

    summary = np.column_stack(
        [
            eps,
            raw.mean(axis=0),
            expect,
            centered.mean(axis=0),
            centered.std(axis=0, ddof=1) / np.sqrt(m),
        ]
    )
    stable = outdir / "silt_summary.csv"
    _write_csv(
        stable,
        ["eps", "mean_raw", "expectation", "mean_centered", "stderr_centered"],
        summary,
        "%.17g",
    )
    return [table, stable]


def _cmd_holder_check(cfg: RunConfig, args, outdir: Path) -> list[Path]:
    params = cfg.model_params()
    cov = GridCovariance(params)
    shift = _resolve_shift(cfg.shift, params, cov)
    deltas = np.geomspace(cfg.delta_min, cfg.delta_max, cfg.n_deltas)
    report = holder_verify(
        params,
        shift,
        cfg.holder_epsilons,
        deltas,
        cfg.paths,
        cov=cov,
        threads=cfg.threads,
    )
    # operative rows at the smallest eps: pairs (u, 0)
    pairs = np.column_stack(
        [
            report.deltas,
            np.zeros_like(report.deltas),
            report.estimates[-1],
            report.stderrs[-1],
        ]
    )
    ptable = outdir / "holder_pairs.csv"
    _write_csv(ptable, ["u", "v", "sq_diff", "stderr"], pairs, "%.17g")

    rep = np.column_stack(
        [
            report.epsilons,
            report.slopes,
            report.slope_stderrs,
            report.intercepts,
            report.slopes - 1.645 * report.slope_stderrs,
            np.full_like(report.epsilons, report.target_exponent),
        ]
    )
    rtable = outdir / "holder_report.csv"
    _write_csv(
        rtable,
        ["eps", "slope", "slope_stderr", "intercept", "slope_lower95", "target_exponent"],
        rep,
        "%.17g",
    )
    return [ptable, rtable]


def _cmd_density_scan(cfg: RunConfig, args, outdir: Path) -> list[Path]:
    params = cfg.model_params()
    cov = GridCovariance(params)
    shift = _resolve_shift(cfg.shift, params, cov)
    values = sample_fbm_batch(params, cfg.paths, cov=cov, threads=cfg.threads)
    u_grid = np.linspace(0.0, cfg.u_max, cfg.n_u)
    scan = continuity_scan(
        shift,
        u_grid,
        values,
        cov.grid,
        cfg.density_eps,
        g=params.g,
        mode=cfg.mode,
        threads=cfg.threads,
    )
    table = outdir / "density_scan.csv"
    _write_csv(table, ["u", "a_min", "a_max", "max_jump"], scan.per_u_stats(), "%.17g")
    summary = outdir / "density_scan.json"
    _json_dump(
        summary,
        {
            "eps": cfg.density_eps,
            "mode": cfg.mode,
            "paths": int(values.shape[0]),
            "u_max": cfg.u_max,
            "n_u": cfg.n_u,
            "q95_max_jump": scan.q95,
        },
    )
    return [table, summary]


def _cmd_edwards_estimate(cfg: RunConfig, args, outdir: Path) -> list[Path]:
    params = cfg.model_params()
    cov = GridCovariance(params)
    ladder = LadderConfig(eps0=cfg.eps0, levels=cfg.levels)
    ens = edwards_ensemble(params, cfg.paths, ladder, cov=cov, threads=cfg.threads)

    end_sq = np.sum(ens.values[:, -1, :] ** 2, axis=1)
    end_1 = ens.values[:, -1, 0]
    means = {
        "lc": ens.expectation(ens.lc),
        "end_sq": ens.expectation(end_sq),
        "end_1": ens.expectation(end_1),
    }
    wtable = outdir / "edwards_weights.csv"
    rows = np.column_stack([np.arange(ens.m), ens.lc, ens.weights])
    _write_csv(wtable, ["path_id", "lc", "weight"], rows, ["%d", "%.17g", "%.17g"])

    summary = outdir / "edwards_summary.json"
    _json_dump(
        summary,
        {
            "paths": ens.m,
            "g": params.g,
            "eps": ens.eps,
            "ess": ens.ess,
            "mgf2": ens.mgf_diagnostic(),
            "weight_tail_q50_q90_q99_max": ens.weight_tail().tolist(),
            "means": {k: {"mean": v[0], "stderr": v[1]} for k, v in means.items()},
        },
    )
    return [wtable, summary]


def _cmd_quantize_run(cfg: RunConfig, args, outdir: Path) -> list[Path]:
    params = cfg.model_params()
    cov = GridCovariance(params)
    resume = load_checkpoint(args.resume) if getattr(args, "resume", None) else None
    result = run_mala(
        params,
        eps=cfg.mala_eps,
        n_iter=cfg.iterations,
        burn_in=cfg.burn_in,
        cov=cov,
        step=cfg.step,
        thin=cfg.thin,
        resume=resume,
    )
    lc = result.traces["lc"]
    coord = result.traces["coord"]
    logpi = result.traces["logpi"]
    n = lc.size
    first = result.state.iteration - result.n_iter + result.burn_in
    sample_idx = first + (np.arange(n) + 1) * result.thin
    rows = np.column_stack([sample_idx, lc, coord, logpi])
    header = ["iteration", "lc"] + [f"coord_{c + 1}" for c in range(params.d)] + ["logpi"]
    ttable = outdir / "mala_trace.csv"
    _write_csv(ttable, header, rows, ["%d"] + ["%.17g"] * (params.d + 2))

    ckpt = outdir / "mala_checkpoint.npz"
    save_checkpoint(ckpt, result.state)

    summary = outdir / "mala_summary.json"
    _json_dump(
        summary,
        {
            "eps": result.eps,
            "iterations": result.n_iter,
            "burn_in": result.burn_in,
            "thin": result.thin,
            "samples": int(n),
            "acceptance": result.acceptance_rate,
            "step": result.step,
            "resumed_from": str(args.resume) if getattr(args, "resume", None) else None,
            "means": {
                "lc": {"mean": float(lc.mean()), "stderr": batch_means_stderr(lc)},
                "logpi": {"mean": float(logpi.mean()), "stderr": batch_means_stderr(logpi)},
            },
        },
    )
    return [ttable, ckpt, summary]


# ---------------------------------------------------------------- selftest #


def _st_params() -> None:
    p = ModelParams(H=0.25, d=4, N=16)
    assert p.critical, "H=0.25, d=4 must sit on the critical line"
    assert not ModelParams(H=0.3, d=2, N=16).critical
    g = make_grid(p)
    assert g.n == 16 and abs(g.spacing - 1.0 / 15.0) < 1e-15
    try:
        ModelParams(H=1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("H outside (0,1) must be rejected")


def _st_fbm() -> None:
    assert abs(cov_h(0.5, 0.3, 0.7) - 0.3) < 1e-15, "H=1/2 covariance must be min(s,t)"
    p = ModelParams(N=48, seed=3)
    cov = GridCovariance(p)
    assert cov.factor_residual() < 1e-10
    a = sample_fbm_batch(p, 5, cov=cov)
    b = sample_fbm_batch(p, 5, cov=cov)
    assert np.array_equal(a, b), "resampling must be bit-identical"
    c = sample_fbm_batch(p, 3, cov=cov, stream_offset=2)
    assert np.array_equal(a[2:], c), "replica streams must be chunk-independent"


def _st_fbm_backends() -> None:
    p = ModelParams(H=0.7, d=1, N=33, seed=11)
    cov = GridCovariance(p)
    m = 512
    vals = sample_fbm_batch(p, m, cov=cov, method="davies-harte")
    var_end = float(np.var(vals[:, -1, 0]))
    rel = abs(var_end - 1.0)
    assert rel < 0.3, f"circulant endpoint variance off by {rel:.2f} (m={m})"


def _st_cameron_martin() -> None:
    p = ModelParams(N=48, seed=5)
    cov = GridCovariance(p)
    shift = builtin_shift("covcol:7", p, cov.grid, cov=cov)
    w = shift.w[:, 0]
    e7 = np.zeros(47)
    e7[6] = 1.0
    assert np.allclose(w, e7, atol=1e-9), "covariance-column shift must have unit weights"
    path = sample_fbm(p, cov=cov)
    assert gaussian_rn_density(shift, 0.0, path) == 1.0
    u, v = 0.4, -0.7
    lhs = gaussian_rn_density(shift, u + v, path)
    from .cameron_martin import ShiftedPath

    moved = ShiftedPath(base=path, shift=shift, u=-u)
    rhs = gaussian_rn_density(shift, u, path) * gaussian_rn_density(shift, v, moved)
    assert abs(lhs - rhs) <= 1e-10 * abs(lhs), "shift densities must compose"


def _st_silt() -> None:
    assert abs(heat_kernel(1.0, np.zeros(2)) - 1.0 / (2.0 * np.pi)) < 1e-15
    p = ModelParams(H=0.5, d=2, T=1.0, N=48, seed=7)
    closed = brownian_plane_expectation(1.0, 1.0)
    assert abs(closed - 0.0614806571) < 1e-9
    assert abs(silt_expectation(p, 1.0) - closed) < 1e-8
    cov = GridCovariance(p)
    m, eps = 128, 0.05
    values = sample_fbm_batch(p, m, cov=cov)
    raw = silt_raw_batch(values, cov.grid, [eps])[:, 0]
    centered = raw - silt_expectation_grid(p, cov.grid, eps)
    se = centered.std(ddof=1) / np.sqrt(m)
    assert abs(centered.mean()) < 5 * se, "centered SILT must have mean zero"


def _st_ladder() -> None:
    p = ModelParams(N=48, seed=9)
    cov = GridCovariance(p)
    path = sample_fbm(p, cov=cov)
    ladder = silt_limit(path, LadderConfig(eps0=0.08, levels=4))
    eps = ladder.epsilons
    assert np.allclose(eps[1:] / eps[:-1], 0.5), "ladder must halve eps"
    assert ladder.diffs.size == 3
    floor = 0.1 * cov.grid.spacing ** (2 * p.H)
    assert ladder.under_resolved == bool(eps[-1] < floor)


def _st_density() -> None:
    p = ModelParams(N=48, seed=13, g=0.1)
    cov = GridCovariance(p)
    shift = builtin_shift("linear", p, cov.grid, cov=cov)
    values = sample_fbm_batch(p, 8, cov=cov)
    at0 = density_process_batch(shift, 0.0, values, cov.grid, 0.05, g=p.g)
    assert np.all(at0 == 1.0), "density at u = 0 must be exactly 1"
    free = density_process_batch(shift, 0.6, values, cov.grid, 0.05, g=0.0)
    path = sample_fbm(p, cov=cov, rng=stream(p.seed, 0))
    ref = np.array(
        [
            gaussian_rn_density(shift, 0.6, type(path)(grid=path.grid, values=v, cov=cov))
            for v in values
        ]
    )
    assert np.allclose(free, ref, rtol=1e-13, atol=0.0), (
        "g = 0 density must reduce to the Gaussian one"
    )


def _st_moments() -> None:
    sig = sigma_matrix(0.5, 0.0, 1.0, 2.0, 3.0)
    assert sig.lam == 1.0 and sig.rho == 1.0 and sig.mu == 0.0
    assert sig.is_psd()
    res = gaussian_moment_integral(sig, 0.0, 0.5, 1)
    assert res.closed_form == 4.0
    assert abs(res.numeric - 4.0) < 1e-6, f"identity moment integral got {res.numeric}"


def _st_edwards() -> None:
    p = ModelParams(N=48, g=0.0, seed=17)
    cov = GridCovariance(p)
    ens = edwards_ensemble(p, 64, LadderConfig(eps0=0.08, levels=4), cov=cov)
    assert np.all(ens.weights == 1.0), "g = 0 weights must be exactly 1"
    assert ens.ess == 64.0, "g = 0 ess must equal the replica count"


def _st_dirichlet() -> None:
    p = ModelParams(N=48, g=0.05, seed=19)
    cov = GridCovariance(p)
    ens = edwards_ensemble(p, 64, LadderConfig(eps0=0.08, levels=4), cov=cov)
    basis = orthonormal_shift_basis(p, cov=cov, n_trunc=4)
    rng = stream(99, 0)
    f = random_cylinder(rng, cov.grid, p.d)
    h = random_cylinder(rng, cov.grid, p.d)
    fh = dirichlet_form(f, h, ens, basis)
    hf = dirichlet_form(h, f, ens, basis)
    assert fh == hf, "the form must be symmetric to the bit"
    ff = dirichlet_form(f, f, ens, basis)
    assert ff[0] >= 0.0, "the form must be nonnegative on the diagonal"


def _st_mala() -> None:
    p = ModelParams(N=32, g=0.2, seed=23)
    cov = GridCovariance(p)
    target = _Target(p, cov, eps=0.05)
    rng = stream(23, 1)
    x = np.zeros((p.N, p.d))
    x[1:] = cov.chol @ rng.standard_normal((p.N - 1, p.d))
    raw0, grad = target.raw_and_grad(x)
    step = 1e-6
    for _ in range(3):
        i = int(rng.integers(1, p.N))
        c = int(rng.integers(0, p.d))
        xp = x.copy()
        xp[i, c] += step
        xm = x.copy()
        xm[i, c] -= step
        fd = (target.raw_and_grad(xp)[0] - target.raw_and_grad(xm)[0]) / (2 * step)
        denom = max(abs(fd), 1e-12)
        assert abs(fd - grad[i - 1, c]) / denom < 1e-4, "SILT gradient must match FD"
    res = run_mala(p, eps=0.05, n_iter=600, burn_in=200, cov=cov, step=0.5, thin=5)
    assert 0.0 < res.acceptance_rate <= 1.0
    assert res.traces["lc"].size == (600 - 200) // 5


def _st_config() -> None:
    from .config import parse_config

    cfg = parse_config("[model]\n")
    assert (cfg.H, cfg.d, cfg.T, cfg.g, cfg.N) == (0.5, 2, 1.0, 0.1, 256)
    try:
        parse_config("[model]\npahts = 3\n")
    except ConfigError as exc:
        assert "pahts" in str(exc), "error must name the unknown key"
    else:
        raise AssertionError("unknown key must be rejected")
    text = dump_config(cfg)
    assert parse_config(text) == cfg, "canonical dump must round-trip"


def _st_io(tmpdir: Path) -> None:
    p = ModelParams(N=32, seed=29)
    cov = GridCovariance(p)
    path = sample_fbm(p, cov=cov)
    csv = tmpdir / "p.csv"
    write_path_csv(csv, path)
    back = read_path_csv(csv, p)
    assert np.array_equal(back.values, path.values), "CSV must round-trip exactly"
    bin_ = tmpdir / "p.fbmp"
    write_path_binary(bin_, path)
    back2 = read_path_binary(bin_, p)
    assert np.array_equal(back2.values, path.values), "binary must round-trip exactly"
    shift = builtin_shift("sine", p, cov.grid, cov=cov)
    scsv = tmpdir / "s.csv"
    write_shift_csv(scsv, shift)
    sback = read_shift_csv(scsv, p, cov=cov)
    assert np.max(np.abs(sback.k - shift.k)) < 1e-14


def _cmd_selftest(cfg: RunConfig, args, outdir: Path) -> int:
    import tempfile

    suites = [
        ("params", _st_params),
        ("fbm", _st_fbm),
        ("fbm-backends", _st_fbm_backends),
        ("cameron-martin", _st_cameron_martin),
        ("silt", _st_silt),
        ("silt-ladder", _st_ladder),
        ("density", _st_density),
        ("moments", _st_moments),
        ("edwards", _st_edwards),
        ("dirichlet", _st_dirichlet),
        ("mala", _st_mala),
        ("config", _st_config),
    ]
    failures = 0
    with tempfile.TemporaryDirectory() as tmp:
        suites.append(("io", lambda: _st_io(Path(tmp))))
        for name, fn in suites:
            try:
                fn()
            except Exception as exc:  # noqa: BLE001 - report and keep going
                failures += 1
                print(f"FAIL {name}: {exc}")
            else:
                print(f"ok   {name}")
    if failures:
        print(f"selftest: {failures} of {len(suites)} suites failed")
        return EXIT_SELFTEST
    print(f"selftest: all {len(suites)} suites passed")
    return EXIT_OK


# ------------------------------------------------------------------ driver #

_DISPATCH = {
    "sample-fbm": _cmd_sample_fbm,
    "silt": _cmd_silt,
    "holder-check": _cmd_holder_check,
    "density-scan": _cmd_density_scan,
    "edwards-estimate": _cmd_edwards_estimate,
    "quantize-run": _cmd_quantize_run,
}

# flag destination -> RunConfig attribute
_OVERRIDES = [
    ("hurst", "H"),
    ("dim", "d"),
    ("horizon", "T"),
    ("coupling", "g"),
    ("n", "N"),
    ("seed", "seed"),
    ("paths", "paths"),
    ("threads", "threads"),
    ("eps0", "eps0"),
    ("levels", "levels"),
    ("eps", None),  # routed per subcommand below
    ("u_max", "u_max"),
    ("n_u", "n_u"),
    ("mode", "mode"),
    ("shift", "shift"),
    ("step", "step"),
    ("iterations", "iterations"),
    ("burn_in", "burn_in"),
    ("thin", "thin"),
]


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="edwardsim",
        description="Fractional Brownian paths, self-intersection local time, "
        "and Edwards-measure reweighting on a grid.",
    )
    top.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = top.add_subparsers(dest="cmd", required=True)

    def common(p: argparse.ArgumentParser, model: bool = True) -> None:
        p.add_argument("--config", type=str, default=None, help="INI config file")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        if model:
            p.add_argument("--n", type=int, default=None, help="grid points N")
            p.add_argument("--hurst", type=float, default=None, help="Hurst index H")
            p.add_argument("--dim", type=int, default=None, help="spatial dimension d")
            p.add_argument("--horizon", type=float, default=None, help="time horizon T")
            p.add_argument("--coupling", type=float, default=None, help="coupling g")

    p = sub.add_parser("sample-fbm", help="draw paths and write CSV + packed binary")
    common(p)
    p.add_argument("--paths", type=int, default=None, help="paths to write (default 1)")

    p = sub.add_parser("silt", help="per-path eps-ladder table of the local time")
    common(p)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--eps0", type=float, default=None)
    p.add_argument("--levels", type=int, default=None)

    p = sub.add_parser("holder-check", help="L2 modulus of the centered local time")
    common(p)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--shift", type=str, default=None)

    p = sub.add_parser("density-scan", help="density process on a shift-magnitude grid")
    common(p)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--shift", type=str, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--u-max", dest="u_max", type=float, default=None)
    p.add_argument("--n-u", dest="n_u", type=int, default=None)
    p.add_argument("--mode", type=str, default=None, choices=("exact", "paper"))

    p = sub.add_parser("edwards-estimate", help="reweighted ensemble estimates")
    common(p)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--eps0", type=float, default=None)
    p.add_argument("--levels", type=int, default=None)

    p = sub.add_parser("quantize-run", help="path-space MALA chain for the reweighted law")
    common(p)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    p.add_argument("--thin", type=int, default=None)
    p.add_argument("--resume", type=str, default=None, help="checkpoint to continue")

    p = sub.add_parser("selftest", help="run the built-in invariant suites")
    common(p, model=False)

    return top


def _effective_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    for dest, attr in _OVERRIDES:
        val = getattr(args, dest, None)
        if val is None:
            continue
        if attr is None:  # --eps routes by subcommand
            attr = "mala_eps" if args.cmd == "quantize-run" else "density_eps"
        setattr(cfg, attr, val)
    if getattr(args, "out", None):
        cfg.outdir = args.out
    env = os.environ.get(OUTDIR_ENV)
    if env:
        cfg.outdir = env
    cfg.validate()
    return cfg


def _prepare_outdir(cfg: RunConfig, args, subcommand: str) -> Path:
    outdir = Path(cfg.outdir) / subcommand
    outdir.mkdir(parents=True, exist_ok=True)
    if args.config:
        shutil.copyfile(args.config, outdir / "config.ini")
    else:
        (outdir / "config.ini").write_text(dump_config(cfg), encoding="utf-8")
    (outdir / "config_effective.ini").write_text(dump_config(cfg), encoding="utf-8")
    return outdir


def _write_manifest(outdir: Path, subcommand: str, cfg: RunConfig, outputs: list[Path], wall: float) -> None:
    files = list(outputs) + [outdir / "config.ini", outdir / "config_effective.ini"]
    manifest = {
        "subcommand": subcommand,
        "version": __version__,
        "config_sha256": config_hash(cfg),
        "wall_clock_s": round(wall, 3),
        "outputs": {f.name: _sha256(f) for f in files},
    }
    _json_dump(outdir / "manifest.json", manifest)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _effective_config(args)
    except ConfigError as exc:
        print(f"edwardsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.cmd == "selftest":
        return _cmd_selftest(cfg, args, Path("."))

    try:
        outdir = _prepare_outdir(cfg, args, args.cmd)
        t0 = time.perf_counter()
        outputs = _DISPATCH[args.cmd](cfg, args, outdir)
        _write_manifest(outdir, args.cmd, cfg, outputs, time.perf_counter() - t0)
    except ConfigError as exc:
        print(f"edwardsim: {args.cmd}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"edwardsim: {args.cmd}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"edwardsim: {args.cmd}: wrote {len(outputs)} outputs to {outdir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
