"""Command-line front end.

Exit codes: 0 success, 1 validation or usage error, 2 runtime or numerical
error, 3 a check subcommand ran but its acceptance condition failed.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, config_from_dict, parse_config, parse_observable, profile_function, validate
from .errors import ConfigError, InstabilityError
from .harness import (
    chaos_gap_experiment,
    convergence_experiment,
    drift_identity_fuzz,
    ensemble_map,
    resolve_threads,
    test_function,
    variance_scaling_experiment,
)
from .kmc import run, trajectory_rng
from .lattice import ModelParams, make_discrete_kernel, sample_initial
from .macro import MacroState, MeanFieldState, PdeParams, eval_macro_observable, integrate_ode, integrate_pde
from .output import meta_block, write_csv, write_json
from .stability import dispersion, regime_scan, scan_box

log = logging.getLogger("kacturing")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3
STOCHASTIC = ("simulate", "converge", "variance", "chaos-gap", "drift-check")
SUBCOMMANDS = ("simulate", "pde", "ode", "dispersion", "scan", "converge", "variance", "chaos-gap", "drift-check")


def _times(horizon: float, dt: float) -> np.ndarray:
    n = int(np.floor(horizon / dt + 1e-9))
    ts = np.minimum(np.arange(n + 1) * dt, horizon)
    if horizon - ts[-1] > 1e-12:
        ts = np.append(ts, horizon)
    return ts


class Context:
    def __init__(self, name: str, cfg: RunConfig, threads: int):
        self.name = name
        self.cfg = cfg
        self.threads = threads
        self.outdir = Path(cfg.output.directory)
        self.meta = meta_block(name, cfg.digest(), cfg.microscopic.seed if name in STOCHASTIC else None)

    def emit(self, stem: str, columns, rows, payload: dict):
        rows = list(rows)
        if "csv" in self.cfg.output.formats:
            write_csv(self.outdir / f"{stem}.csv", columns, rows, self.meta)
        if "json" in self.cfg.output.formats:
            write_json(self.outdir / f"{stem}.json", payload, self.meta)


def _kernels(cfg: RunConfig, n: int):
    return make_discrete_kernel(cfg.kernel1, n), make_discrete_kernel(cfg.kernel2, n)


def _psi(cfg: RunConfig):
    return profile_function(cfg.initial.psi1), profile_function(cfg.initial.psi2)


def cmd_simulate(ctx: Context, args) -> int:
    cfg = ctx.cfg
    mi, m = cfg.microscopic, cfg.model
    params = ModelParams(m.beta1, m.beta2, m.lam, mi.n_sites)
    kernels = _kernels(cfg, mi.n_sites)
    observables = [parse_observable(o) for o in cfg.observables]
    for o in observables:
        o.validate(mi.n_sites)
    psi1, psi2 = _psi(cfg)
    times = _times(mi.horizon, mi.sample_dt)

    def one(r):
        rng = trajectory_rng(mi.seed, r)
        c0 = sample_initial(psi1, psi2, params, kernels, rng)
        return run(c0, params, kernels, mi.horizon, times, observables, rng, seed=mi.seed)

    series = ensemble_map(one, mi.ensemble_size, ctx.threads)
    names = [o.name for o in observables]
    rows = [[r, float(t)] + [float(s.values[nm][i]) for nm in names]
            for r, s in enumerate(series) for i, t in enumerate(s.sample_times)]
    payload = {
        "n_sites": mi.n_sites, "horizon": mi.horizon, "sample_times": times.tolist(),
        "trajectories": [{"index": r, "event_count": s.event_count, "proposal_count": s.proposal_count,
                          "values": {nm: s.values[nm].tolist() for nm in names}} for r, s in enumerate(series)],
    }
    ctx.emit("simulate", ["trajectory", "time"] + names, rows, payload)
    return EXIT_OK


def _pde_params(cfg: RunConfig) -> PdeParams:
    m = cfg.model
    return PdeParams(m.beta1, m.beta2, m.lam, cfg.kernel1, cfg.kernel2, cfg.macroscopic.v_equation_variant)


def cmd_pde(ctx: Context, args) -> int:
    cfg = ctx.cfg
    ma = cfg.macroscopic
    psi1, psi2 = _psi(cfg)
    times = _times(ma.horizon, ma.sample_dt)
    traj = integrate_pde(MacroState.from_profiles(psi1, psi2, ma.grid_size), _pde_params(cfg), ma.horizon, ma.dt, times)
    tests = cfg.experiment.test_functions
    columns = ["time"] + [f"{f}|{g}" for g in tests for f in ("u1", "u2", "v")]
    rows = []
    for s in traj:
        row = [float(s.time)]
        for g in tests:
            row.extend(eval_macro_observable(s, test_function(g)))
        rows.append(row)
    final = traj[-1]
    payload = {"grid_size": ma.grid_size, "columns": columns, "rows": rows,
               "final": {"time": final.time, "u1": final.u1.tolist(), "u2": final.u2.tolist(), "v": final.v.tolist()}}
    ctx.emit("pde", columns, rows, payload)
    return EXIT_OK


def cmd_ode(ctx: Context, args) -> int:
    cfg = ctx.cfg
    ma, m = cfg.macroscopic, cfg.model
    psi1, psi2 = _psi(cfg)
    r = np.arange(4096) / 4096
    m0 = MeanFieldState(float(np.mean(psi1(r))), float(np.mean(psi2(r))))
    traj = integrate_ode(m0, m.beta1, m.beta2, m.lam, ma.horizon, ma.dt, _times(ma.horizon, ma.sample_dt))
    rows = [[s.time, s.m1, s.m2] for s in traj]
    ctx.emit("ode", ["time", "m1", "m2"], rows, {"rows": rows})
    return EXIT_OK


def cmd_dispersion(ctx: Context, args) -> int:
    cfg = ctx.cfg
    m = cfg.model
    rep = dispersion(m.beta1, m.beta2, m.lam, cfg.kernel1, cfg.kernel2, cfg.experiment.k_max)
    cols = ["k", "re_lambda1", "im_lambda1", "re_lambda2", "im_lambda2"]
    ctx.emit("dispersion", cols, [[row[c] for c in cols] for row in rep.rows()], rep.to_dict())
    print(f"turing={str(rep.turing).lower()} max_growth={rep.max_growth:.6g} unstable={rep.unstable_modes}")
    return EXIT_OK


def cmd_scan(ctx: Context, args) -> int:
    sc = ctx.cfg.scan
    axes = [np.linspace(lo, hi, int(n)) for lo, hi, n in (sc.beta1, sc.beta2, sc.lam)]
    rows = regime_scan(scan_box(axes[0], axes[1], axes[2], sc.scale1, sc.scale2), ctx.cfg.experiment.k_max)
    cols = list(rows[0].to_dict())
    hits = [r for r in rows if r.turing]
    best = max(hits, key=lambda r: r.growth_nonzero).to_dict() if hits else None
    ctx.emit("scan", cols, [list(r.to_dict().values()) for r in rows],
             {"points": len(rows), "turing_points": len(hits), "best": best, "rows": [r.to_dict() for r in rows]})
    print(f"points={len(rows)} turing={len(hits)}")
    return EXIT_OK


def cmd_converge(ctx: Context, args) -> int:
    cfg = ctx.cfg
    m, mi, ma, ex = cfg.model, cfg.microscopic, cfg.macroscopic, cfg.experiment
    psi1, psi2 = _psi(cfg)
    rep = convergence_experiment(psi1, psi2, m.beta1, m.beta2, m.lam, cfg.kernel1, cfg.kernel2, ex.lattice_sizes,
                                 mi.ensemble_size, mi.horizon, ex.test_functions, mi.seed, ctx.threads,
                                 grid_size=ma.grid_size, dt=ma.dt, sample_dt=mi.sample_dt)
    rows = [[n, f, rep.mean_error[f][i], rep.stderr[f][i]] for f in rep.mean_error for i, n in enumerate(rep.lattice_sizes)]
    ctx.emit("converge", ["n_sites", "field", "mean_error", "stderr"], rows, rep.to_dict())
    ok = all(rep.monotone.values()) and all(s is not None and s > ex.min_slope for s in rep.slope.values())
    print(f"monotone={rep.monotone} slope={rep.slope} pass={ok}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_variance(ctx: Context, args) -> int:
    cfg = ctx.cfg
    m, mi, ex = cfg.model, cfg.microscopic, cfg.experiment
    rep = variance_scaling_experiment(m.beta1, m.beta2, m.lam, cfg.kernel1, cfg.kernel2, ex.lattice_sizes,
                                      mi.ensemble_size, mi.horizon, test_function(ex.variance_test_function),
                                      mi.seed, ctx.threads)
    rows = [[n, w, rep.variance[w][i], rep.mean[w][i]] for w in rep.variance for i, n in enumerate(rep.lattice_sizes)]
    ctx.emit("variance", ["n_sites", "which", "variance", "mean"], rows, rep.to_dict())
    ok = all(s is not None and 0.7 <= s <= 1.3 for s in rep.slope.values()) and \
        all(c is not None and c <= 3.0 for c in rep.c_spread.values())
    print(f"slope={rep.slope} c_spread={rep.c_spread} pass={ok}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_chaos_gap(ctx: Context, args) -> int:
    cfg = ctx.cfg
    m, mi, ma = cfg.model, cfg.microscopic, cfg.macroscopic
    psi1, psi2 = _psi(cfg)
    g = test_function(cfg.experiment.test_functions[0])
    rep = chaos_gap_experiment(psi1, psi2, m.beta1, m.beta2, m.lam, cfg.kernel1, cfg.kernel2, mi.n_sites,
                               mi.ensemble_size, mi.horizon, _times(mi.horizon, mi.sample_dt), mi.seed, g,
                               ctx.threads, grid_size=ma.grid_size, dt=ma.dt)
    rows = [[r["t"], r["micro_gap"], r["micro_stderr"], r["macro_gap"]] for r in rep.rows()]
    ctx.emit("chaos_gap", ["t", "micro_gap", "micro_stderr", "macro_gap"], rows, rep.to_dict())
    ok = all(se is not None and abs(a - b) <= 3.0 * se for a, se, b in zip(rep.micro_gap, rep.micro_stderr, rep.macro_gap))
    print(f"tracks_pde={ok}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_drift_check(ctx: Context, args) -> int:
    ex = ctx.cfg.experiment
    rep = drift_identity_fuzz(ex.trials, ex.max_n, ctx.cfg.microscopic.seed)
    rows = [[d["trial"], d["closed_form"], d["brute_force"]] for d in rep.failures]
    ctx.emit("drift_check", ["trial", "closed_form", "brute_force"], rows, rep.to_dict())
    print(f"trials={rep.trials} max_discrepancy={rep.max_discrepancy:.3g} pass={rep.passed}")
    return EXIT_OK if rep.passed else EXIT_CHECK


HANDLERS = {
    "simulate": cmd_simulate, "pde": cmd_pde, "ode": cmd_ode, "dispersion": cmd_dispersion, "scan": cmd_scan,
    "converge": cmd_converge, "variance": cmd_variance, "chaos-gap": cmd_chaos_gap, "drift-check": cmd_drift_check,
}

HELP = {
    "simulate": "ensemble of particle trajectories",
    "pde": "integrate the nonlocal limit equations",
    "ode": "integrate the mean-field equations",
    "dispersion": "linear stability per Fourier mode",
    "scan": "Turing-regime scan over a parameter box",
    "converge": "particle vs PDE convergence experiment",
    "variance": "martingale variance scaling experiment",
    "chaos-gap": "correlation gap experiment",
    "drift-check": "fuzz the closed-form drift against brute force",
}


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="kacturing", description=__doc__.splitlines()[0], formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"kacturing {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=HELP[name], description=HELP[name], formatter_class=fmt)
        p.add_argument("--config", type=Path, default=None, help="TOML run configuration")
        p.add_argument("--output-dir", default=None, help="override output.directory")
        p.add_argument("--formats", default=None, help="comma-separated subset of csv,json")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (env KT_THREADS; default: available CPUs)")
        p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
        if name in STOCHASTIC:
            p.add_argument("--seed", type=int, default=None, help="master seed (required unless set in config)")
        if name in ("simulate", "chaos-gap"):
            p.add_argument("--n-sites", type=int, default=None, help="override microscopic.n_sites")
            p.add_argument("--ensemble-size", type=int, default=None, help="override microscopic.ensemble_size")
        if name in ("simulate", "converge", "variance", "chaos-gap"):
            p.add_argument("--horizon", type=float, default=None, help="override microscopic.horizon")
        if name in ("converge", "variance"):
            p.add_argument("--lattice-sizes", default=None, help="comma-separated N list")
            p.add_argument("--ensemble-size", type=int, default=None, help="override microscopic.ensemble_size")
        if name in ("pde", "ode"):
            p.add_argument("--horizon", type=float, default=None, help="override macroscopic.horizon")
            p.add_argument("--dt", type=float, default=None, help="override macroscopic.dt")
        if name in ("dispersion", "scan"):
            p.add_argument("--k-max", type=int, default=None, help="override experiment.k_max")
        if name == "drift-check":
            p.add_argument("--trials", type=int, default=None, help="override experiment.trials")
            p.add_argument("--max-n", type=int, default=None, help="override experiment.max_n")
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    def opt(name):
        return getattr(args, name, None)

    if opt("output_dir") is not None:
        cfg.output.directory = args.output_dir
    if opt("formats") is not None:
        cfg.output.formats = [f.strip() for f in args.formats.split(",") if f.strip()]
    if opt("seed") is not None:
        cfg.microscopic.seed = args.seed
    if opt("n_sites") is not None:
        cfg.microscopic.n_sites = args.n_sites
    if opt("ensemble_size") is not None:
        cfg.microscopic.ensemble_size = args.ensemble_size
    if opt("horizon") is not None:
        if args.command in ("pde", "ode"):
            cfg.macroscopic.horizon = args.horizon
        else:
            cfg.microscopic.horizon = args.horizon
    if opt("dt") is not None:
        cfg.macroscopic.dt = args.dt
    if opt("lattice_sizes") is not None:
        try:
            cfg.experiment.lattice_sizes = [int(x) for x in args.lattice_sizes.split(",")]
        except ValueError:
            raise ConfigError("--lattice-sizes must be comma-separated integers") from None
    if opt("k_max") is not None:
        cfg.experiment.k_max = args.k_max
    if opt("trials") is not None:
        cfg.experiment.trials = args.trials
    if opt("max_n") is not None:
        cfg.experiment.max_n = args.max_n
    return validate(cfg)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config) if args.config else config_from_dict({})
        cfg = _apply_overrides(cfg, args)
        if args.command in STOCHASTIC and cfg.microscopic.seed is None:
            raise ConfigError(f"{args.command} needs a seed (--seed or microscopic.seed)")
        threads = resolve_threads(args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    ctx = Context(args.command, cfg, threads)
    try:
        return HANDLERS[args.command](ctx, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (InstabilityError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
