"""Ensemble experiments comparing the particle system with its limit equations."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError
from .kmc import ObservableSpec, closed_form_drift, generator_apply, martingale_residual, run, trajectory_rng
from .lattice import KernelSpec, ModelParams, PairConfig, make_discrete_kernel, sample_initial
from .macro import MacroState, PdeParams, integrate_pde, pairings_over_time

SCHEMA_VERSION = 1


# -- test functions -----------------------------------------------------------

def test_function(name: str) -> Callable:
    """Basis element by name: ``"1"``, ``"cosK"`` or ``"sinK"`` with 1 <= K <= 4."""
    if name == "1":
        return lambda r: np.ones_like(np.asarray(r, dtype=float))
    for prefix, fn in (("cos", np.cos), ("sin", np.sin)):
        if name.startswith(prefix) and name[3:].isdigit() and 1 <= int(name[3:]) <= 4:
            k = int(name[3:])
            return lambda r, k=k, fn=fn: fn(2.0 * np.pi * k * np.asarray(r, dtype=float))
    raise ConfigError(f"unknown test function {name!r}")


BASIS = ("1",) + tuple(f"{p}{k}" for k in range(1, 5) for p in ("cos", "sin"))


def _sup_norm(g: Callable, n: int = 4096) -> float:
    return float(np.max(np.abs(np.broadcast_to(g(np.arange(n) / n), (n,)))))


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("KT_THREADS", "0")) or os.cpu_count() or 1
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    return threads


def ensemble_map(fn: Callable[[int], object], count: int, threads: int | None = 1) -> list:
    """``[fn(0), ..., fn(count - 1)]`` evaluated on a thread pool, in index order."""
    threads = resolve_threads(threads)
    if threads == 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def _fit_slope(gammas, values) -> float | None:
    x, y = np.log(np.asarray(gammas, dtype=float)), np.asarray(values, dtype=float)
    if len(x) < 2 or np.any(y <= 0):
        return None
    return float(np.polyfit(x, np.log(y), 1)[0])


def _stderr(samples: np.ndarray) -> float | None:
    if samples.size < 2:
        return None
    return float(np.std(samples, ddof=1) / math.sqrt(samples.size))


# -- hydrodynamic convergence ---------------------------------------------------

FIELDS = ("u1", "u2", "v")


@dataclass
class ConvergenceReport:
    lattice_sizes: list[int]
    ensemble_size: int
    seed: int
    test_functions: list[str]
    sample_times: list[float]
    # per field: one entry per N
    mean_error: dict[str, list[float]]
    stderr: dict[str, list[float | None]]
    slope: dict[str, float | None]
    monotone: dict[str, bool]
    # per field and test function, mean sup-discrepancy per N
    detail: dict[str, dict[str, list[float]]] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ConvergenceReport":
        return cls(**d)


def _named_tests(test_functions) -> dict[str, Callable]:
    if isinstance(test_functions, dict):
        return dict(test_functions)
    return {name: test_function(name) for name in test_functions}


def convergence_experiment(
    psi1: Callable,
    psi2: Callable,
    beta1: float,
    beta2: float,
    lam: float,
    kernel1: KernelSpec,
    kernel2: KernelSpec,
    lattice_sizes: Sequence[int],
    ensemble_size: int,
    horizon: float,
    test_functions,
    seed: int,
    threads: int | None = 1,
    grid_size: int = 512,
    dt: float = 0.01,
    sample_dt: float = 0.05,
) -> ConvergenceReport:
    """Sup-in-time discrepancy between particle pairings and PDE pairings.

    For each trajectory, the error of a field is the largest discrepancy over
    sample times and test functions.
    """
    sizes = [int(n) for n in lattice_sizes]
    if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ConfigError("lattice_sizes must be strictly increasing")
    if ensemble_size < 1:
        raise ConfigError("ensemble_size must be >= 1")
    tests = _named_tests(test_functions)
    n_steps = int(round(horizon / sample_dt))
    times = np.linspace(0.0, horizon, n_steps + 1)

    macro = integrate_pde(MacroState.from_profiles(psi1, psi2, grid_size),
                          PdeParams(beta1, beta2, lam, kernel1, kernel2), horizon, dt, times)
    reference = {name: pairings_over_time(macro, g) for name, g in tests.items()}

    observables = []
    for name, g in tests.items():
        for kind, fld in (("inner-product-line1", "u1"), ("inner-product-line2", "u2"), ("inner-product-eta", "v")):
            observables.append(ObservableSpec(kind, g, label=f"{fld}|{name}"))

    mean_error = {f: [] for f in FIELDS}
    stderr = {f: [] for f in FIELDS}
    detail = {f: {name: [] for name in tests} for f in FIELDS}
    for n in sizes:
        params = ModelParams(beta1, beta2, lam, n)
        kernels = (make_discrete_kernel(kernel1, n), make_discrete_kernel(kernel2, n))

        def one(r, n=n, params=params, kernels=kernels):
            rng = trajectory_rng(seed, n, r)
            c0 = sample_initial(psi1, psi2, params, kernels, rng)
            series = run(c0, params, kernels, horizon, times, observables, rng)
            errs = np.empty((3, len(tests)))
            for j, name in enumerate(tests):
                for i, fld in enumerate(FIELDS):
                    errs[i, j] = np.max(np.abs(series.values[f"{fld}|{name}"] - reference[name][:, i]))
            return errs

        errs = np.array(ensemble_map(one, ensemble_size, threads))  # (R, 3, n_tests)
        worst = errs.max(axis=2)
        for i, fld in enumerate(FIELDS):
            mean_error[fld].append(float(worst[:, i].mean()))
            stderr[fld].append(_stderr(worst[:, i]))
            for j, name in enumerate(tests):
                detail[fld][name].append(float(errs[:, i, j].mean()))

    gammas = [1.0 / n for n in sizes]
    slope = {f: _fit_slope(gammas, mean_error[f]) for f in FIELDS}
    monotone = {f: all(b < a for a, b in zip(mean_error[f], mean_error[f][1:])) for f in FIELDS}
    return ConvergenceReport(sizes, ensemble_size, seed, list(tests), times.tolist(),
                             mean_error, stderr, slope, monotone, detail)


# -- martingale variance --------------------------------------------------------

@dataclass
class VarianceReport:
    lattice_sizes: list[int]
    ensemble_size: int
    seed: int
    horizon: float
    g_sup_norm: float
    # keys "1", "2", "3": line 1, line 2, correlation field
    variance: dict[str, list[float]]
    mean: dict[str, list[float]]
    slope: dict[str, float | None]
    c_estimate: dict[str, float | None]
    c_spread: dict[str, float | None]
    violations: dict[str, list[int]]
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "VarianceReport":
        return cls(**d)


def variance_scaling_experiment(
    beta1: float,
    beta2: float,
    lam: float,
    kernel1: KernelSpec,
    kernel2: KernelSpec,
    lattice_sizes: Sequence[int],
    ensemble_size: int,
    horizon: float,
    g: Callable,
    seed: int,
    threads: int | None = 1,
    psi1: Callable = lambda r: 0.0 * r,
    psi2: Callable = lambda r: 0.0 * r,
    which: Sequence[int] = (1, 2, 3),
) -> VarianceReport:
    """Ensemble variance of the martingale residual M(T) as a function of N.

    ``c_estimate`` is the geometric mean of Var / (|G|_inf T gamma) over N,
    i.e. the least-squares constant at slope one; ``violations`` lists the N
    whose variance exceeds 1.5 times that bound.
    """
    if ensemble_size < 100:
        raise ConfigError("ensemble_size must be >= 100")
    sizes = [int(n) for n in lattice_sizes]
    g_sup = _sup_norm(g)
    times = np.array([0.0, horizon]) if horizon > 0 else np.array([0.0])
    obs = [ObservableSpec("magnetization-line1")]
    variance = {str(w): [] for w in which}
    mean = {str(w): [] for w in which}
    for n in sizes:
        params = ModelParams(beta1, beta2, lam, n)
        kernels = (make_discrete_kernel(kernel1, n), make_discrete_kernel(kernel2, n))

        def one(r, n=n, params=params, kernels=kernels):
            rng = trajectory_rng(seed, n, r)
            c0 = sample_initial(psi1, psi2, params, kernels, rng)
            series = run(c0, params, kernels, horizon, times, obs, rng, keep_log=True)
            return [martingale_residual(series, params, kernels, g, w)[-1] for w in which]

        m = np.array(ensemble_map(one, ensemble_size, threads))
        for j, w in enumerate(which):
            variance[str(w)].append(float(np.var(m[:, j], ddof=1)))
            mean[str(w)].append(float(np.mean(m[:, j])))

    gammas = [1.0 / n for n in sizes]
    slope, c_est, spread, viol = {}, {}, {}, {}
    for key, var in variance.items():
        slope[key] = _fit_slope(gammas, var)
        if g_sup > 0 and horizon > 0 and all(v > 0 for v in var):
            ratios = [v / (g_sup * horizon * gm) for v, gm in zip(var, gammas)]
            c = float(np.exp(np.mean(np.log(ratios))))
            c_est[key], spread[key] = c, float(max(ratios) / min(ratios))
            viol[key] = [n for n, rt in zip(sizes, ratios) if rt > 1.5 * c]
        else:
            c_est[key], spread[key], viol[key] = None, None, []
    return VarianceReport(sizes, ensemble_size, seed, horizon, g_sup, variance, mean, slope, c_est, spread, viol)


# -- propagation of chaos -------------------------------------------------------

@dataclass
class ChaosGapReport:
    n_sites: int
    ensemble_size: int
    seed: int
    sample_times: list[float]
    micro_gap: list[float]
    micro_stderr: list[float | None]
    macro_gap: list[float]
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ChaosGapReport":
        return cls(**d)

    def rows(self) -> list[dict]:
        return [{"t": t, "micro_gap": a, "micro_stderr": s, "macro_gap": b}
                for t, a, s, b in zip(self.sample_times, self.micro_gap, self.micro_stderr, self.macro_gap)]


def chaos_gap_experiment(
    psi1: Callable,
    psi2: Callable,
    beta1: float,
    beta2: float,
    lam: float,
    kernel1: KernelSpec,
    kernel2: KernelSpec,
    n_sites: int,
    ensemble_size: int,
    horizon: float,
    sample_times,
    seed: int,
    g: Callable | None = None,
    threads: int | None = 1,
    grid_size: int = 256,
    dt: float = 0.01,
) -> ChaosGapReport:
    """E<eta, G> - E<sigma1, G> E<sigma2, G> against the PDE pairing <v - u1 u2, G>.

    The standard error of the microscopic gap uses the delta method on the
    three ensemble means.
    """
    g = g or test_function("1")
    times = np.asarray(sample_times, dtype=float)
    params = ModelParams(beta1, beta2, lam, n_sites)
    kernels = (make_discrete_kernel(kernel1, n_sites), make_discrete_kernel(kernel2, n_sites))
    obs = [ObservableSpec("inner-product-line1", g), ObservableSpec("inner-product-line2", g),
           ObservableSpec("inner-product-eta", g)]

    def one(r):
        rng = trajectory_rng(seed, n_sites, r)
        c0 = sample_initial(psi1, psi2, params, kernels, rng)
        s = run(c0, params, kernels, horizon, times, obs, rng)
        return np.stack([s.values[o.name] for o in obs])

    vals = np.array(ensemble_map(one, ensemble_size, threads))  # (R, 3, T)
    a, b, e = vals[:, 0], vals[:, 1], vals[:, 2]
    ma, mb, me = a.mean(0), b.mean(0), e.mean(0)
    gap = me - ma * mb
    influence = e - mb * a - ma * b
    if ensemble_size > 1:
        se = [float(x) for x in influence.std(axis=0, ddof=1) / math.sqrt(ensemble_size)]
    else:
        se = [None] * times.size

    macro = integrate_pde(MacroState.from_profiles(psi1, psi2, grid_size),
                          PdeParams(beta1, beta2, lam, kernel1, kernel2), horizon, dt, times)
    r = np.arange(grid_size) / grid_size
    gv = np.broadcast_to(np.asarray(g(r), dtype=float), (grid_size,))
    macro_gap = [float(np.dot(s.v - s.u1 * s.u2, gv)) / grid_size for s in macro]
    return ChaosGapReport(n_sites, ensemble_size, seed, times.tolist(), gap.tolist(), se, macro_gap)


# -- generator identity fuzzing -------------------------------------------------

@dataclass
class FuzzReport:
    trials: int
    max_n: int
    seed: int
    passed: bool
    max_discrepancy: float
    first_failure: int | None
    failures: list[dict]
    tolerance: float
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FuzzReport":
        return cls(**d)


def random_kernel_spec(rng) -> KernelSpec:
    shape = ("uniform", "wrapped-gaussian", "top-hat", "raised-cosine")[int(rng.integers(4))]
    if shape == "uniform":
        return KernelSpec()
    if shape == "wrapped-gaussian":
        return KernelSpec(shape, float(rng.uniform(0.02, 0.4)))
    return KernelSpec(shape, float(rng.uniform(0.05, 0.5)))


def fuzz_instance(rng, max_n: int) -> dict:
    n = int(rng.integers(1, max_n + 1))
    return {
        "n_sites": n,
        "beta1": float(rng.uniform(0.05, 3.0)),
        "beta2": float(rng.uniform(0.05, 3.0)),
        "lam": float(rng.uniform(0.0, 2.0)),
        "kernel1": random_kernel_spec(rng).to_dict(),
        "kernel2": random_kernel_spec(rng).to_dict(),
        "s1": rng.choice(np.array([-1, 1]), n).tolist(),
        "s2": rng.choice(np.array([-1, 1]), n).tolist(),
        "test_function": BASIS[int(rng.integers(len(BASIS)))],
        "which": int(rng.integers(1, 4)),
    }


def check_instance(inst: dict, drift=closed_form_drift) -> tuple[float, float, float]:
    """(closed form, brute force, |difference|) for one fuzz instance."""
    params = ModelParams(inst["beta1"], inst["beta2"], inst["lam"], inst["n_sites"])
    kernels = tuple(make_discrete_kernel(KernelSpec(**inst[k]), inst["n_sites"]) for k in ("kernel1", "kernel2"))
    cfg = PairConfig.from_spins(inst["s1"], inst["s2"], kernels)
    g = test_function(inst["test_function"])
    closed = drift(cfg, params, kernels, g, inst["which"])
    closed = getattr(closed, "value", closed)
    brute = generator_apply(cfg, params, kernels, g, inst["which"])
    return closed, brute, abs(closed - brute)


def drift_identity_fuzz(trials: int, max_n: int, seed: int, drift=closed_form_drift,
                        tolerance: float = 1e-11, max_dumps: int = 10) -> FuzzReport:
    """Compare the closed-form drift against brute-force generator sums.

    ``drift`` can be swapped for a mutant to check that the fuzzer detects it.
    Failing instances are dumped verbatim (up to ``max_dumps``) for replay.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    if max_n < 1:
        raise ConfigError("max_n must be >= 1")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    worst, first, dumps = 0.0, None, []
    for t in range(trials):
        inst = fuzz_instance(rng, max_n)
        closed, brute, diff = check_instance(inst, drift)
        worst = max(worst, diff)
        if not diff < tolerance:
            if first is None:
                first = t
            if len(dumps) < max_dumps:
                dumps.append({"trial": t, "instance": inst, "closed_form": closed, "brute_force": brute})
    return FuzzReport(trials, max_n, seed, first is None, worst, first, dumps, tolerance)
