"""Exact continuous-time simulation by uniformization, and generator diagnostics.

Every (line, site) pair carries a proposal clock of rate one; since all flip
rates lie in (0, 1), accepting a proposal with probability equal to the flip
rate realizes the Glauber process exactly.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _jit
from .errors import ConfigError
from .lattice import (
    DiscreteKernel,
    ModelParams,
    PairConfig,
    convolve_field,
    eval_test_function,
    flip_rate,
)

OBSERVABLE_KINDS = (
    "inner-product-line1",
    "inner-product-line2",
    "inner-product-eta",
    "magnetization-line1",
    "magnetization-line2",
    "fourier-mode",
)


def trajectory_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent stream for trajectory ``key`` under ``master_seed``."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class ObservableSpec:
    kind: str
    test_function: Callable | None = None
    line: int | None = None
    k: int | None = None
    label: str | None = None

    def __post_init__(self):
        if self.kind not in OBSERVABLE_KINDS:
            raise ConfigError(f"unknown observable kind {self.kind!r}")
        if self.kind.startswith("inner-product") and self.test_function is None:
            raise ConfigError(f"{self.kind} needs a test function")
        if self.kind == "fourier-mode" and (self.line not in (1, 2) or self.k is None or self.k < 0):
            raise ConfigError("fourier-mode needs line in {1, 2} and k >= 0")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.kind == "fourier-mode":
            return f"fourier-line{self.line}-k{self.k}"
        return self.kind

    def validate(self, n_sites: int) -> None:
        if self.kind == "fourier-mode" and not self.k < n_sites / 2:
            raise ConfigError(f"fourier-mode k={self.k} needs k < N/2 = {n_sites / 2}")

    def evaluator(self, n_sites: int) -> Callable[[PairConfig], float]:
        self.validate(n_sites)
        n = n_sites
        if self.kind == "fourier-mode":
            phase = np.exp(-2j * np.pi * self.k * np.arange(n) / n)
            attr = "s1" if self.line == 1 else "s2"
            return lambda c: float(abs(np.dot(getattr(c, attr), phase)) / n)
        if self.kind.startswith("magnetization"):
            attr = "s1" if self.kind.endswith("1") else "s2"
            return lambda c: float(np.sum(getattr(c, attr), dtype=np.int64)) / n
        g = eval_test_function(self.test_function, n)
        if self.kind == "inner-product-line1":
            return lambda c: float(np.dot(c.s1, g)) / n
        if self.kind == "inner-product-line2":
            return lambda c: float(np.dot(c.s2, g)) / n
        return lambda c: float(np.dot(c.s1 * c.s2, g)) / n


@dataclass
class EventLog:
    """Initial state plus accepted flips; enough to replay a trajectory."""

    initial: PairConfig
    times: np.ndarray
    codes: np.ndarray  # line 1 site x -> x, line 2 site x -> N + x


@dataclass
class TrajectorySeries:
    sample_times: np.ndarray
    values: dict[str, np.ndarray]
    event_count: int
    proposal_count: int
    seed: int | None = None
    final: PairConfig | None = field(default=None, repr=False)
    log: EventLog | None = field(default=None, repr=False)


def step(config: PairConfig, params: ModelParams, kernels, rng) -> tuple[float, tuple[int, int] | None]:
    """One proposal of the uniformized chain, applied to ``config`` in place."""
    n = params.n_sites
    elapsed = rng.exponential(1.0 / (2 * n))
    code = int(rng.integers(0, 2 * n))
    line, site = (1, code) if code < n else (2, code - n)
    if rng.random() < flip_rate(line, site, config, params):
        config.flip(line, site, kernels)
        return elapsed, (line, site)
    return elapsed, None


_BATCH_MIN, _BATCH_MAX = 1024, 1 << 16


def run(
    config0: PairConfig,
    params: ModelParams,
    kernels: Sequence[DiscreteKernel],
    horizon: float,
    sample_times,
    observables: Sequence[ObservableSpec],
    rng: np.random.Generator,
    keep_log: bool = False,
    seed: int | None = None,
) -> TrajectorySeries:
    """Simulate on [0, horizon] and record observables at ``sample_times``.

    The value at time t uses the state after every event with time <= t.
    ``config0`` is not modified.
    """
    if not observables:
        raise ConfigError("at least one observable is required")
    if horizon < 0:
        raise ConfigError("horizon must be >= 0")
    ts = np.asarray(sample_times, dtype=float)
    if ts.ndim != 1 or ts.size == 0 or np.any(np.diff(ts) <= 0) or ts[0] < 0 or ts[-1] > horizon:
        raise ConfigError("sample_times must be strictly increasing within [0, horizon]")
    n = params.n_sites
    evals = [obs.evaluator(n) for obs in observables]
    k1, k2 = kernels
    cfg = config0.copy()
    initial = config0.copy() if keep_log else None

    scale = 1.0 / (2 * n)
    batch = int(min(max(2 * n * horizon * 1.1 + 64, _BATCH_MIN), _BATCH_MAX))

    def draw():
        return rng.exponential(scale, batch), rng.integers(0, 2 * n, batch), rng.random(batch)

    clock = rng.exponential(scale)
    waits, picks, us = draw()
    pos = 0
    cap = int(2 * n * horizon * 0.6 + 256) if keep_log else 0
    ev_t = np.empty(cap)
    ev_code = np.empty(cap, dtype=np.int64)
    n_ev = 0
    proposals = 0
    values = {obs.name: np.empty(ts.size) for obs in observables}
    for i, t in enumerate(ts):
        while True:
            clock, pos, n_ev, status = _jit.advance(
                cfg.s1, cfg.s2, cfg.h1, cfg.h2, k1.weights, k1.support, k2.weights, k2.support,
                params.beta1, params.beta2, params.lam, clock, t, waits, picks, us, pos,
                keep_log, ev_t, ev_code, n_ev,
            )
            if status == _jit.DONE:
                break
            if status == _jit.NEED_RANDOMS:
                proposals += pos
                waits, picks, us = draw()
                pos = 0
            else:
                cap *= 2
                ev_t = np.resize(ev_t, cap)
                ev_code = np.resize(ev_code, cap)
        for obs, f in zip(observables, evals):
            values[obs.name][i] = f(cfg)
    proposals += pos
    log = EventLog(initial, ev_t[:n_ev].copy(), ev_code[:n_ev].copy()) if keep_log else None
    return TrajectorySeries(ts.copy(), values, n_ev, proposals, seed, cfg, log)


def _pairing(config: PairConfig, g: np.ndarray, which: int) -> float:
    n = config.n_sites
    if which == 1:
        return float(np.dot(config.s1, g)) / n
    if which == 2:
        return float(np.dot(config.s2, g)) / n
    if which == 3:
        return float(np.dot(config.s1 * config.s2, g)) / n
    raise ValueError("which must be 1, 2 or 3")


def generator_apply(config: PairConfig, params: ModelParams, kernels, g: Callable, which: int) -> float:
    """Brute-force generator on a linear observable: sum over all 2N flips.

    Rates are computed from freshly recomputed convolution fields so the
    cached fields of ``config`` play no role.
    """
    n = params.n_sites
    gv = eval_test_function(g, n)
    base = PairConfig(config.s1.copy(), config.s2.copy(),
                      convolve_field(config.s1, kernels[0]), convolve_field(config.s2, kernels[1]))
    before = _pairing(base, gv, which)
    total = 0.0
    for line in (1, 2):
        for x in range(n):
            rate = flip_rate(line, x, base, params)
            flipped = PairConfig(base.s1.copy(), base.s2.copy(), base.h1, base.h2)
            (flipped.s1 if line == 1 else flipped.s2)[x] *= -1
            total += rate * (_pairing(flipped, gv, which) - before)
    return total


@dataclass(frozen=True)
class DriftValue:
    which: int
    value: float


def closed_form_drift(config: PairConfig, params: ModelParams, kernels, g: Callable, which: int) -> DriftValue:
    """Closed form of the generator on the line pairings and on the correlation field."""
    n = params.n_sites
    if which not in (1, 2, 3):
        raise ValueError("which must be 1, 2 or 3")
    gv = eval_test_function(g, n)
    b1, b2, lam = params.beta1, params.beta2, params.lam
    s1 = config.s1.astype(float)
    s2 = config.s2.astype(float)
    p1, m1 = np.tanh(b1 * config.h1 + b1 * lam), np.tanh(b1 * config.h1 - b1 * lam)
    p2, m2 = np.tanh(b2 * config.h2 + b2 * lam), np.tanh(b2 * config.h2 - b2 * lam)
    if which == 1:
        terms = -s1 + 0.5 * (p1 + m1) + 0.5 * s2 * (p1 - m1)
    elif which == 2:
        terms = -s2 + 0.5 * (p2 + m2) - 0.5 * s1 * (p2 - m2)
    else:
        terms = (-2.0 * s1 * s2 + 0.5 * (p1 - m1) - 0.5 * (p2 - m2)
                 + 0.5 * s1 * (p2 + m2) + 0.5 * s2 * (p1 + m1))
    return DriftValue(which, float(np.dot(terms, gv)) / n)


def martingale_residual(series: TrajectorySeries, params: ModelParams, kernels, g: Callable, which: int) -> np.ndarray:
    """Observable minus its integrated drift, at each sample time of ``series``.

    The drift is constant between events, so the time integral is an exact
    sum over inter-event intervals.
    """
    if series.log is None:
        raise ConfigError("trajectory was recorded without an event log")
    if which not in (1, 2, 3):
        raise ValueError("which must be 1, 2 or 3")
    k1, k2 = kernels
    c = series.log.initial.copy()
    gv = eval_test_function(g, params.n_sites)
    return _jit.martingale_replay(
        c.s1, c.s2, c.h1, c.h2, k1.weights, k1.support, k2.weights, k2.support,
        params.beta1, params.beta2, params.lam, gv, which,
        series.log.times, series.log.codes, series.sample_times,
    )


def encode_state(s1, s2) -> int:
    """Index of a pair configuration in ``enumerate_states`` order."""
    n = len(s1)
    bits = [(1 if v > 0 else 0) for v in list(s1) + list(s2)]
    return sum(b << (2 * n - 1 - i) for i, b in enumerate(bits))


def enumerate_states(n_sites: int):
    for bits in itertools.product((-1, 1), repeat=2 * n_sites):
        yield np.array(bits[:n_sites], dtype=np.int8), np.array(bits[n_sites:], dtype=np.int8)


def generator_matrix(params: ModelParams, kernels) -> np.ndarray:
    """Dense Q-matrix over all 4^N pair configurations (small N only)."""
    n = params.n_sites
    if n > 6:
        raise ConfigError("explicit generator matrix limited to N <= 6")
    size = 4 ** n
    q = np.zeros((size, size))
    for a, (s1, s2) in enumerate(enumerate_states(n)):
        cfg = PairConfig.from_spins(s1, s2, kernels)
        for line in (1, 2):
            for x in range(n):
                t1, t2 = s1.copy(), s2.copy()
                (t1 if line == 1 else t2)[x] *= -1
                q[a, encode_state(t1, t2)] += flip_rate(line, x, cfg, params)
    q[np.diag_indices(size)] = -q.sum(axis=1)
    return q


def stationary_distribution(q: np.ndarray) -> np.ndarray:
    """Normalized null vector of ``q.T``."""
    size = q.shape[0]
    a = np.vstack([q.T, np.ones(size)])
    b = np.zeros(size + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    return pi
