"""Limiting nonlocal system for (u1, u2, v) on a periodic grid, and its
mean-field reduction.

The v-equation defaults to the form obtained from the generator acting on the
correlation field. ``v_equation="alternative-sign"`` flips the sign inside
the second tanh bracket, for comparison only.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DomainError, InstabilityError
from .lattice import KernelSpec, make_discrete_kernel

V_VARIANTS = ("generator-consistent", "alternative-sign")
INVARIANT_TOL = 1e-9


@dataclass(frozen=True)
class MacroState:
    u1: np.ndarray
    u2: np.ndarray
    v: np.ndarray
    time: float = 0.0

    @property
    def grid_size(self) -> int:
        return self.u1.size

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.grid_size) / self.grid_size

    def sup_norm(self) -> float:
        return float(max(np.max(np.abs(self.u1)), np.max(np.abs(self.u2)), np.max(np.abs(self.v))))

    @classmethod
    def from_profiles(cls, psi1: Callable, psi2: Callable, grid_size: int, v0: Callable | None = None) -> "MacroState":
        """Initial data u_i = psi_i and, by default, v = psi1 * psi2."""
        r = np.arange(grid_size) / grid_size
        u1 = np.array(np.broadcast_to(np.asarray(psi1(r), dtype=float), (grid_size,)))
        u2 = np.array(np.broadcast_to(np.asarray(psi2(r), dtype=float), (grid_size,)))
        v = u1 * u2 if v0 is None else np.array(np.broadcast_to(np.asarray(v0(r), dtype=float), (grid_size,)))
        state = cls(u1, u2, v, 0.0)
        if state.sup_norm() > 1.0:
            raise DomainError("initial fields must lie in [-1, 1]")
        return state


@dataclass(frozen=True)
class PdeParams:
    beta1: float
    beta2: float
    lam: float
    kernel1: KernelSpec = KernelSpec()
    kernel2: KernelSpec = KernelSpec()
    v_equation: str = "generator-consistent"
    convolution: str = "direct"

    def __post_init__(self):
        if self.v_equation not in V_VARIANTS:
            raise ConfigError(f"unknown v_equation variant {self.v_equation!r}")
        if self.convolution not in ("direct", "fft"):
            raise ConfigError("convolution must be 'direct' or 'fft'")
        if self.lam < 0:
            raise DomainError("lambda must be >= 0")


@dataclass(frozen=True)
class MeanFieldState:
    m1: float
    m2: float
    time: float = 0.0


@lru_cache(maxsize=64)
def grid_weights(spec: KernelSpec, grid_size: int) -> np.ndarray:
    """Kernel samples on the M-grid with (1/M) * sum = 1."""
    w = make_discrete_kernel(spec, grid_size).weights
    w.setflags(write=False)
    return w


@lru_cache(maxsize=16)
def _circulant(spec: KernelSpec, grid_size: int) -> np.ndarray:
    w = grid_weights(spec, grid_size)
    idx = (np.arange(grid_size)[:, None] - np.arange(grid_size)[None, :]) % grid_size
    c = w[idx] / grid_size
    c.setflags(write=False)
    return c


def convolve(u: np.ndarray, spec: KernelSpec, method: str = "direct") -> np.ndarray:
    """Periodic rectangle-rule quadrature of (u * phi)(j/M)."""
    m = u.size
    if spec.shape == "uniform":
        return np.full(m, np.mean(u))
    if method == "fft":
        w = grid_weights(spec, m)
        return np.fft.irfft(np.fft.rfft(u) * np.fft.rfft(w), m) / m
    return _circulant(spec, m) @ u


def _brackets(beta, conv, lam):
    tp = np.tanh(beta * conv + beta * lam)
    tm = np.tanh(beta * conv - beta * lam)
    return 0.5 * (tp + tm), 0.5 * (tp - tm)


def pde_rhs(state: MacroState, params: PdeParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    u1, u2, v = state.u1, state.u2, state.v
    c1 = convolve(u1, params.kernel1, params.convolution)
    c2 = convolve(u2, params.kernel2, params.convolution)
    s1, d1 = _brackets(params.beta1, c1, params.lam)
    s2, d2 = _brackets(params.beta2, c2, params.lam)
    du1 = -u1 + s1 + u2 * d1
    du2 = -u2 + s2 - u1 * d2
    cross2 = d2 if params.v_equation == "generator-consistent" else s2
    dv = -2.0 * v + d1 - cross2 + u1 * s2 + u2 * s1
    return du1, du2, dv


def _rk4(f, y, h):
    k1 = f(y)
    k2 = f(tuple(a + 0.5 * h * b for a, b in zip(y, k1)))
    k3 = f(tuple(a + 0.5 * h * b for a, b in zip(y, k2)))
    k4 = f(tuple(a + h * b for a, b in zip(y, k3)))
    return tuple(a + h / 6.0 * (b + 2.0 * c + 2.0 * d + e) for a, b, c, d, e in zip(y, k1, k2, k3, k4))


def _sample_grid(horizon, sample_times):
    if horizon < 0:
        raise ConfigError("horizon must be >= 0")
    if sample_times is None:
        return np.array([0.0, horizon]) if horizon > 0 else np.array([0.0])
    ts = np.asarray(sample_times, dtype=float)
    if ts.size == 0 or ts[0] < 0 or np.any(np.diff(ts) <= 0) or ts[-1] > horizon + 1e-12:
        raise ConfigError("sample_times must be strictly increasing within [0, horizon]")
    return ts


def _integrate(f, y0, horizon, dt, sample_times, check):
    if not 0 < dt <= 0.1:
        raise ConfigError("dt must lie in (0, 0.1]")
    ts = _sample_grid(horizon, sample_times)
    out = []
    y, t = y0, 0.0
    for target in ts:
        span = target - t
        if span > 0:
            n_steps = max(1, int(np.ceil(span / dt - 1e-9)))
            h = span / n_steps
            for _ in range(n_steps):
                y = _rk4(f, y, h)
        t = target
        check(y, t)
        out.append((t, y))
    return out


def _check_region(y, t):
    bound = max(float(np.max(np.abs(a))) for a in y)
    if not bound <= 1.0 + INVARIANT_TOL:
        raise InstabilityError(f"fields left the invariant region at t={t:.6g} (sup norm {bound:.12g})")


def integrate_pde(state0: MacroState, params: PdeParams, horizon: float, dt: float, sample_times=None) -> list[MacroState]:
    """Fixed-step classical RK4; returns the states at ``sample_times``.

    Each gap between consecutive sample times is split into equal steps no
    longer than ``dt``. Defaults to the initial and final states.
    """
    def f(y):
        return pde_rhs(MacroState(y[0], y[1], y[2]), params)

    traj = _integrate(f, (state0.u1, state0.u2, state0.v), horizon, dt, sample_times, _check_region)
    return [MacroState(y[0].copy(), y[1].copy(), y[2].copy(), state0.time + t) for t, y in traj]


def mean_field_rhs(state: MeanFieldState, beta1: float, beta2: float, lam: float) -> tuple[float, float]:
    s1, d1 = _brackets(beta1, state.m1, lam)
    s2, d2 = _brackets(beta2, state.m2, lam)
    return float(-state.m1 + s1 + state.m2 * d1), float(-state.m2 + s2 - state.m1 * d2)


def integrate_ode(state0: MeanFieldState, beta1: float, beta2: float, lam: float,
                  horizon: float, dt: float, sample_times=None) -> list[MeanFieldState]:
    def f(y):
        return mean_field_rhs(MeanFieldState(y[0], y[1]), beta1, beta2, lam)

    traj = _integrate(f, (state0.m1, state0.m2), horizon, dt, sample_times, _check_region)
    return [MeanFieldState(float(y[0]), float(y[1]), state0.time + t) for t, y in traj]


def eval_macro_observable(state: MacroState, g: Callable) -> tuple[float, float, float]:
    """(<u1, G>, <u2, G>, <v, G>) by the periodic rectangle rule."""
    m = state.grid_size
    gv = np.broadcast_to(np.asarray(g(state.grid), dtype=float), (m,))
    return (float(np.dot(state.u1, gv)) / m, float(np.dot(state.u2, gv)) / m, float(np.dot(state.v, gv)) / m)


def with_variant(params: PdeParams, variant: str) -> PdeParams:
    return replace(params, v_equation=variant)


def pairings_over_time(traj: Sequence[MacroState], g: Callable) -> np.ndarray:
    """Array of shape (len(traj), 3) with the three pairings per state."""
    return np.array([eval_macro_observable(s, g) for s in traj])
