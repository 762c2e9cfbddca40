"""Linear stability of the (u1, u2) subsystem around the origin.

Mode k of the linearization is governed by

    A(k) = [[-1 + beta1 (1 - t1^2) phi1_hat(k),  t1],
            [-t2,  -1 + beta2 (1 - t2^2) phi2_hat(k)]],   t_i = tanh(beta_i * lam).

v does not feed back into (u1, u2), so it is left out.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

from .errors import ConfigError
from .lattice import KernelSpec
from .macro import MacroState, PdeParams, integrate_pde


def kernel_fourier_coefficient(spec: KernelSpec, k: int) -> float:
    """Cosine coefficient  int_0^1 phi(0, r) cos(2 pi k r) dr."""
    k = abs(int(k))
    if k == 0:
        return 1.0
    if spec.shape == "uniform":
        return 0.0
    w = spec.width
    if spec.shape == "wrapped-gaussian":
        return math.exp(-2.0 * math.pi ** 2 * w * w * k * k)
    x = 2.0 * math.pi * k * w
    if spec.shape == "top-hat":
        return math.sin(x) / x
    # raised cosine: sin(x) pi^2 / (x (pi^2 - x^2)), removable singularity at x = pi
    if abs(x - math.pi) < 1e-6:
        return 0.5 - (x - math.pi) / (4.0 * math.pi)
    return math.sin(x) * math.pi ** 2 / (x * (math.pi ** 2 - x * x))


def kernel_fourier_quadrature(spec: KernelSpec, k: int) -> float:
    """Same coefficient by adaptive quadrature; independent of the closed forms."""
    f = lambda r: float(spec.profile(r)) * math.cos(2.0 * math.pi * k * r)
    breaks = [] if spec.width is None else [spec.width]
    val, _ = integrate.quad(f, 0.0, 0.5, points=breaks or None, limit=400, epsabs=1e-14, epsrel=1e-13)
    return 2.0 * val


def eig2x2(a: np.ndarray) -> tuple[complex, complex]:
    """Eigenvalues of a real 2x2 matrix, larger real part first."""
    p, q, r, s = float(a[0, 0]), float(a[0, 1]), float(a[1, 0]), float(a[1, 1])
    half_tr = 0.5 * (p + s)
    # discriminant written without the tr^2 - 4 det cancellation
    disc = (0.5 * (p - s)) ** 2 + q * r
    if disc >= 0:
        root = math.sqrt(disc)
        big = half_tr + math.copysign(root, half_tr) if half_tr != 0 else root
        det = p * s - q * r
        other = det / big if big != 0 else half_tr - root
        lo, hi = sorted((big, other))
        return complex(hi), complex(lo)
    root = math.sqrt(-disc)
    return complex(half_tr, root), complex(half_tr, -root)


@dataclass(frozen=True)
class ModeMatrix:
    k: int
    entries: np.ndarray
    eigenvalues: tuple[complex, complex]

    @property
    def abscissa(self) -> float:
        return max(e.real for e in self.eigenvalues)


def linearized_matrix(beta1: float, beta2: float, lam: float, phi1_hat: float, phi2_hat: float, k: int = 0) -> ModeMatrix:
    t1 = math.tanh(beta1 * lam)
    t2 = math.tanh(beta2 * lam)
    a = np.array([
        [-1.0 + beta1 * (1.0 - t1 * t1) * phi1_hat, t1],
        [-t2, -1.0 + beta2 * (1.0 - t2 * t2) * phi2_hat],
    ])
    return ModeMatrix(k, a, eig2x2(a))


@dataclass
class DispersionReport:
    modes: list[ModeMatrix]
    max_growth: float
    unstable_modes: list[int]
    turing: bool

    def rows(self) -> list[dict]:
        out = []
        for m in self.modes:
            e1, e2 = m.eigenvalues
            out.append({"k": m.k, "re_lambda1": e1.real, "im_lambda1": e1.imag,
                        "re_lambda2": e2.real, "im_lambda2": e2.imag})
        return out

    def to_dict(self) -> dict:
        return {"max_growth": self.max_growth, "unstable_modes": list(self.unstable_modes),
                "turing": self.turing, "modes": self.rows()}


def dispersion(beta1: float, beta2: float, lam: float, spec1: KernelSpec, spec2: KernelSpec, k_max: int) -> DispersionReport:
    if k_max < 1:
        raise ConfigError("k_max must be >= 1")
    modes = [
        linearized_matrix(beta1, beta2, lam, kernel_fourier_coefficient(spec1, k), kernel_fourier_coefficient(spec2, k), k)
        for k in range(k_max + 1)
    ]
    unstable = [m.k for m in modes if m.abscissa > 0]
    turing = modes[0].abscissa < 0 and any(k != 0 for k in unstable)
    return DispersionReport(modes, max(m.abscissa for m in modes), unstable, turing)


@dataclass(frozen=True)
class ScanPoint:
    beta1: float
    beta2: float
    lam: float
    scale1: float
    scale2: float


@dataclass(frozen=True)
class ScanRow:
    beta1: float
    beta2: float
    lam: float
    scale1: float
    scale2: float
    growth_k0: float
    growth_nonzero: float
    best_k: int
    turing: bool

    @property
    def point(self) -> ScanPoint:
        return ScanPoint(self.beta1, self.beta2, self.lam, self.scale1, self.scale2)

    def to_dict(self) -> dict:
        return asdict(self)


def scan_box(beta1s: Sequence[float], beta2s: Sequence[float], lams: Sequence[float],
             scales1: Sequence[float], scales2: Sequence[float]) -> list[ScanPoint]:
    """Cartesian product in a fixed (beta1, beta2, lam, scale1, scale2) order."""
    return [ScanPoint(*p) for p in itertools.product(beta1s, beta2s, lams, scales1, scales2)]


def _abscissa(p, q, r, s):
    half_tr = 0.5 * (p + s)
    disc = (0.5 * (p - s)) ** 2 + q * r
    return half_tr + np.sqrt(np.maximum(disc, 0.0))


def regime_scan(grid: Iterable[ScanPoint], k_max: int) -> list[ScanRow]:
    """Dispersion with Gaussian kernels at every grid point, one row each.

    Vectorized over points and modes; same classification rule as
    :func:`dispersion`.
    """
    grid = list(grid)
    if not grid:
        raise ConfigError("scan grid is empty")
    if k_max < 1:
        raise ConfigError("k_max must be >= 1")
    arr = np.array([(p.beta1, p.beta2, p.lam, p.scale1, p.scale2) for p in grid], dtype=float)
    b1, b2, lam, s1, s2 = (arr[:, i : i + 1] for i in range(5))
    k = np.arange(k_max + 1)[None, :]
    phi1 = np.exp(-2.0 * np.pi ** 2 * s1 * s1 * k * k)
    phi2 = np.exp(-2.0 * np.pi ** 2 * s2 * s2 * k * k)
    t1, t2 = np.tanh(b1 * lam), np.tanh(b2 * lam)
    growth = _abscissa(-1.0 + b1 * (1.0 - t1 * t1) * phi1, t1, -t2, -1.0 + b2 * (1.0 - t2 * t2) * phi2)
    g0 = growth[:, 0]
    best = 1 + np.argmax(growth[:, 1:], axis=1)
    gbest = growth[np.arange(len(grid)), best]
    turing = (g0 < 0) & (gbest > 0)
    return [
        ScanRow(float(a[0]), float(a[1]), float(a[2]), float(a[3]), float(a[4]),
                float(g0[i]), float(gbest[i]), int(best[i]), bool(turing[i]))
        for i, a in enumerate(arr)
    ]


@dataclass
class Confirmation:
    initial_sup: float
    peak_sup: float
    peak_time: float
    growth_factor: float
    times: np.ndarray
    sup_norms: np.ndarray


def confirm_turing(point: ScanPoint, grid_size: int = 256, amplitude: float = 1e-3, horizon: float | None = None,
                   dt: float = 0.05, seed: int = 0, growth_target: float = 5.0) -> Confirmation:
    """Integrate the full nonlinear system from a small random perturbation of 0.

    Records ``max(|u1|, |u2|)`` on a time grid and stops once it has grown by
    ``growth_target`` (or at ``horizon``, by default long enough for the
    predicted linear growth rate to amplify the perturbation 1e4-fold).
    """
    spec1, spec2 = KernelSpec.gaussian(point.scale1), KernelSpec.gaussian(point.scale2)
    k_max = max(1, grid_size // 2 - 1)
    rep = dispersion(point.beta1, point.beta2, point.lam, spec1, spec2, k_max)
    if horizon is None:
        rate = max(rep.max_growth, 1e-3)
        horizon = float(np.ceil(math.log(1e4) / rate + 10.0))
    rng = np.random.default_rng(seed)
    u1 = amplitude * rng.uniform(-1.0, 1.0, grid_size)
    u2 = amplitude * rng.uniform(-1.0, 1.0, grid_size)
    state = MacroState(u1, u2, u1 * u2, 0.0)
    params = PdeParams(point.beta1, point.beta2, point.lam, spec1, spec2, convolution="fft")
    sup0 = float(max(np.max(np.abs(u1)), np.max(np.abs(u2))))
    times, sups = [0.0], [sup0]
    chunk = 5.0
    while state.time < horizon - 1e-12:
        span = min(chunk, horizon - state.time)
        state = integrate_pde(state, params, span, dt)[-1]
        times.append(state.time)
        sups.append(float(max(np.max(np.abs(state.u1)), np.max(np.abs(state.u2)))))
        if sups[-1] >= growth_target * sup0:
            break
    sups_a = np.array(sups)
    i = int(np.argmax(sups_a))
    return Confirmation(sup0, float(sups_a[i]), float(times[i]), float(sups_a[i] / sup0), np.array(times), sups_a)


def characteristic_residual(m: ModeMatrix) -> float:
    """max |lambda^2 - tr lambda + det| over both eigenvalues."""
    a = m.entries
    tr = a[0, 0] + a[1, 1]
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    return max(abs(e * e - tr * e + det) for e in m.eigenvalues)
