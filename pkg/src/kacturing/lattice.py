"""Microscopic model: two spin lines on the discrete torus with Kac kernels.

Spins are stored as ``int8`` arrays of +-1. The convolution fields
``h_i = sigma_i * phi_i`` are cached on :class:`PairConfig` and kept in sync
with single flips by :func:`update_field_after_flip`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateKernelError, DimensionError, DomainError

KERNEL_SHAPES = ("uniform", "wrapped-gaussian", "top-hat", "raised-cosine")

# Images of the wrapped Gaussian are added until the next one is below this.
_GAUSS_TAIL = 1e-17


@dataclass(frozen=True)
class ModelParams:
    beta1: float
    beta2: float
    lam: float
    n_sites: int

    def __post_init__(self):
        if not self.beta1 > 0:
            raise DomainError("beta1 must be > 0")
        if not self.beta2 > 0:
            raise DomainError("beta2 must be > 0")
        if not self.lam >= 0:
            raise DomainError("lambda must be >= 0")
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise DomainError("n_sites must be a positive integer")

    @property
    def gamma(self) -> float:
        return 1.0 / self.n_sites


@dataclass(frozen=True)
class KernelSpec:
    """Continuous even kernel on the unit torus, integrating to one.

    ``width`` is the Gaussian standard deviation for ``wrapped-gaussian`` and
    the half-width of the support for ``top-hat`` and ``raised-cosine``; it is
    ignored for ``uniform``.
    """

    shape: str = "uniform"
    width: float | None = None

    def __post_init__(self):
        if self.shape not in KERNEL_SHAPES:
            raise DomainError(f"unknown kernel shape {self.shape!r}")
        if self.shape == "uniform":
            return
        if self.width is None or not self.width > 0:
            raise DomainError(f"{self.shape} kernel needs a positive width")
        if self.shape in ("top-hat", "raised-cosine") and self.width > 0.5:
            raise DomainError("half-width must lie in (0, 1/2]")

    @classmethod
    def gaussian(cls, scale: float) -> "KernelSpec":
        return cls("wrapped-gaussian", scale)

    def profile(self, r) -> np.ndarray:
        """phi(0, r) evaluated at periodic distance of ``r`` from the origin."""
        r = np.asarray(r, dtype=float)
        d = np.abs(r - np.round(r))
        if self.shape == "uniform":
            return np.ones_like(d)
        w = self.width
        if self.shape == "top-hat":
            return np.where(d <= w, 0.5 / w, 0.0)
        if self.shape == "raised-cosine":
            return np.where(d <= w, (1.0 + np.cos(np.pi * d / w)) / (2.0 * w), 0.0)
        # wrapped gaussian: images n = 0, +-1, ... until the tail is negligible
        norm = 1.0 / (w * math.sqrt(2.0 * math.pi))
        out = norm * np.exp(-0.5 * (d / w) ** 2)
        n = 1
        while True:
            lead = norm * math.exp(-0.5 * ((n - 0.5) / w) ** 2)
            if lead < _GAUSS_TAIL:
                break
            out = out + norm * (np.exp(-0.5 * ((d + n) / w) ** 2) + np.exp(-0.5 * ((d - n) / w) ** 2))
            n += 1
        return out

    def to_dict(self) -> dict:
        out = {"shape": self.shape}
        if self.width is not None:
            out["width"] = self.width
        return out


@dataclass(frozen=True, eq=False)
class DiscreteKernel:
    """Kernel table on the lattice: ``weights[d]`` at periodic displacement d."""

    n_sites: int
    weights: np.ndarray
    # nonzero displacements, used by the O(support) flip update
    support: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.support is None:
            object.__setattr__(self, "support", np.flatnonzero(self.weights).astype(np.int64))

    @property
    def gamma(self) -> float:
        return 1.0 / self.n_sites


def make_discrete_kernel(spec: KernelSpec, n_sites: int) -> DiscreteKernel:
    """Sample ``spec`` at lattice distances and renormalize to ``gamma * sum = 1``."""
    if int(n_sites) != n_sites or n_sites < 1:
        raise DomainError("n_sites must be a positive integer")
    n = int(n_sites)
    half = np.arange(n // 2 + 1)
    vals = spec.profile(half / n)
    w = np.empty(n)
    w[: n // 2 + 1] = vals
    w[n // 2 + 1 :] = vals[1 : n - n // 2][::-1]
    total = math.fsum(w)
    if not total > 0:
        raise DegenerateKernelError(f"{spec.shape} kernel has no positive sample at N={n}")
    w *= n / total
    # push the rounding residue onto the self-mirrored d=0 entry
    w[0] += n - math.fsum(w)
    return DiscreteKernel(n, w)


def _check_len(arr, n):
    if len(arr) != n:
        raise DimensionError(f"expected length {n}, got {len(arr)}")


def convolve_field(line, kernel: DiscreteKernel) -> np.ndarray:
    """h[x] = gamma * sum_y line[y] * weights[(x - y) mod N]."""
    n = kernel.n_sites
    _check_len(line, n)
    s = np.asarray(line, dtype=float)
    if n <= 512:
        idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        return kernel.weights[idx] @ s / n
    h = np.fft.irfft(np.fft.rfft(s) * np.fft.rfft(kernel.weights), n) / n
    return h


def update_field_after_flip(h: np.ndarray, kernel: DiscreteKernel, site: int, old_spin: int) -> np.ndarray:
    """In-place update of ``h`` after the spin at ``site`` flipped from ``old_spin``."""
    n = kernel.n_sites
    if not 0 <= site < n:
        raise IndexError(site)
    sup = kernel.support
    h[(site + sup) % n] += (-2.0 * old_spin / n) * kernel.weights[sup]
    return h


def hamiltonian(line, kernel: DiscreteKernel) -> float:
    s = np.asarray(line, dtype=float)
    return -0.5 * float(np.dot(s, convolve_field(s, kernel)))


@dataclass(eq=False)
class PairConfig:
    s1: np.ndarray
    s2: np.ndarray
    h1: np.ndarray
    h2: np.ndarray

    @classmethod
    def from_spins(cls, s1, s2, kernels) -> "PairConfig":
        k1, k2 = kernels
        s1 = np.asarray(s1, dtype=np.int8).copy()
        s2 = np.asarray(s2, dtype=np.int8).copy()
        _check_len(s1, k1.n_sites)
        _check_len(s2, k2.n_sites)
        if not (np.all(np.abs(s1) == 1) and np.all(np.abs(s2) == 1)):
            raise DomainError("spins must be +-1")
        return cls(s1, s2, convolve_field(s1, k1), convolve_field(s2, k2))

    @property
    def n_sites(self) -> int:
        return self.s1.size

    def copy(self) -> "PairConfig":
        return PairConfig(self.s1.copy(), self.s2.copy(), self.h1.copy(), self.h2.copy())

    def flip(self, line: int, site: int, kernels) -> None:
        s, h = (self.s1, self.h1) if line == 1 else (self.s2, self.h2)
        old = int(s[site])
        s[site] = -old
        update_field_after_flip(h, kernels[line - 1], site, old)


def _logistic_rate(z: float) -> float:
    # 1 / (1 + e^z) without overflow
    if z > 0:
        e = math.exp(-z)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(z))


def flip_rate(which_line: int, site: int, config: PairConfig, params: ModelParams) -> float:
    """Glauber rate of flipping ``site`` on line 1 or 2.

    Line 1 sees the local field ``h1 + lam * s2``, line 2 sees ``h2 - lam * s1``.
    """
    s1 = int(config.s1[site])
    s2 = int(config.s2[site])
    if which_line == 1:
        a = params.beta1 * (config.h1[site] + params.lam * s2)
        return _logistic_rate(2.0 * s1 * a)
    if which_line == 2:
        b = params.beta2 * (config.h2[site] - params.lam * s1)
        return _logistic_rate(2.0 * s2 * b)
    raise ValueError("which_line must be 1 or 2")


def sample_initial(psi1: Callable, psi2: Callable, params: ModelParams, kernels, rng) -> PairConfig:
    """Independent spins with ``E sigma_i(x) = psi_i(x / N)``."""
    n = params.n_sites
    r = np.arange(n) / n
    lines = []
    for psi in (psi1, psi2):
        m = np.broadcast_to(np.asarray(psi(r), dtype=float), (n,))
        if np.any(np.abs(m) > 1.0) or not np.all(np.isfinite(m)):
            raise DomainError("initial profile must take values in [-1, 1]")
        up = rng.random(n) < 0.5 * (1.0 + m)
        lines.append(np.where(up, 1, -1).astype(np.int8))
    return PairConfig.from_spins(lines[0], lines[1], kernels)


def eval_test_function(g: Callable, n: int) -> np.ndarray:
    r = np.arange(n) / n
    return np.array(np.broadcast_to(np.asarray(g(r), dtype=float), (n,)))


def inner_product(field, g: Callable, n_sites: int) -> float:
    """gamma * sum_x field[x] * g(x / N)."""
    _check_len(field, n_sites)
    return float(np.dot(np.asarray(field, dtype=float), eval_test_function(g, n_sites))) / n_sites


def correlation_field(config: PairConfig) -> np.ndarray:
    return config.s1 * config.s2
