"""Run configuration: TOML with fixed sections, validated up front."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .harness import BASIS
from .kmc import OBSERVABLE_KINDS
from .lattice import KERNEL_SHAPES, KernelSpec
from .macro import V_VARIANTS

_EXPR_NAMES = {
    "pi": np.pi, "cos": np.cos, "sin": np.sin, "exp": np.exp, "tanh": np.tanh,
    "sqrt": np.sqrt, "abs": np.abs, "where": np.where,
}


def profile_function(expr: str):
    """Turn an expression in ``r`` such as ``"0.4*cos(2*pi*r)"`` into a callable."""
    try:
        code = compile(str(expr), "<profile>", "eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad profile expression {expr!r}: {exc.msg}") from None
    for name in code.co_names:
        if name != "r" and name not in _EXPR_NAMES:
            raise ConfigError(f"profile expression {expr!r} uses unknown name {name!r}")

    def psi(r):
        r = np.asarray(r, dtype=float)
        return np.broadcast_to(np.asarray(eval(code, {"__builtins__": {}}, {**_EXPR_NAMES, "r": r}), dtype=float), r.shape)

    return psi


@dataclass
class ModelSection:
    beta1: float = 1.0
    beta2: float = 1.0
    lam: float = 0.5


@dataclass
class MicroSection:
    n_sites: int = 256
    horizon: float = 1.0
    sample_dt: float = 0.05
    ensemble_size: int = 16
    seed: int | None = None


@dataclass
class MacroSection:
    grid_size: int = 256
    dt: float = 0.01
    horizon: float = 1.0
    sample_dt: float = 0.05
    v_equation_variant: str = "generator-consistent"


@dataclass
class InitialSection:
    psi1: str = "0"
    psi2: str = "0"


@dataclass
class ExperimentSection:
    lattice_sizes: list = field(default_factory=lambda: [128, 512, 2048])
    test_functions: list = field(default_factory=lambda: ["1"])
    variance_test_function: str = "cos1"
    trials: int = 1000
    max_n: int = 16
    k_max: int = 30
    min_slope: float = 0.3


@dataclass
class ScanSection:
    beta1: list = field(default_factory=lambda: [0.5, 2.0, 16])
    beta2: list = field(default_factory=lambda: [0.5, 2.0, 16])
    lam: list = field(default_factory=lambda: [0.1, 2.0, 20])
    scale1: list = field(default_factory=lambda: [0.02, 0.05, 0.1, 0.2, 0.3])
    scale2: list = field(default_factory=lambda: [0.02, 0.05, 0.1, 0.2, 0.3])


@dataclass
class OutputSection:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "json"])


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    kernel1: KernelSpec = field(default_factory=KernelSpec)
    kernel2: KernelSpec = field(default_factory=KernelSpec)
    initial: InitialSection = field(default_factory=InitialSection)
    microscopic: MicroSection = field(default_factory=MicroSection)
    macroscopic: MacroSection = field(default_factory=MacroSection)
    observables: list = field(default_factory=lambda: ["magnetization-line1", "magnetization-line2"])
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    scan: ScanSection = field(default_factory=ScanSection)
    output: OutputSection = field(default_factory=OutputSection)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kernel1"] = self.kernel1.to_dict()
        d["kernel2"] = self.kernel2.to_dict()
        return d

    def digest(self) -> str:
        """Hash of everything that affects results (output location excluded)."""
        d = self.to_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


# TOML key -> dataclass attribute, where they differ
_RENAMES = {"lambda": "lam"}
_SECTIONS = {
    "model": ModelSection, "initial": InitialSection, "microscopic": MicroSection,
    "macroscopic": MacroSection, "experiment": ExperimentSection, "scan": ScanSection,
    "output": OutputSection,
}


def _fill(section_name: str, cls, raw) -> object:
    if not isinstance(raw, dict):
        raise ConfigError(f"[{section_name}] must be a table")
    names = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        attr = _RENAMES.get(key, key)
        if attr not in names or key in _RENAMES.values():
            raise ConfigError(f"unknown key '{section_name}.{key}'")
        kwargs[attr] = value
    return cls(**kwargs)


def _kernel(name: str, raw) -> KernelSpec:
    if not isinstance(raw, dict):
        raise ConfigError(f"[kernels.{name}] must be a table")
    for key in raw:
        if key not in ("shape", "width"):
            raise ConfigError(f"unknown key 'kernels.{name}.{key}'")
    shape = raw.get("shape", "uniform")
    if shape not in KERNEL_SHAPES:
        raise ConfigError(f"kernels.{name}.shape must be one of {', '.join(KERNEL_SHAPES)}")
    try:
        return KernelSpec(shape, raw.get("width"))
    except ValueError as exc:
        raise ConfigError(f"kernels.{name}: {exc}") from None


def _num(value, name, *, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number")
    if integer and int(value) != value:
        raise ConfigError(f"{name} must be an integer")
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite")
    return int(value) if integer else float(value)


def validate(cfg: RunConfig) -> RunConfig:
    m = cfg.model
    m.beta1 = _num(m.beta1, "beta1")
    m.beta2 = _num(m.beta2, "beta2")
    m.lam = _num(m.lam, "lambda")
    if m.beta1 <= 0:
        raise ConfigError("beta1 must be > 0")
    if m.beta2 <= 0:
        raise ConfigError("beta2 must be > 0")
    if m.lam < 0:
        raise ConfigError("lambda must be >= 0")

    mi = cfg.microscopic
    mi.n_sites = _num(mi.n_sites, "n_sites", integer=True)
    mi.horizon = _num(mi.horizon, "microscopic.horizon")
    mi.sample_dt = _num(mi.sample_dt, "microscopic.sample_dt")
    mi.ensemble_size = _num(mi.ensemble_size, "ensemble_size", integer=True)
    if mi.n_sites < 1:
        raise ConfigError("n_sites must be >= 1")
    if mi.horizon < 0:
        raise ConfigError("microscopic.horizon must be >= 0")
    if mi.sample_dt <= 0:
        raise ConfigError("microscopic.sample_dt must be > 0")
    if mi.ensemble_size < 1:
        raise ConfigError("ensemble_size must be >= 1")
    if mi.seed is not None:
        mi.seed = _num(mi.seed, "seed", integer=True)
        if not 0 <= mi.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    ma = cfg.macroscopic
    ma.grid_size = _num(ma.grid_size, "grid_size", integer=True)
    ma.dt = _num(ma.dt, "dt")
    ma.horizon = _num(ma.horizon, "macroscopic.horizon")
    ma.sample_dt = _num(ma.sample_dt, "macroscopic.sample_dt")
    if ma.grid_size < 1:
        raise ConfigError("grid_size must be >= 1")
    if not 0 < ma.dt <= 0.1:
        raise ConfigError("dt must lie in (0, 0.1]")
    if ma.horizon < 0:
        raise ConfigError("macroscopic.horizon must be >= 0")
    if ma.sample_dt <= 0:
        raise ConfigError("macroscopic.sample_dt must be > 0")
    if ma.v_equation_variant not in V_VARIANTS:
        raise ConfigError(f"v_equation_variant must be one of {', '.join(V_VARIANTS)}")

    r = np.linspace(0.0, 1.0, 257)[:-1]
    for name in ("psi1", "psi2"):
        vals = profile_function(getattr(cfg.initial, name))(r)
        if not np.all(np.isfinite(vals)) or np.any(np.abs(vals) > 1.0):
            raise ConfigError(f"initial.{name} must take values in [-1, 1]")

    if not isinstance(cfg.observables, list) or not cfg.observables:
        raise ConfigError("observables must be a nonempty list")
    for spec in cfg.observables:
        parse_observable(spec)

    ex = cfg.experiment
    sizes = [_num(n, "lattice_sizes", integer=True) for n in ex.lattice_sizes]
    if not sizes or any(n < 1 for n in sizes) or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ConfigError("lattice_sizes must be strictly increasing positive integers")
    ex.lattice_sizes = sizes
    for name in list(ex.test_functions) + [ex.variance_test_function]:
        if name not in BASIS:
            raise ConfigError(f"test function {name!r} not in basis {', '.join(BASIS)}")
    ex.trials = _num(ex.trials, "trials", integer=True)
    ex.max_n = _num(ex.max_n, "max_n", integer=True)
    ex.k_max = _num(ex.k_max, "k_max", integer=True)
    ex.min_slope = _num(ex.min_slope, "min_slope")
    if ex.trials < 1:
        raise ConfigError("trials must be >= 1")
    if not 1 <= ex.max_n <= 64:
        raise ConfigError("max_n must lie in [1, 64]")
    if ex.k_max < 1:
        raise ConfigError("k_max must be >= 1")

    sc = cfg.scan
    for name in ("beta1", "beta2", "lam"):
        val = getattr(sc, name)
        key = "lambda" if name == "lam" else name
        if not (isinstance(val, list) and len(val) == 3):
            raise ConfigError(f"scan.{key} must be [low, high, count]")
        lo, hi, cnt = _num(val[0], f"scan.{key}"), _num(val[1], f"scan.{key}"), _num(val[2], f"scan.{key}", integer=True)
        if cnt < 1 or hi < lo:
            raise ConfigError(f"scan.{key} must satisfy low <= high and count >= 1")
        setattr(sc, name, [lo, hi, cnt])
    for name in ("scale1", "scale2"):
        vals = [_num(v, f"scan.{name}") for v in getattr(sc, name)]
        if not vals or any(v <= 0 for v in vals):
            raise ConfigError(f"scan.{name} must be a nonempty list of positive scales")
        setattr(sc, name, vals)

    out = cfg.output
    if not set(out.formats) <= {"csv", "json"} or not out.formats:
        raise ConfigError("output.formats must be a nonempty subset of ['csv', 'json']")
    return cfg


def parse_observable(text: str):
    """``kind``, ``kind:G`` for inner products, or ``fourier-mode:line:k``."""
    from .harness import test_function
    from .kmc import ObservableSpec

    if not isinstance(text, str):
        raise ConfigError("observables must be strings")
    parts = text.split(":")
    kind = parts[0]
    if kind not in OBSERVABLE_KINDS:
        raise ConfigError(f"unknown observable kind {kind!r}")
    try:
        if kind == "fourier-mode":
            if len(parts) != 3:
                raise ConfigError("fourier-mode observable is written fourier-mode:line:k")
            return ObservableSpec(kind, line=int(parts[1]), k=int(parts[2]), label=text)
        if kind.startswith("inner-product"):
            if len(parts) != 2:
                raise ConfigError(f"{kind} observable is written {kind}:G")
            return ObservableSpec(kind, test_function(parts[1]), label=text)
        if len(parts) != 1:
            raise ConfigError(f"{kind} takes no arguments")
        return ObservableSpec(kind, label=text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def config_from_dict(raw: dict) -> RunConfig:
    kwargs = {}
    for key, value in raw.items():
        if key in _SECTIONS:
            kwargs[key] = _fill(key, _SECTIONS[key], value)
        elif key == "kernels":
            if not isinstance(value, dict):
                raise ConfigError("[kernels] must be a table")
            for line, spec in value.items():
                if line not in ("line1", "line2"):
                    raise ConfigError(f"unknown key 'kernels.{line}'")
                kwargs["kernel1" if line == "line1" else "kernel2"] = _kernel(line, spec)
        elif key == "observables":
            kwargs["observables"] = value
        else:
            raise ConfigError(f"unknown key '{key}'")
    return validate(RunConfig(**kwargs))


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from None
    return config_from_dict(raw)
