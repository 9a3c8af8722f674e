"""Run configuration: a TOML file of top-level profile/kernel keys and
[grid], [micro], [mc], [macro], [derive], [residual] tables.

Example::

    profile = "poly"
    coeffs = ["1", "0", "-1"]
    kernel = "exponential"

    [grid]
    L = 400.0
    nx = 1024

    [mc]
    n_particles = 100000
    seed = 20240607

Unknown keys are rejected so typos never pass silently.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .kernel import JumpKernel
from .polynomial import YPolynomial, as_fraction
from .profile import VelocityProfile


@dataclass
class GridConfig:
    L: float = 400.0
    nx: int = 1024
    n_nodes: int = 16
    boundary: str = "periodic"


@dataclass
class MicroConfig:
    dt: float = 0.05
    t_end: float = 50.0
    output_times: list = field(default_factory=lambda: [0.0, 10.0, 20.0, 30.0, 40.0, 50.0])
    ic: str = "gaussian"
    x0: float | None = None
    sigma: float = 20.0
    y_shape: list | None = None


@dataclass
class McSection:
    n_particles: int = 100_000
    seed: int = 20240607
    t_outputs: list = field(default_factory=lambda: [float(t) for t in range(0, 201, 10)])
    fit_t_min: float = 100.0
    fit_t_max: float = 200.0
    y0: float | None = None
    histogram: bool = False
    x_bins: int = 50
    y_bins: int = 20


@dataclass
class MacroConfig:
    method: str = "spectral"
    dt: float | None = None


@dataclass
class DeriveConfig:
    order: int = 2
    method: str = "hierarchy"


@dataclass
class ResidualConfig:
    times: list = field(default_factory=lambda: [20.0])


@dataclass
class RunConfig:
    profile: str = "parabolic"
    c: Any = None
    coeffs: list | None = None
    kernel: str = "exponential"
    moments: list | None = None
    output_dir: str | None = None
    grid: GridConfig = field(default_factory=GridConfig)
    micro: MicroConfig = field(default_factory=MicroConfig)
    mc: McSection = field(default_factory=McSection)
    macro: MacroConfig = field(default_factory=MacroConfig)
    derive: DeriveConfig = field(default_factory=DeriveConfig)
    residual: ResidualConfig = field(default_factory=ResidualConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def velocity_profile(self) -> VelocityProfile:
        if self.profile == "parabolic":
            return VelocityProfile.parabolic()
        if self.profile == "constant":
            if self.c is None:
                raise ConfigError("profile = \"constant\" needs key 'c'")
            return VelocityProfile.constant(_rational(self.c, "c"))
        if self.profile == "poly":
            if not self.coeffs:
                raise ConfigError("profile = \"poly\" needs key 'coeffs'")
            return VelocityProfile.polynomial([_rational(c, "coeffs") for c in self.coeffs])
        raise ConfigError(f"unknown profile {self.profile!r}; use parabolic, constant or poly")

    def jump_kernel(self) -> JumpKernel:
        profile = self.velocity_profile()
        if self.kernel == "exponential":
            return JumpKernel.exponential(profile)
        if self.kernel == "general":
            if not self.moments:
                raise ConfigError("kernel = \"general\" needs a 'moments' table")
            table = {}
            for entry in self.moments:
                if not isinstance(entry, list) or len(entry) != 2:
                    raise ConfigError(f"moment entries are [n, coeffs | \"divergent\"], got {entry!r}")
                n, expr = entry
                if expr == "divergent":
                    table[int(n)] = None
                else:
                    table[int(n)] = YPolynomial([_rational(c, "moments") for c in expr])
            return JumpKernel.general(table, profile=profile)
        raise ConfigError(f"unknown kernel {self.kernel!r}; use exponential or general")


SECTIONS = {"grid": GridConfig, "micro": MicroConfig, "mc": McSection,
            "macro": MacroConfig, "derive": DeriveConfig, "residual": ResidualConfig}


def _rational(value, key):
    try:
        return as_fraction(value)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise ConfigError(f"key '{key}': cannot read {value!r} as a rational") from exc


def _fill(cls, data: dict, where: str):
    names = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"unknown key '{where}{key}'")
        kwargs[key] = value
    return cls(**kwargs)


def from_dict(data: dict) -> RunConfig:
    data = copy.deepcopy(data)
    top = {}
    for key, value in data.items():
        if key in SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"'{key}' must be a table")
            top[key] = _fill(SECTIONS[key], value, f"{key}.")
        else:
            top[key] = value
    cfg = _fill(RunConfig, top, "")
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    cfg.velocity_profile()
    if cfg.kernel not in ("exponential", "general"):
        raise ConfigError(f"unknown kernel {cfg.kernel!r}")
    if cfg.grid.boundary not in ("periodic", "inflow-zero"):
        raise ConfigError(f"grid.boundary must be periodic or inflow-zero, got {cfg.grid.boundary!r}")
    if cfg.derive.order < 1:
        raise ConfigError("derive.order must be >= 1")
    if cfg.derive.method not in ("hierarchy", "eigenspace"):
        raise ConfigError("derive.method must be hierarchy or eigenspace")
    if cfg.macro.method not in ("spectral", "fd"):
        raise ConfigError("macro.method must be spectral or fd")
    times = cfg.micro.output_times
    if sorted(times) != list(times):
        raise ConfigError("micro.output_times must be ascending")


PRESETS: dict[str, dict] = {
    "paper": {},
    "quick": {
        "grid": {"L": 200.0, "nx": 256, "n_nodes": 8},
        "micro": {"t_end": 20.0, "output_times": [0.0, 10.0, 20.0], "sigma": 15.0},
        "mc": {"n_particles": 4000, "t_outputs": [float(t) for t in range(0, 41, 5)],
               "fit_t_min": 20.0, "fit_t_max": 40.0},
        "residual": {"times": [20.0]},
    },
}


def preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return from_dict(PRESETS[name])


def load(path, base: str | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if base:
        data = merge(PRESETS[base], data)
    return from_dict(data)


def merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def apply_overrides(cfg: RunConfig, assignments: list[str]) -> RunConfig:
    """Apply ``section.key=value`` overrides; values use TOML syntax
    (bare words fall back to strings)."""
    data = cfg.to_dict()
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, raw = item.split("=", 1)
        try:
            value = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError:
            value = raw
        parts = dotted.strip().split(".")
        node = data
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise ConfigError(f"unknown key '{dotted}'")
            node = node[p]
        if parts[-1] not in node:
            raise ConfigError(f"unknown key '{dotted}'")
        node[parts[-1]] = value
    return from_dict(data)
