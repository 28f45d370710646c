"""Run configuration: an INI file with ``[section]`` headers plus overrides."""

from __future__ import annotations

import configparser
import dataclasses
import io
import math
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .geometry import Modulus, NormSpace
from .orlicz import OrliczFunction, power


@dataclass(frozen=True)
class RunConfig:
    # [instance]
    n: int = 1
    norm: str = "linf"
    radius: float = 1.0
    modulus: str = "power:1"
    phi: str = "power:2"
    # [numerics]
    quad_tol: float = 1e-9
    root_tol: float = 1e-10
    k_max: int = 200
    r_min: float | None = None
    # [sampling]
    seed: int = 0
    shards: int = 4
    jobs: int = 1
    mc_count: int = 100000
    pair_count: int = 200
    grid_count: int = 64
    sup_mc_count: int = 1000
    terminal_delta: float | None = None
    # [sobolev]
    sobolev_grid_count: int = 4096
    sobolev_mc_count: int = 20000
    probes: int = 5
    # [conjugate]
    x_min: float = 1e-3
    x_max: float = 1e3
    points: int = 61
    # [output]
    out_dir: str = "out"

    def __post_init__(self):
        validate(self)

    @property
    def space(self) -> NormSpace:
        return NormSpace.lp(self.n, parse_norm(self.norm), self.radius)

    @property
    def modulus_fn(self) -> Modulus:
        return parse_modulus(self.modulus)

    @property
    def phi_fn(self) -> OrliczFunction:
        return parse_phi(self.phi)

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)


SECTIONS: dict[str, tuple[str, ...]] = {
    "instance": ("n", "norm", "radius", "modulus", "phi"),
    "numerics": ("quad_tol", "root_tol", "k_max", "r_min"),
    "sampling": ("seed", "shards", "jobs", "mc_count", "pair_count", "grid_count",
                 "sup_mc_count", "terminal_delta"),
    "sobolev": ("sobolev_grid_count", "sobolev_mc_count", "probes"),
    "conjugate": ("x_min", "x_max", "points"),
    "output": ("out_dir",),
}
_KEY_SECTION = {key: sec for sec, keys in SECTIONS.items() for key in keys}
_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_norm(spec: str) -> float:
    spec = spec.strip().lower()
    named = {"l1": 1.0, "l2": 2.0, "linf": math.inf}
    if spec in named:
        return named[spec]
    if spec.startswith("lp:"):
        try:
            p = float(spec[3:])
        except ValueError:
            raise ConfigError(f"bad norm spec {spec!r}") from None
        if not p >= 1:
            raise ConfigError(f"norm exponent must be >= 1, got {p!r}")
        return p
    raise ConfigError(f"unknown norm spec {spec!r} (linf | l1 | l2 | lp:<p>)")


def _spec_args(spec: str, kind: str, count: int) -> list[float]:
    parts = spec.strip().split(":")
    if parts[0] != kind or len(parts) != count + 1:
        raise ConfigError(f"bad spec {spec!r}")
    try:
        return [float(x) for x in parts[1:]]
    except ValueError:
        raise ConfigError(f"bad number in spec {spec!r}") from None


def parse_modulus(spec: str) -> Modulus:
    """``power:<alpha>`` with alpha in (0, 1], or ``capped:<alpha>:<slope>`` with
    alpha in (0, 1)."""
    if spec.strip().startswith("capped:"):
        alpha, slope = _spec_args(spec, "capped", 2)
        if not (0 < alpha < 1 and slope > 0):
            raise ConfigError(f"bad capped modulus {spec!r}")
        return Modulus.capped(alpha, slope)
    (alpha,) = _spec_args(spec, "power", 1)
    if not 0 < alpha <= 1:
        raise ConfigError(f"modulus exponent must lie in (0, 1], got {alpha!r}")
    return Modulus.power(alpha)


def parse_phi(spec: str) -> OrliczFunction:
    (p,) = _spec_args(spec, "power", 1)
    if not p > 1:
        raise ConfigError(f"phi exponent must be > 1, got {p!r}")
    return power(p)


def validate(cfg: RunConfig) -> None:
    if not 1 <= cfg.n <= 6:
        raise ConfigError(f"n must lie in [1, 6], got {cfg.n}")
    parse_norm(cfg.norm)
    parse_modulus(cfg.modulus)
    parse_phi(cfg.phi)
    positive = ("radius", "quad_tol", "root_tol", "x_min")
    for name in positive:
        if not getattr(cfg, name) > 0:
            raise ConfigError(f"{name} must be positive")
    for name in ("quad_tol", "root_tol"):
        if getattr(cfg, name) > 1e-2:
            raise ConfigError(f"{name} must be <= 1e-2")
    if cfg.x_max <= cfg.x_min:
        raise ConfigError("x_max must exceed x_min")
    for name in ("k_max", "shards", "jobs", "pair_count", "probes", "points"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be >= 1")
    for name in ("mc_count", "grid_count", "sup_mc_count", "sobolev_grid_count", "sobolev_mc_count"):
        if getattr(cfg, name) < 2:
            raise ConfigError(f"{name} must be >= 2")
    if cfg.seed < 0:
        raise ConfigError("seed must be nonnegative")
    if cfg.r_min is not None and not cfg.r_min > 0:
        raise ConfigError("r_min must be positive")
    if cfg.terminal_delta is not None and not 0 < cfg.terminal_delta < 1:
        raise ConfigError("terminal_delta must lie in (0, 1)")


def _convert(name: str, raw: str):
    kind = _TYPES[name]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "float | None":
            return None if raw in ("", "none") else float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None
    return raw


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def apply_overrides(values: dict[str, object], overrides: list[str]) -> dict[str, object]:
    """``section.key=value`` strings on top of ``values``."""
    out = dict(values)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not section.key=value")
        lhs, raw = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        if _KEY_SECTION.get(key) != section:
            raise ConfigError(f"unknown setting {lhs!r}")
        out[key] = _convert(key, raw)
    return out


def parse(text: str, overrides: list[str] | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    values: dict[str, object] = {}
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if _KEY_SECTION.get(key) != section:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[key] = _convert(key, raw)
    values = apply_overrides(values, overrides or [])
    return RunConfig(**values)


def load(path: str | Path | None, overrides: list[str] | None = None) -> RunConfig:
    if path is None:
        return parse("", overrides)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse(text, overrides)


def serialize(cfg: RunConfig) -> str:
    buf = io.StringIO()
    for section, keys in SECTIONS.items():
        buf.write(f"[{section}]\n")
        for key in keys:
            buf.write(f"{key} = {_format(getattr(cfg, key))}\n")
        buf.write("\n")
    return buf.getvalue()
