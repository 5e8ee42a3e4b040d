"""Plain ``key=value`` scenario configuration."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .errors import ParseError, RangeError
from .nonlinearity import FAMILIES, DiffusionSpec

INITIAL_SHAPES = ("bump", "cosine")


@dataclass
class ScenarioConfig:
    family: str = "power"
    p: float = 1.0
    alpha: float = 1.0
    C: float = 1.0
    M: float = 1.0
    m0: float = 0.05
    delta: float = 0.02
    initial: str = "bump"
    amplitude: float = 0.5          # cosine data: u0 = M (1 + amplitude cos(pi x))
    Nu: int = 256
    Nf: int = 256
    T: float = 10.0
    q: float = 3.0
    safety: float = 0.4
    u_cap: float = 1e8
    u_cap_grid: float = 0.5
    f_floor: float = 1e-8
    dt_min: float = 1e-14
    dt_max: float = 1e-2
    sample_interval: float = 0.01
    snapshot_interval: float = 1.0
    primal_scheme: str = "imex"
    seed: int = 42
    out: str = "out"
    track_lyapunov: bool = True

    def spec(self) -> DiffusionSpec:
        if self.family == "power":
            return DiffusionSpec.power(self.p, self.C)
        if self.family == "log":
            return DiffusionSpec.log(self.alpha, self.C)
        if self.family == "inverse":
            return DiffusionSpec.inverse(self.C)
        raise RangeError("family", "custom families cannot be configured from text")

    def replace(self, **changes) -> "ScenarioConfig":
        new = dataclasses.replace(self, **changes)
        validate(new)
        return new

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in dataclasses.fields(self))


_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
_ALIASES = {"N": ("Nu", "Nf")}


def _convert(name: str, raw: str, line: int):
    kind = _FIELDS[name].type
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ParseError(line, f"cannot read {raw!r} as {kind} for key {name!r}") from None
    return raw


def _require(cond: bool, key: str, msg: str) -> None:
    if not cond:
        raise RangeError(key, msg)


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, float):
            _require(not math.isnan(v), f.name, "must be a number")
    _require(cfg.family in FAMILIES and cfg.family != "custom", "family",
             "must be one of power, log, inverse")
    _require(math.isfinite(cfg.p), "p", "must be finite")
    _require(math.isfinite(cfg.alpha), "alpha", "must be finite")
    _require(cfg.C > 0, "C", "must be positive")
    _require(cfg.M > 0, "M", "must be positive")
    _require(0 < cfg.m0 <= cfg.M, "m0", "must satisfy 0 < m0 <= M")
    _require(cfg.delta > 0, "delta", "must be positive")
    _require(cfg.initial in INITIAL_SHAPES, "initial", f"must be one of {INITIAL_SHAPES}")
    _require(0 <= cfg.amplitude < 1, "amplitude", "must lie in [0, 1)")
    _require(cfg.Nu >= 8, "Nu", "need at least 8 cells")
    _require(cfg.Nf >= 8, "Nf", "need at least 8 cells")
    _require(cfg.T > 0 and math.isfinite(cfg.T), "T", "must be positive and finite")
    _require(cfg.q > 2, "q", "must exceed 2")
    _require(0 < cfg.safety <= 1, "safety", "must lie in (0, 1]")
    _require(cfg.u_cap > 0, "u_cap", "must be positive")
    _require(cfg.u_cap_grid > 0, "u_cap_grid", "must be positive")
    _require(0 < cfg.f_floor < 1, "f_floor", "must lie in (0, 1)")
    _require(cfg.dt_min >= 0, "dt_min", "must be non-negative")
    _require(cfg.dt_max > cfg.dt_min, "dt_max", "must exceed dt_min")
    _require(cfg.sample_interval >= 0, "sample_interval", "must be non-negative")
    _require(cfg.snapshot_interval >= 0, "snapshot_interval", "must be non-negative")
    _require(cfg.primal_scheme in ("imex", "explicit"), "primal_scheme", "must be imex or explicit")
    return cfg


def parse_config(text: str) -> ScenarioConfig:
    """Read ``key=value`` lines; ``#`` starts a comment, blank lines are skipped."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(lineno, f"expected key=value, got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not val:
            raise ParseError(lineno, f"missing value for {key!r}")
        targets = _ALIASES.get(key, (key,))
        for name in targets:
            if name not in _FIELDS:
                raise ParseError(lineno, f"unknown key {key!r}")
            values[name] = _convert(name, val, lineno)
    return validate(ScenarioConfig(**values))


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
