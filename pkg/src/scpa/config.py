"""Scenario configuration: JSON schema, defaults and validation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

from .core import SLOTS_PER_DAY

MODEL_TAGS = ("quad_total", "log_per_slot", "device_milp")


class ConfigError(ValueError):
    """Raised with every violation found; ``violations`` holds ``(path, message)`` pairs."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.violations))


@dataclass(frozen=True)
class QuadParams:
    omega_mean: float = 0.5
    omega_sd: float = 0.02
    alpha_mean: float = 0.1
    alpha_sd: float = 0.02
    lower_range: tuple[float, float] = (0.0, 0.02)
    upper_range: tuple[float, float] = (0.5, 4.0)


@dataclass(frozen=True)
class LogParams:
    alpha_mean: float = 3.0
    alpha_var: float = 0.1
    lower_range: tuple[float, float] = (0.0, 0.0)
    upper_range: tuple[float, float] = (0.0, 1.6)


@dataclass(frozen=True)
class DeviceParams:
    catalog: str | None = None
    min_devices: int = 3
    max_devices: int = 5
    offset_max: int = 2
    shift_max: int = 3


@dataclass(frozen=True)
class ShockParams:
    enabled: bool = True
    cost_log_sd: float = 0.05
    bound_log_sd: float = 1.0
    alpha_log_sd: float = 1.0
    bound_cap: float = 4.0
    uncontrolled_cv: float = 0.005


@dataclass(frozen=True)
class ClockConfig:
    initial_price: float = 0.40
    max_step: float = 0.01
    min_step: float = 1e-4
    discount: float = 0.25
    max_iterations: int = 50
    tolerance: float = 0.0
    rp_rule: str = "summed"


@dataclass(frozen=True)
class ProxyConfig:
    breakpoints: int = 5
    min_half_width: float = 0.01
    max_expansions: int = 6


@dataclass(frozen=True)
class ScenarioConfig:
    agents: dict = field(default_factory=lambda: {"quad_total": 334, "log_per_slot": 333, "device_milp": 333})
    cost_a: float = 0.002
    horizon: int = 48
    slot_duration: int = 30
    days: int = 1
    seed: int = 0
    uncontrolled: tuple[float, ...] | None = None
    time_preference_sd: float = 0.05
    workers: int = 1
    quad: QuadParams = QuadParams()
    log: LogParams = LogParams()
    devices: DeviceParams = DeviceParams()
    shocks: ShockParams = ShockParams()
    clock: ClockConfig = ClockConfig()
    proxy: ProxyConfig = ProxyConfig()

    @property
    def n_agents(self) -> int:
        return sum(self.agents.values())

    def uncontrolled_profile(self) -> tuple[float, ...]:
        return self.uncontrolled if self.uncontrolled is not None else default_uncontrolled()

    def with_overrides(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


def default_uncontrolled() -> tuple[float, ...]:
    """Synthetic daily uncontrolled-load profile (kWh per half hour)."""
    raw = json.loads(resources.files("scpa.data").joinpath("uncontrolled_load.json").read_text())
    return tuple(float(v) for v in raw["kwh"])


_SECTIONS = {
    "quad": QuadParams,
    "log": LogParams,
    "devices": DeviceParams,
    "shocks": ShockParams,
    "clock": ClockConfig,
    "proxy": ProxyConfig,
}


def _build(cls, raw, path, errors):
    if not isinstance(raw, dict):
        errors.append((path, "expected an object"))
        return cls()
    known = {f.name: f for f in fields(cls)}
    kw = {}
    for key, value in raw.items():
        if key not in known:
            errors.append((f"{path}.{key}" if path else key, "unknown key"))
            continue
        if key in _SECTIONS and cls is ScenarioConfig:
            kw[key] = _build(_SECTIONS[key], value, key, errors)
        elif isinstance(value, list):
            kw[key] = tuple(value)
        else:
            kw[key] = value
    return cls(**kw)


def _check(cfg: ScenarioConfig) -> list[tuple[str, str]]:
    errs = []

    def num(path, value, ok, msg):
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value) or not ok(value):
            errs.append((path, msg))

    if not isinstance(cfg.agents, dict):
        errs.append(("agents", "expected an object of model tag -> count"))
    else:
        for tag, count in cfg.agents.items():
            if tag not in MODEL_TAGS:
                errs.append((f"agents.{tag}", f"unknown agent model tag {tag!r} (expected one of {', '.join(MODEL_TAGS)})"))
            elif not isinstance(count, int) or isinstance(count, bool) or count < 0:
                errs.append((f"agents.{tag}", "count must be an integer >= 0"))
    num("cost_a", cfg.cost_a, lambda v: v > 0, "a must be > 0")
    num("horizon", cfg.horizon, lambda v: int(v) == v and v >= 1, "H must be an integer >= 1")
    num("slot_duration", cfg.slot_duration, lambda v: v > 0, "slot duration must be > 0")
    num("days", cfg.days, lambda v: int(v) == v and v >= 1, "days must be an integer >= 1")
    num("seed", cfg.seed, lambda v: int(v) == v and v >= 0, "seed must be a non-negative integer")
    num("time_preference_sd", cfg.time_preference_sd, lambda v: v >= 0, "must be >= 0")
    num("workers", cfg.workers, lambda v: int(v) == v and v >= 1, "workers must be an integer >= 1")
    if cfg.uncontrolled is not None:
        if len(cfg.uncontrolled) != SLOTS_PER_DAY:
            errs.append(("uncontrolled", f"expected {SLOTS_PER_DAY} values, got {len(cfg.uncontrolled)}"))
        for i, v in enumerate(cfg.uncontrolled):
            num(f"uncontrolled[{i}]", v, lambda x: x >= 0, "load must be >= 0")
    c = cfg.clock
    num("clock.max_step", c.max_step, lambda v: v > 0, "δ̄ must be > 0")
    num("clock.min_step", c.min_step, lambda v: 0 <= v <= c.max_step if isinstance(c.max_step, (int, float)) else True,
        "min_step must lie in [0, δ̄]")
    num("clock.initial_price", c.initial_price, lambda v: v >= 0, "initial price must be >= 0")
    num("clock.discount", c.discount, lambda v: 0 <= v < 1, "discount must lie in [0, 1)")
    num("clock.max_iterations", c.max_iterations, lambda v: int(v) == v and v >= 1, "max iterations must be >= 1")
    num("clock.tolerance", c.tolerance, lambda v: v >= 0, "tolerance must be >= 0")
    if c.rp_rule not in ("summed", "literal"):
        errs.append(("clock.rp_rule", "expected 'summed' or 'literal'"))
    p = cfg.proxy
    num("proxy.breakpoints", p.breakpoints, lambda v: int(v) == v and v >= 2, "breakpoint count must be >= 2")
    num("proxy.min_half_width", p.min_half_width, lambda v: v > 0, "must be > 0")
    num("proxy.max_expansions", p.max_expansions, lambda v: int(v) == v and v >= 0, "must be >= 0")
    s = cfg.shocks
    for name in ("cost_log_sd", "bound_log_sd", "alpha_log_sd", "uncontrolled_cv"):
        num(f"shocks.{name}", getattr(s, name), lambda v: v >= 0, "must be >= 0")
    num("shocks.bound_cap", s.bound_cap, lambda v: v > 0, "must be > 0")
    q = cfg.quad
    num("quad.alpha_mean", q.alpha_mean, lambda v: v > 0, "alpha must be > 0")
    for name in ("omega_sd", "alpha_sd"):
        num(f"quad.{name}", getattr(q, name), lambda v: v >= 0, "must be >= 0")
    num("log.alpha_mean", cfg.log.alpha_mean, lambda v: v > 0, "alpha must be > 0")
    num("log.alpha_var", cfg.log.alpha_var, lambda v: v >= 0, "variance must be >= 0")
    for sec, name in (("quad", "lower_range"), ("quad", "upper_range"), ("log", "lower_range"), ("log", "upper_range")):
        rng = getattr(getattr(cfg, sec), name)
        if len(rng) != 2 or not all(isinstance(v, (int, float)) for v in rng) or rng[0] > rng[1] or rng[0] < 0:
            errs.append((f"{sec}.{name}", "expected [low, high] with 0 <= low <= high"))
    for sec in ("quad", "log"):
        params = getattr(cfg, sec)
        if not errs and params.lower_range[1] > params.upper_range[0]:
            errs.append((f"{sec}.lower_range", "lower bounds may exceed upper bounds"))
    d = cfg.devices
    if not (isinstance(d.min_devices, int) and isinstance(d.max_devices, int) and 1 <= d.min_devices <= d.max_devices):
        errs.append(("devices.min_devices", "need 1 <= min_devices <= max_devices"))
    for name in ("offset_max", "shift_max"):
        num(f"devices.{name}", getattr(d, name), lambda v: int(v) == v and v >= 0, "must be an integer >= 0")
    return errs


def validate_scenario(raw: dict) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from parsed JSON, filling defaults.

    Raises :class:`ConfigError` listing every violation with its field path.
    """
    errors: list[tuple[str, str]] = []
    if not isinstance(raw, dict):
        raise ConfigError([("", "scenario must be a JSON object")])
    try:
        cfg = _build(ScenarioConfig, raw, "", errors)
    except TypeError as exc:  # malformed nested value
        raise ConfigError(errors + [("", str(exc))]) from None
    if isinstance(cfg.agents, dict):
        cfg = replace(cfg, agents={**{t: 0 for t in MODEL_TAGS}, **cfg.agents})
    if cfg.uncontrolled is not None and not isinstance(cfg.uncontrolled, tuple):
        errors.append(("uncontrolled", "expected a list of 48 numbers"))
    errors += _check(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([("config", f"file not found: {path}")])
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([("config", f"{path}: invalid JSON ({exc})")]) from None
    return validate_scenario(raw)


def default_scenario() -> ScenarioConfig:
    raw = json.loads(resources.files("scpa.data").joinpath("default_scenario.json").read_text())
    return validate_scenario(raw)


def scenario_to_json(cfg: ScenarioConfig) -> str:
    return json.dumps(asdict(cfg), indent=2, ensure_ascii=False)
