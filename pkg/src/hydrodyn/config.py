"""Run configuration: one JSON document, validated into dataclasses before any run."""

from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .baselines import DEFAULT_LR
from .control import DEFAULT_POSITION_GAINS, DEFAULT_TORQUE_GAINS, LoopConfig, PidGains
from .errors import ConfigError, HydrodynError
from .oracle import CylinderParams, RigParams
from .rewards import RewardCoeffs
from .scenarios import TYPE_RIGS, CommandProfile


@dataclass(frozen=True)
class Scenario:
    profile: CommandProfile = field(default_factory=CommandProfile)
    duration: float = 20.0
    seed: int = 0
    tau_noise: float = 0.0
    q_noise: float = 0.0


def _default_scenarios() -> dict[str, Scenario]:
    walk = CommandProfile(speed=1.0, impact_rate=0.5, impact_torque=100.0)
    return {
        # fitting/training data: slow walking, no impacts
        "train": Scenario(CommandProfile(speed=0.4), 20.0, seed=11, tau_noise=0.5),
        "holdout": Scenario(CommandProfile(speed=0.4), 20.0, seed=12, tau_noise=0.5),
        "impact": Scenario(CommandProfile(speed=1.0, impact_rate=3.0, impact_torque=300.0),
                           20.0, seed=13, tau_noise=0.5),
        "cmd_0.4": Scenario(CommandProfile(speed=0.4, impact_rate=0.5, impact_torque=100.0),
                            10.0, seed=21, tau_noise=0.5),
        "cmd_1.0_1": Scenario(walk, 10.0, seed=22, tau_noise=0.5),
        "cmd_1.0_2": Scenario(walk, 10.0, seed=23, tau_noise=0.5),
        "cmd_1.0_3": Scenario(walk, 10.0, seed=24, tau_noise=0.5),
        "cmd_1.0_4": Scenario(walk, 10.0, seed=25, tau_noise=0.5),
    }


@dataclass(frozen=True)
class FitOptions:
    ridge: float = 0.0


@dataclass(frozen=True)
class BaselineOptions:
    archs: tuple[str, ...] = ("mlp", "lstm", "gru")
    iters: int = 1000
    lr: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_LR))
    seed: int = 0


@dataclass(frozen=True)
class BenchOptions:
    iters: int = 1_000_000
    batch: int = 1000
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    cylinder: CylinderParams = field(default_factory=CylinderParams)
    rigs: dict[str, RigParams] = field(default_factory=lambda: dict(TYPE_RIGS))
    position_gains: PidGains = DEFAULT_POSITION_GAINS
    torque_gains: PidGains = DEFAULT_TORQUE_GAINS
    loop: LoopConfig = field(default_factory=LoopConfig)
    scenarios: dict[str, Scenario] = field(default_factory=_default_scenarios)
    train_scenario: str = "train"
    holdout_scenario: str = "holdout"
    ood_scenario: str = "impact"
    eval_scenarios: tuple[str, ...] = ("cmd_0.4", "cmd_1.0_1", "cmd_1.0_2", "cmd_1.0_3", "cmd_1.0_4")
    fitting: FitOptions = field(default_factory=FitOptions)
    baselines: BaselineOptions = field(default_factory=BaselineOptions)
    rewards: RewardCoeffs = field(default_factory=RewardCoeffs)
    bench: BenchOptions = field(default_factory=BenchOptions)
    seed: int = 0

    def validate(self) -> None:
        for name in (self.train_scenario, self.holdout_scenario, self.ood_scenario,
                     *self.eval_scenarios):
            if name not in self.scenarios:
                raise ConfigError(f"scenario {name!r} is not defined")
        for s in self.scenarios.values():
            s.profile.validate()
            if s.duration <= 0:
                raise ConfigError("scenario duration must be > 0")
        if set(self.rigs) != {"roll", "pitch", "knee"}:
            raise ConfigError("rigs must define roll, pitch and knee")
        for rp in self.rigs.values():
            rp.check_stroke(self.cylinder)
        for a in self.baselines.archs:
            if a not in ("mlp", "lstm", "gru"):
                raise ConfigError(f"unknown baseline architecture {a!r}")
        if self.baselines.iters < 1:
            raise ConfigError("baseline iters must be >= 1")


# --- (de)serialisation ------------------------------------------------------------

def _build(tp, value, path: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object")
        hints = typing.get_type_hints(tp)
        names = {f.name for f in dataclasses.fields(tp)}
        unknown = set(value) - names
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        kwargs = {k: _build(hints[k], v, f"{path}.{k}") for k, v in value.items()}
        try:
            return tp(**kwargs)
        except HydrodynError as e:
            raise ConfigError(f"{path}: {e}") from None
    if origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object")
        return {k: _build(args[1], v, f"{path}.{k}") for k, v in value.items()}
    if origin is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        inner = args[0]
        return tuple(_build(inner, v, f"{path}[{i}]") for i, v in enumerate(value))
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _build(inner, value, path)
    if origin is typing.Literal:
        if value not in args:
            raise ConfigError(f"{path}: must be one of {args}")
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    raise ConfigError(f"{path}: unsupported type {tp}")


def config_from_dict(d: dict) -> RunConfig:
    """Build a config; keys not given keep their defaults (top-level and nested)."""
    base = config_to_dict(RunConfig())
    merged = _merge(base, d)
    cfg = _build(RunConfig, merged, "config")
    cfg.validate()
    return cfg


def _merge(base, override):
    if isinstance(base, dict) and isinstance(override, dict):
        out = dict(base)
        for k, v in override.items():
            # scenario/rig maps are replaced per entry, other objects merged key-wise
            out[k] = _merge(base[k], v) if k in base else v
        return out
    return override


def config_to_dict(cfg) -> dict:
    def conv(v):
        if dataclasses.is_dataclass(v):
            return {f.name: conv(getattr(v, f.name)) for f in dataclasses.fields(v)}
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        if isinstance(v, (tuple, list)):
            return [conv(x) for x in v]
        return v
    return conv(cfg)


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return config_from_dict(data)


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"
