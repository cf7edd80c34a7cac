"""Experiment configuration and its JSON loader."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

__all__ = [
    "ConfigError",
    "MemoryConfig",
    "FiberConfig",
    "DetectorConfig",
    "PhaseSweepConfig",
    "ExperimentConfig",
    "load_config",
    "config_from_dict",
]


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class MemoryConfig:
    mode_number: int = 100
    eta_abs: float = 0.35
    eta_ret: float = 1.0
    storage_time_ps: int | None = None  # None: right after the pulse train (a full cycle when measured)
    reemission_order: str = "same"


@dataclass(frozen=True)
class FiberConfig:
    length_km: float = 20.0
    attenuation_db_per_km: float = 0.2
    refractive_index: float = 1.47


@dataclass(frozen=True)
class DetectorConfig:
    efficiency: float = 0.6
    dark_count_hz: float = 150.0
    window_ps: int | None = None  # None: one source period


@dataclass(frozen=True)
class PhaseSweepConfig:
    n_steps: int = 16
    trials_per_phase: int | None = None  # None: same as ExperimentConfig.trials


@dataclass(frozen=True)
class ExperimentConfig:
    truncation: int = 2
    mu1: float = 0.1
    mu2: float = 0.1
    frequency_hz: float = 5e7
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    fiber: FiberConfig = field(default_factory=FiberConfig)
    detectors: DetectorConfig = field(default_factory=DetectorConfig)
    phase_sweep: PhaseSweepConfig = field(default_factory=PhaseSweepConfig)
    trials: int = 1000
    seed: int = 0
    delta_phi: float = 0.0

    def __post_init__(self):
        validate(self)

    def replace(self, **changes) -> "ExperimentConfig":
        """Copy with top-level fields or dotted nested fields (``"memory.mode_number"``) changed."""
        nested: dict[str, dict[str, Any]] = {}
        top = {}
        for name, value in changes.items():
            if "." in name:
                section, sub = name.split(".", 1)
                nested.setdefault(section, {})[sub] = value
            else:
                top[name] = value
        for section, subs in nested.items():
            top[section] = dataclasses.replace(top.get(section, getattr(self, section)), **subs)
        return dataclasses.replace(self, **top)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _unit(path: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ConfigError(path, f"must lie in [0, 1], got {value!r}")


def _positive(path: str, value: float, strict: bool = True) -> None:
    if not math.isfinite(value) or value < 0 or (strict and value == 0):
        raise ConfigError(path, f"must be {'positive' if strict else 'non-negative'}, got {value!r}")


def validate(cfg: ExperimentConfig) -> None:
    if not isinstance(cfg.truncation, int) or cfg.truncation < 1:
        raise ConfigError("truncation", f"must be an integer >= 1, got {cfg.truncation!r}")
    _positive("mu1", cfg.mu1, strict=False)
    _positive("mu2", cfg.mu2, strict=False)
    _positive("frequency_hz", cfg.frequency_hz)
    m = cfg.memory
    if not isinstance(m.mode_number, int) or m.mode_number < 1:
        raise ConfigError("memory.mode_number", f"must be an integer >= 1, got {m.mode_number!r}")
    _unit("memory.eta_abs", m.eta_abs)
    _unit("memory.eta_ret", m.eta_ret)
    if m.storage_time_ps is not None:
        _positive("memory.storage_time_ps", m.storage_time_ps)
    if m.reemission_order not in ("same", "reversed"):
        raise ConfigError("memory.reemission_order", f"must be 'same' or 'reversed', got {m.reemission_order!r}")
    _positive("fiber.length_km", cfg.fiber.length_km, strict=False)
    _positive("fiber.attenuation_db_per_km", cfg.fiber.attenuation_db_per_km, strict=False)
    _positive("fiber.refractive_index", cfg.fiber.refractive_index)
    _unit("detectors.efficiency", cfg.detectors.efficiency)
    _positive("detectors.dark_count_hz", cfg.detectors.dark_count_hz, strict=False)
    if cfg.detectors.window_ps is not None:
        _positive("detectors.window_ps", cfg.detectors.window_ps)
    if not isinstance(cfg.phase_sweep.n_steps, int) or cfg.phase_sweep.n_steps < 3:
        raise ConfigError("phase_sweep.n_steps", f"must be an integer >= 3, got {cfg.phase_sweep.n_steps!r}")
    tpp = cfg.phase_sweep.trials_per_phase
    if tpp is not None and (not isinstance(tpp, int) or tpp < 1):
        raise ConfigError("phase_sweep.trials_per_phase", f"must be an integer >= 1, got {tpp!r}")
    if not isinstance(cfg.trials, int) or cfg.trials < 1:
        raise ConfigError("trials", f"must be an integer >= 1, got {cfg.trials!r}")
    if not isinstance(cfg.seed, int):
        raise ConfigError("seed", f"must be an integer, got {cfg.seed!r}")


_SECTIONS = {
    "memory": MemoryConfig,
    "fiber": FiberConfig,
    "detectors": DetectorConfig,
    "phase_sweep": PhaseSweepConfig,
}


def _build(cls, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(prefix or "<root>", "must be an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in names:
            raise ConfigError(path, "unknown field")
        if key in _SECTIONS and not prefix:
            value = _build(_SECTIONS[key], value, key)
        elif isinstance(value, bool) or not isinstance(value, (int, float, str, type(None))):
            raise ConfigError(path, f"unsupported value {value!r}")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(prefix or "<root>", str(exc)) from None


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build a config from parsed JSON; missing fields take their defaults."""
    return _build(ExperimentConfig, data, "")


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from None
    if not text.strip():
        return ExperimentConfig()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    return config_from_dict(data)
