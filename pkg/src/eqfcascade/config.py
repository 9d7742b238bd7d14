"""Scenario configuration and its flat key-value file format.

The file format is one `key = value` pair per line with `#` comments.
Pairs of numbers (ranges) and 3-vectors are whitespace separated. Every
field has a default, so an empty file is a valid configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .filter_base import FilterGains
from .models import SensorConfig

INPUT_MODES = ("unbiased_cascade", "biased_passthrough")


class ConfigError(ValueError):
    """Malformed configuration file or inconsistent field values."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a simulation run needs besides the per-run RNG stream.

    Angles are degrees in the `_deg`/`_dps` fields and radians elsewhere;
    rates are Hz. `attitude_init_max_deg` bounds the initial chaser and
    relative attitudes away from identity for convergence studies; when
    None both attitudes are uniformly random on SO(3).
    """

    seed: int = 0
    duration_s: float = 15.0
    gyro_rate_hz: float = 100.0
    star_rate_hz: float = 1.0
    feature_rate_hz: float = 10.0
    update_iterations: int = 20
    state_gain: float = 1.0
    output_gain: float = 0.1
    sigma0: float = 1.0
    gyro_noise_std: float = 0.01
    direction_noise_std: float = 0.01
    omega_target_range_dps: tuple[float, float] = (0.5, 3.0)
    chaser_rate_range_dps: tuple[float, float] = (0.5, 3.0)
    gyro_bias_range_dps: tuple[float, float] = (0.5, 2.0)
    attitude_init_max_deg: float | None = None
    input_mode: str = "unbiased_cascade"
    ref_dir_1: tuple[float, float, float] = (1.0, 0.0, 0.0)
    ref_dir_2: tuple[float, float, float] = (0.0, 1.0, 0.0)

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ConfigError("duration_s must be positive")
        if self.update_iterations < 1:
            raise ConfigError("update_iterations must be >= 1")
        if self.gyro_noise_std < 0 or self.direction_noise_std < 0:
            raise ConfigError("noise levels must be non-negative")
        if self.input_mode not in INPUT_MODES:
            raise ConfigError(f"input_mode must be one of {INPUT_MODES}")
        for name in ("gyro_rate_hz", "star_rate_hz", "feature_rate_hz"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("star_rate_hz", "feature_rate_hz"):
            ratio = self.gyro_rate_hz / getattr(self, name)
            if abs(ratio - round(ratio)) > 1e-9:
                raise ConfigError(f"{name} must divide gyro_rate_hz evenly")
        for name in ("omega_target_range_dps", "chaser_rate_range_dps", "gyro_bias_range_dps"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ConfigError(f"{name} must satisfy 0 <= lo <= hi")
        d1 = np.asarray(self.ref_dir_1, dtype=float)
        d2 = np.asarray(self.ref_dir_2, dtype=float)
        if np.linalg.norm(np.cross(d1, d2)) <= 1e-3:
            raise ConfigError("reference directions are (nearly) collinear")

    def sensors(self) -> SensorConfig:
        return SensorConfig(
            gyro_noise_std=self.gyro_noise_std,
            direction_noise_std=self.direction_noise_std,
            gyro_rate=self.gyro_rate_hz,
            star_rate=self.star_rate_hz,
            feature_rate=self.feature_rate_hz,
        )

    def stage1_gains(self) -> FilterGains:
        return FilterGains.identity_scaled(
            9, self.state_gain, self.output_gain, self.sigma0, self.update_iterations
        )

    def stage2_gains(self) -> FilterGains:
        return FilterGains.identity_scaled(
            6, self.state_gain, self.output_gain, self.sigma0, self.update_iterations
        )

    def ref_dirs(self) -> tuple[np.ndarray, np.ndarray]:
        d1 = np.asarray(self.ref_dir_1, dtype=float)
        d2 = np.asarray(self.ref_dir_2, dtype=float)
        return d1 / np.linalg.norm(d1), d2 / np.linalg.norm(d2)

    def steps_per_run(self) -> int:
        return round(self.duration_s * self.gyro_rate_hz)

    def star_every(self) -> int:
        return round(self.gyro_rate_hz / self.star_rate_hz)

    def feature_every(self) -> int:
        return round(self.gyro_rate_hz / self.feature_rate_hz)


_INT_FIELDS = {"seed", "update_iterations"}
_FLOAT_FIELDS = {
    "duration_s",
    "gyro_rate_hz",
    "star_rate_hz",
    "feature_rate_hz",
    "state_gain",
    "output_gain",
    "sigma0",
    "gyro_noise_std",
    "direction_noise_std",
}
_PAIR_FIELDS = {"omega_target_range_dps", "chaser_rate_range_dps", "gyro_bias_range_dps"}
_VEC3_FIELDS = {"ref_dir_1", "ref_dir_2"}
_OPTIONAL_FLOAT_FIELDS = {"attitude_init_max_deg"}
_STR_FIELDS = {"input_mode"}


def _parse_value(key: str, raw: str, line_no: int):
    def fail(expected: str):
        raise ConfigError(f"line {line_no}: field '{key}' expects {expected}, got '{raw}'")

    parts = raw.split()
    try:
        if key in _INT_FIELDS:
            return int(raw)
        if key in _FLOAT_FIELDS:
            return float(raw)
        if key in _OPTIONAL_FLOAT_FIELDS:
            return None if raw.lower() in ("none", "") else float(raw)
        if key in _PAIR_FIELDS:
            if len(parts) != 2:
                fail("two numbers")
            return (float(parts[0]), float(parts[1]))
        if key in _VEC3_FIELDS:
            if len(parts) != 3:
                fail("three numbers")
            return (float(parts[0]), float(parts[1]), float(parts[2]))
        if key in _STR_FIELDS:
            return raw
    except ValueError:
        fail("a number")
    raise ConfigError(f"line {line_no}: unknown field '{key}'")


def read_config(path) -> ScenarioConfig:
    """Parse a flat key-value configuration file; unset fields keep defaults."""
    values = {}
    known = {f.name for f in fields(ScenarioConfig)}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"line {line_no}: expected 'key = value', got '{stripped}'")
            key, raw = (s.strip() for s in stripped.split("=", 1))
            if key not in known:
                raise ConfigError(f"line {line_no}: unknown field '{key}'")
            values[key] = _parse_value(key, raw, line_no)
    try:
        return ScenarioConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return " ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_config(cfg: ScenarioConfig, path) -> None:
    """Write every field so that read_config round-trips exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# scenario configuration\n")
        for f in fields(ScenarioConfig):
            fh.write(f"{f.name} = {_format_value(getattr(cfg, f.name))}\n")


def apply_overrides(cfg: ScenarioConfig, **overrides) -> ScenarioConfig:
    """Replace fields given as non-None keyword values."""
    actual = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **actual) if actual else cfg
