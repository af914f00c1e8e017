"""Run configuration: one JSON document drives the whole pipeline.

Every command reads the same RunConfig shape and uses the sections it
needs. Parsing is strict: an unknown key anywhere raises ConfigError
naming the offending key, so typos never silently fall back to defaults.
The recorded config never contains machine-specific paths, which keeps
output directories byte-reproducible across runs.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .motions import MOTION_KINDS


@dataclass(frozen=True)
class MotionSettings:
    """What to synthesize: catalog entries may repeat kinds."""

    catalog: tuple[str, ...] = ("walk", "arm-swing", "squat", "sit-stand")
    duration_s: float = 10.0
    rate_hz: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "catalog", tuple(self.catalog))
        if not self.catalog:
            raise ConfigError("motion catalog is empty")
        for kind in self.catalog:
            if kind not in MOTION_KINDS:
                raise ConfigError(
                    f"unknown motion kind {kind!r}; known: {', '.join(MOTION_KINDS)}"
                )
        if self.duration_s <= 0.0 or self.rate_hz <= 0.0:
            raise ConfigError("duration_s and rate_hz must be positive")


@dataclass(frozen=True)
class SkeletonSettings:
    height_m: float = 1.70

    def __post_init__(self):
        if not 1.0 <= self.height_m <= 2.5:
            raise ConfigError(f"body height {self.height_m} m outside 1.0..2.5")


@dataclass(frozen=True)
class ImuSettings:
    """Sensor noise plus the orientation-filter settings."""

    accel_sigma: float = 0.08
    gyro_sigma: float = 0.006
    accel_bias_sigma: float = 0.02
    gyro_bias_sigma: float = 0.001
    filter_gain: float = 5e-6
    tpose_seconds: float = 2.0

    def __post_init__(self):
        for name in ("accel_sigma", "gyro_sigma", "accel_bias_sigma", "gyro_bias_sigma"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"imu.{name} must be non-negative")
        if not 0.0 <= self.filter_gain <= 1.0:
            raise ConfigError("imu.filter_gain outside [0, 1]")
        if self.tpose_seconds < 1.0:
            raise ConfigError("imu.tpose_seconds must be at least 1 s")


@dataclass(frozen=True)
class UwbSettings:
    """Ranging noise, clock imperfections, and packet loss."""

    sigma_los: float = 0.051
    sigma_nlos: float = 0.083
    skew_ppm_sigma: float = 0.01
    offset_sigma: float = 1.0
    drop_prob: float = 0.05

    def __post_init__(self):
        for name in ("sigma_los", "sigma_nlos", "skew_ppm_sigma", "offset_sigma"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"uwb.{name} must be non-negative")
        if not 0.0 <= self.drop_prob < 1.0:
            raise ConfigError("uwb.drop_prob outside [0, 1)")


@dataclass(frozen=True)
class EkfSettings:
    """Pair-filter tuning shared by all 15 filters."""

    accel_noise: float = 0.3
    range_sigma: float = 0.06
    speed_sigma: float = 0.5
    speed_mode: str = "predicted"

    def __post_init__(self):
        if self.accel_noise <= 0.0 or self.range_sigma <= 0.0 or self.speed_sigma <= 0.0:
            raise ConfigError("ekf noise parameters must be positive")
        if self.speed_mode not in ("predicted", "range_rate"):
            raise ConfigError(f"unknown ekf.speed_mode {self.speed_mode!r}")


@dataclass(frozen=True)
class ModelSettings:
    """Network architecture plus how streams become training windows."""

    lstm_hidden: int = 128
    lstm_layers: int = 2
    gcn_width: int = 64
    gcn_layers: int = 2
    decoder_hidden: int = 64
    accel_low: float = 2.0
    accel_high: float = 8.0
    lambda_distance: float = 0.01
    window_frames: int = 48
    window_stride: int = 24

    def __post_init__(self):
        if self.window_frames < 1 or self.window_stride < 1:
            raise ConfigError("window_frames and window_stride must be >= 1")


@dataclass(frozen=True)
class TrainSettings:
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 1e-3
    lr_decay: float = 0.33
    lr_decay_every: int = 20
    val_fraction: float = 0.2


@dataclass(frozen=True)
class RunConfig:
    seed: int = 7
    output_dir: str | None = None
    motions: MotionSettings = field(default_factory=MotionSettings)
    skeleton: SkeletonSettings = field(default_factory=SkeletonSettings)
    imu: ImuSettings = field(default_factory=ImuSettings)
    uwb: UwbSettings = field(default_factory=UwbSettings)
    ekf: EkfSettings = field(default_factory=EkfSettings)
    model: ModelSettings = field(default_factory=ModelSettings)
    train: TrainSettings = field(default_factory=TrainSettings)

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["motions"]["catalog"] = list(self.motions.catalog)
        return doc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


_SECTIONS = {
    "motions": MotionSettings,
    "skeleton": SkeletonSettings,
    "imu": ImuSettings,
    "uwb": UwbSettings,
    "ekf": EkfSettings,
    "model": ModelSettings,
    "train": TrainSettings,
}


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"config section {path or 'root'} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown config key {where!r}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"bad config section {path or 'root'}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    """Strict parse of a full RunConfig document."""
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value, key)
        elif key in ("seed", "output_dir"):
            kwargs[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if "seed" in kwargs and not isinstance(kwargs["seed"], int):
        raise ConfigError(f"seed must be an integer, got {kwargs['seed']!r}")
    return RunConfig(**kwargs)


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from exc
    return config_from_dict(data)
