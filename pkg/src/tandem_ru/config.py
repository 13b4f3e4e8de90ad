"""Experiment configuration: nested dataclasses loaded from a single JSON file.

Unknown keys are rejected at every nesting level so that a typo never
silently falls back to a default.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised when a config document cannot be parsed into an ExperimentConfig."""


# 4x4 grid of (azimuth, elevation) offsets in degrees, azimuth-major.
DEFAULT_IBBC_AZIMUTHS_DEG = (-60.0, -20.0, 20.0, 60.0)
DEFAULT_IBBC_ELEVATIONS_DEG = (-45.0, -15.0, 15.0, 45.0)


def _default_ibbc_grid() -> list[list[float]]:
    return [[az, el] for az in DEFAULT_IBBC_AZIMUTHS_DEG for el in DEFAULT_IBBC_ELEVATIONS_DEG]


def _default_rus() -> list[NodeConfig]:
    return [
        NodeConfig(position=[x, y, 3.0], facing=[0.0, 0.0, -1.0])
        for y in (1.0, 2.5, 4.0)
        for x in (1.5, 4.0, 6.5)
    ]


@dataclass
class RoomConfig:
    length_m: float = 8.0
    width_m: float = 5.0
    height_m: float = 3.0


@dataclass
class NodeConfig:
    position: list[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    facing: list[float] = field(default_factory=lambda: [0.0, 0.0, 1.0])


@dataclass
class UeGridConfig:
    pitch_m: float = 0.5
    margin_m: float = 0.5
    height_m: float = 1.5


@dataclass
class UraConfig:
    rows: int = 2
    cols: int = 2
    element_spacing: float = 0.5  # wavelengths
    element_exponent: float = 1.0
    front_to_back_db: float = 30.0


@dataclass
class DatasetConfig:
    seed: int = 7
    per_position: int = 4
    max_tilt_deg: float = 30.0  # bound on |roll| and |pitch|
    max_yaw_deg: float = 180.0  # yaw uniform in [-max, max); 180 is a full turn
    split_ratio: float = 0.8


@dataclass
class FeatureConfig:
    floor_db: float = -160.0
    ceil_db: float = -40.0


@dataclass
class TrainSettings:
    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 300
    batch_size: int = 32
    seed: int = 0
    init_scale: float = 1.0


@dataclass
class ExperimentConfig:
    room: RoomConfig = field(default_factory=RoomConfig)
    ap: NodeConfig = field(
        default_factory=lambda: NodeConfig(position=[4.0, 0.0, 2.5], facing=[0.0, 1.0, 0.0])
    )
    rus: list[NodeConfig] = field(default_factory=_default_rus)
    ue_grid: UeGridConfig = field(default_factory=UeGridConfig)
    freq_low_hz: float = 5.8e9
    freq_high_hz: float = 100e9
    tx_power_dbm_low: float = 20.0
    tx_power_dbm_high: float = 10.0
    # thermal noise over 100 MHz / 500 MHz plus 7 dB / 10 dB noise figure
    noise_power_dbm_low: float = -87.0
    noise_power_dbm_high: float = -77.0
    reflection_coeff_low: float = 0.6
    reflection_coeff_high: float = 0.25
    max_order_low: int = 2
    max_order_high: int = 1
    n_taps_low: int = 64
    tap_spacing_s_low: float = 10e-9
    n_taps_high: int = 64
    tap_spacing_s_high: float = 2e-9
    ura: UraConfig = field(default_factory=UraConfig)
    ibbc_grid_deg: list[list[float]] = field(default_factory=_default_ibbc_grid)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    train: TrainSettings = field(default_factory=TrainSettings)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        return _build(cls, data, "")

    @classmethod
    def from_json(cls, text: str) -> ExperimentConfig:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def _build(cls: type, data: Any, path: str) -> Any:
    if not isinstance(data, dict):
        raise ConfigError(f"{path or '<root>'}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = path or "<root>"
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        kwargs[name] = _coerce(hints[name], value, f"{path}.{name}" if path else name)
    return cls(**kwargs)


def _coerce(tp: Any, value: Any, path: str) -> Any:
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        (item_tp,) = typing.get_args(tp)
        return [_coerce(item_tp, v, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    raise ConfigError(f"{path}: unsupported type {tp!r}")


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Read a config file, or return the defaults when `path` is None."""
    if path is None:
        return ExperimentConfig()
    return ExperimentConfig.from_json(Path(path).read_text())


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(config.to_json())
