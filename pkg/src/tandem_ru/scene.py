"""Deployment geometry: room, low-band AP, ceiling RUs and the UE grid."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .arrays import UraSpec
from .config import ConfigError, ExperimentConfig

UNIT_TOL = 1e-9
POS_TOL = 1e-12


class Band(enum.Enum):
    LOW = "low"
    HIGH = "high"


@dataclass(frozen=True)
class RoomSpec:
    length_m: float
    width_m: float
    height_m: float

    @property
    def dims(self) -> np.ndarray:
        return np.array([self.length_m, self.width_m, self.height_m])

    def contains(self, point, tol: float = POS_TOL) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= -tol) and np.all(p <= self.dims + tol))


@dataclass(frozen=True)
class NodeSpec:
    position: tuple[float, float, float]
    facing: tuple[float, float, float]
    band: Band


@dataclass(frozen=True)
class BandParams:
    """Radio and tracing parameters of one band."""

    freq_hz: float
    tx_power_dbm: float
    noise_power_dbm: float
    reflection_coeff: float
    max_order: int
    n_taps: int
    tap_spacing_s: float


@dataclass(frozen=True)
class Scene:
    room: RoomSpec
    ap: NodeSpec
    rus: tuple[NodeSpec, ...]
    ue_positions: np.ndarray  # (n_ue, 3), read-only
    ura: UraSpec
    low: BandParams
    high: BandParams

    @property
    def n_ru(self) -> int:
        return len(self.rus)

    @property
    def freq_low_hz(self) -> float:
        return self.low.freq_hz

    @property
    def freq_high_hz(self) -> float:
        return self.high.freq_hz

    @property
    def tx_power_dbm_low(self) -> float:
        return self.low.tx_power_dbm

    @property
    def tx_power_dbm_high(self) -> float:
        return self.high.tx_power_dbm

    @property
    def noise_power_dbm_low(self) -> float:
        return self.low.noise_power_dbm

    @property
    def noise_power_dbm_high(self) -> float:
        return self.high.noise_power_dbm

    def band(self, band: Band) -> BandParams:
        return self.low if band is Band.LOW else self.high

    def to_dict(self) -> dict:
        def node(n: NodeSpec) -> dict:
            return {"position": list(n.position), "facing": list(n.facing), "band": n.band.value}

        return {
            "room": [self.room.length_m, self.room.width_m, self.room.height_m],
            "ap": node(self.ap),
            "rus": [node(r) for r in self.rus],
            "ue_positions": self.ue_positions.tolist(),
            "ura": [self.ura.rows, self.ura.cols, self.ura.element_spacing],
            "low": vars(self.low),
            "high": vars(self.high),
        }


def ue_grid(room: RoomSpec, pitch: float, margin: float, height: float) -> np.ndarray:
    """Grid points at least `margin` from every vertical wall, x-major order."""

    def axis(extent: float) -> np.ndarray:
        span = extent - 2 * margin
        if span < -POS_TOL:
            return np.empty(0)
        count = int(math.floor(span / pitch + 1e-9)) + 1
        return margin + pitch * np.arange(count)

    xs, ys = axis(room.length_m), axis(room.width_m)
    grid = np.array([(x, y, height) for x in xs for y in ys], dtype=float).reshape(-1, 3)
    return grid


def _is_unit(v) -> bool:
    return abs(float(np.linalg.norm(v)) - 1.0) <= UNIT_TOL


def validate_config(config: ExperimentConfig) -> list[str]:
    """Return every invariant violation; an empty list means the config is usable."""
    out: list[str] = []
    room = config.room
    for name in ("length_m", "width_m", "height_m"):
        if not getattr(room, name) > 0:
            out.append(f"room.{name}: must be > 0")
    dims_ok = all(getattr(room, n) > 0 for n in ("length_m", "width_m", "height_m"))
    room_spec = RoomSpec(room.length_m, room.width_m, room.height_m)

    def check_node(node, label: str) -> None:
        if len(node.position) != 3:
            out.append(f"{label}.position: expected 3 coordinates")
        elif dims_ok and not room_spec.contains(node.position):
            out.append(f"{label}.position: {node.position} lies outside the room")
        if len(node.facing) != 3:
            out.append(f"{label}.facing: expected 3 components")
        elif not _is_unit(node.facing):
            out.append(f"{label}.facing: not a unit vector (|f| = {np.linalg.norm(node.facing):.12g})")

    check_node(config.ap, "ap")
    if not config.rus:
        out.append("rus: at least one RU required")
    for i, ru in enumerate(config.rus):
        check_node(ru, f"rus[{i}]")

    grid = config.ue_grid
    if not grid.pitch_m > 0:
        out.append("ue_grid.pitch_m: must be > 0")
    if not grid.margin_m >= 0:
        out.append("ue_grid.margin_m: must be >= 0")
    if dims_ok:
        if not 0 < grid.height_m < room.height_m:
            out.append(f"ue_grid.height_m: {grid.height_m} not strictly inside room height {room.height_m}")
        elif grid.pitch_m > 0 and grid.margin_m >= 0:
            if 2 * grid.margin_m > min(room.length_m, room.width_m) + POS_TOL:
                out.append("ue_grid.margin_m: margins leave no room for UE positions")

    for band in ("low", "high"):
        if not getattr(config, f"freq_{band}_hz") > 0:
            out.append(f"freq_{band}_hz: must be > 0")
        gamma = getattr(config, f"reflection_coeff_{band}")
        if not 0 <= gamma <= 1:
            out.append(f"reflection_coeff_{band}: must lie in [0, 1]")
        if not 0 <= getattr(config, f"max_order_{band}") <= 3:
            out.append(f"max_order_{band}: must lie in [0, 3]")
        if not getattr(config, f"n_taps_{band}") >= 1:
            out.append(f"n_taps_{band}: must be >= 1")
        if not getattr(config, f"tap_spacing_s_{band}") > 0:
            out.append(f"tap_spacing_s_{band}: must be > 0")
        for name in (f"tx_power_dbm_{band}", f"noise_power_dbm_{band}"):
            if not math.isfinite(getattr(config, name)):
                out.append(f"{name}: must be finite")

    if config.ura.rows < 1 or config.ura.cols < 1:
        out.append("ura: rows and cols must be >= 1")
    if not config.ura.element_spacing > 0:
        out.append("ura.element_spacing: must be > 0")

    ibbc = config.ibbc_grid_deg
    if not ibbc:
        out.append("ibbc_grid_deg: at least one IBBC required")
    for i, pair in enumerate(ibbc):
        if len(pair) != 2 or not all(math.isfinite(v) for v in pair):
            out.append(f"ibbc_grid_deg[{i}]: expected a finite (azimuth, elevation) pair")
        elif not (abs(pair[0]) < 90 and abs(pair[1]) < 90):
            out.append(f"ibbc_grid_deg[{i}]: offsets must lie in (-90, 90) degrees")
    if len({tuple(p) for p in ibbc}) != len(ibbc):
        out.append("ibbc_grid_deg: duplicate entries")

    ds = config.dataset
    if not 1 <= ds.per_position <= max(len(ibbc), 1):
        out.append("dataset.per_position: must lie in [1, number of IBBCs]")
    if not 0 <= ds.max_tilt_deg <= 180:
        out.append("dataset.max_tilt_deg: must lie in [0, 180]")
    if not 0 <= ds.max_yaw_deg <= 180:
        out.append("dataset.max_yaw_deg: must lie in [0, 180]")
    if not 0 < ds.split_ratio < 1:
        out.append("dataset.split_ratio: must lie in (0, 1)")

    if not config.features.floor_db < config.features.ceil_db:
        out.append("features: floor_db must be below ceil_db")

    tr = config.train
    if not tr.learning_rate > 0:
        out.append("train.learning_rate: must be > 0")
    if not 0 <= tr.momentum < 1:
        out.append("train.momentum: must lie in [0, 1)")
    if tr.epochs < 1:
        out.append("train.epochs: must be >= 1")
    if tr.batch_size < 1:
        out.append("train.batch_size: must be >= 1")
    if not tr.init_scale > 0:
        out.append("train.init_scale: must be > 0")
    return out


def build_scene(config: ExperimentConfig) -> Scene:
    """Construct the immutable Scene; raises ConfigError listing all violations."""
    violations = validate_config(config)
    if violations:
        raise ConfigError("invalid config:\n  " + "\n  ".join(violations))
    room = RoomSpec(config.room.length_m, config.room.width_m, config.room.height_m)

    def node(n, band: Band) -> NodeSpec:
        return NodeSpec(tuple(map(float, n.position)), tuple(map(float, n.facing)), band)

    positions = ue_grid(room, config.ue_grid.pitch_m, config.ue_grid.margin_m, config.ue_grid.height_m)
    positions.flags.writeable = False
    low = BandParams(
        config.freq_low_hz,
        config.tx_power_dbm_low,
        config.noise_power_dbm_low,
        config.reflection_coeff_low,
        config.max_order_low,
        config.n_taps_low,
        config.tap_spacing_s_low,
    )
    high = BandParams(
        config.freq_high_hz,
        config.tx_power_dbm_high,
        config.noise_power_dbm_high,
        config.reflection_coeff_high,
        config.max_order_high,
        config.n_taps_high,
        config.tap_spacing_s_high,
    )
    return Scene(
        room=room,
        ap=node(config.ap, Band.LOW),
        rus=tuple(node(r, Band.HIGH) for r in config.rus),
        ue_positions=positions,
        ura=UraSpec(
            config.ura.rows,
            config.ura.cols,
            config.ura.element_spacing,
            config.ura.element_exponent,
            config.ura.front_to_back_db,
        ),
        low=low,
        high=high,
    )
