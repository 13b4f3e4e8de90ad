"""Labelled dual-band samples over the UE grid, their split, features and files."""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .arrays import IbbcClass, Orientation, beamformed_rays, ibbc_set, link_snr_db
from .config import ExperimentConfig
from .propagation import binned_pdp, trace_rays
from .scene import Band, Scene

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class DatasetError(ValueError):
    """Malformed, truncated or inconsistent dataset files."""


class SchemaVersionError(DatasetError):
    pass


class FeatureMode(enum.Enum):
    ALGO1 = "algo1"
    ALGO2 = "algo2"
    ALGO3 = "algo3"
    ALGO2_TRUE_IBBC = "algo2_true_ibbc"


@dataclass
class Sample:
    ue_index: int
    position: np.ndarray
    zeta_low: np.ndarray  # (n_taps_low,)
    zeta_high_per_ru: np.ndarray  # (n_ru, n_taps_high)
    orientation: Orientation
    ibbc: IbbcClass
    best_ru: int
    snr_per_ru_db: np.ndarray  # (n_ru,)

    @property
    def zeta_high_best(self) -> np.ndarray:
        return self.zeta_high_per_ru[self.best_ru]


@dataclass
class Dataset:
    samples: list[Sample]
    split_seed: int
    train_indices: list[int]
    val_indices: list[int]
    config: ExperimentConfig = field(default_factory=ExperimentConfig)
    diagnostics: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def ibbc_set(self) -> list[IbbcClass]:
        return ibbc_set(self.config.ibbc_grid_deg)

    @property
    def n_ru(self) -> int:
        return len(self.config.rus)


def best_index(snr_db) -> int:
    """Argmax with ties to the lowest index."""
    snr = np.asarray(snr_db, dtype=float)
    if np.all(np.isneginf(snr)):
        raise ValueError("every RU link is empty; no best RU exists")
    return int(np.argmax(snr))


def _high_links(scene: Scene, ue_pos) -> list:
    hp = scene.high
    return [
        trace_rays(scene.room, ru.position, ue_pos, hp.freq_hz, hp.max_order, hp.reflection_coeff)
        for ru in scene.rus
    ]


def oracle_best_ru(
    scene: Scene, ue_pos, orientation: Orientation, ibbc: IbbcClass, high_links=None
) -> tuple[int, np.ndarray]:
    """Exhaustive search: SNR to every RU, and the index of the best one."""
    links = high_links if high_links is not None else _high_links(scene, ue_pos)
    snr = np.array(
        [
            link_snr_db(scene, rays, ru, ue_pos, orientation, ibbc, Band.HIGH)
            for ru, rays in zip(scene.rus, links)
        ]
    )
    return best_index(snr), snr


def random_orientation(
    rng: np.random.Generator, max_tilt_rad: float, max_yaw_rad: float = math.pi
) -> Orientation:
    roll, pitch = rng.uniform(-max_tilt_rad, max_tilt_rad, size=2)
    yaw = rng.uniform(-max_yaw_rad, max_yaw_rad)
    return Orientation(float(roll), float(pitch), float(yaw))


def _position_samples(scene, ue_index, ue_pos, orientation, chosen, stats) -> list[Sample]:
    lp, hp = scene.low, scene.high
    low_rays = trace_rays(scene.room, scene.ap.position, ue_pos, lp.freq_hz, lp.max_order, lp.reflection_coeff)
    low_bf = beamformed_rays(scene.ura, low_rays, scene.ap, orientation, None, Band.LOW)
    low_pdp = binned_pdp(low_bf, lp.n_taps, lp.tap_spacing_s)
    stats["dropped_energy_low"] += low_pdp.dropped_energy
    links = _high_links(scene, ue_pos)

    out = []
    for ibbc in chosen:
        best, snr = oracle_best_ru(scene, ue_pos, orientation, ibbc, links)
        zeta_high = np.empty((scene.n_ru, hp.n_taps))
        for r, (ru, rays) in enumerate(zip(scene.rus, links)):
            bf = beamformed_rays(scene.ura, rays, ru, orientation, ibbc, Band.HIGH)
            binned = binned_pdp(bf, hp.n_taps, hp.tap_spacing_s)
            stats["dropped_energy_high"] += binned.dropped_energy
            zeta_high[r] = binned.taps
        out.append(
            Sample(ue_index, np.array(ue_pos), low_pdp.taps.copy(), zeta_high, orientation, ibbc, best, snr)
        )
    return out


def generate_dataset(
    scene: Scene,
    ibbcs: list[IbbcClass],
    per_position: int = 4,
    seed: int = 7,
    *,
    max_tilt_deg: float = 30.0,
    max_yaw_deg: float = 180.0,
    split_ratio: float = 0.8,
    config: ExperimentConfig | None = None,
) -> Dataset:
    """One random orientation per grid position, `per_position` distinct IBBCs each.

    Random draws happen position by position in grid order, so the output is a
    deterministic function of (scene, ibbcs, per_position, seed).
    """
    if len(scene.ue_positions) == 0:
        raise ValueError("scene has no UE positions")
    if not 1 <= per_position <= len(ibbcs):
        raise ValueError(f"per_position={per_position} must lie in [1, {len(ibbcs)}]")
    rng = np.random.default_rng(seed)
    max_tilt = math.radians(max_tilt_deg)
    max_yaw = min(math.radians(max_yaw_deg), math.pi)
    stats = {"dropped_energy_low": 0.0, "dropped_energy_high": 0.0}
    samples: list[Sample] = []
    for ue_index, ue_pos in enumerate(scene.ue_positions):
        orientation = random_orientation(rng, max_tilt, max_yaw)
        picks = rng.choice(len(ibbcs), size=per_position, replace=False)
        chosen = [ibbcs[int(k)] for k in picks]
        samples.extend(_position_samples(scene, ue_index, ue_pos, orientation, chosen, stats))
    log.info(
        "generated %d samples; dropped ray energy low=%.3e high=%.3e",
        len(samples),
        stats["dropped_energy_low"],
        stats["dropped_energy_high"],
    )
    dataset = Dataset(samples, seed, [], [], config or ExperimentConfig(), stats)
    dataset.train_indices, dataset.val_indices = split(dataset, split_ratio, seed)
    return dataset


def split(dataset: Dataset, ratio: float = 0.8, seed: int = 7) -> tuple[list[int], list[int]]:
    """Seeded random partition into train and validation index lists."""
    n = len(dataset.samples)
    if n < 2:
        raise ValueError("need at least two samples to split")
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = min(max(int(round(ratio * n)), 1), n - 1)
    return sorted(perm[:n_train].tolist()), sorted(perm[n_train:].tolist())


def normalize_pdp(values, floor_db: float = -160.0, ceil_db: float = -40.0) -> np.ndarray:
    """dB with a hard floor, mapped affinely from [floor, ceil] onto [0, 1]."""
    v = np.asarray(values, dtype=float)
    floor_lin = 10.0 ** (floor_db / 10.0)
    db = np.full(v.shape, floor_db)
    mask = v > floor_lin
    db[mask] = 10.0 * np.log10(v[mask])
    return np.clip((db - floor_db) / (ceil_db - floor_db), 0.0, 1.0)


def one_hot(index: int, size: int) -> np.ndarray:
    out = np.zeros(size)
    out[index] = 1.0
    return out


def featurize(
    sample: Sample,
    mode: FeatureMode,
    n_ibbc: int = 16,
    floor_db: float = -160.0,
    ceil_db: float = -40.0,
) -> tuple[np.ndarray, int]:
    low = normalize_pdp(sample.zeta_low, floor_db, ceil_db)
    if mode is FeatureMode.ALGO3:
        return low, sample.best_ru
    if mode in (FeatureMode.ALGO2, FeatureMode.ALGO2_TRUE_IBBC):
        return np.concatenate([low, one_hot(sample.ibbc.index, n_ibbc)]), sample.best_ru
    if mode is FeatureMode.ALGO1:
        high = normalize_pdp(sample.zeta_high_best, floor_db, ceil_db)
        return np.concatenate([low, high]), sample.ibbc.index
    raise ValueError(f"unknown mode {mode!r}")


def feature_matrix(
    dataset: Dataset, mode: FeatureMode, indices=None
) -> tuple[np.ndarray, np.ndarray]:
    """Stack featurized samples (all, or the given indices) into (X, y)."""
    idx = range(len(dataset.samples)) if indices is None else indices
    f = dataset.config.features
    n_ibbc = len(dataset.config.ibbc_grid_deg)
    rows = [featurize(dataset.samples[i], mode, n_ibbc, f.floor_db, f.ceil_db) for i in idx]
    if not rows:
        raise ValueError("no samples selected")
    X = np.stack([r[0] for r in rows])
    y = np.array([r[1] for r in rows], dtype=int)
    return X, y


# ---------------------------------------------------------------------------
# persistence

def csv_header(n_ru: int, n_low: int, n_high: int) -> list[str]:
    cols = ["ue_index", "x", "y", "z", "roll", "pitch", "yaw", "ibbc_index", "best_ru"]
    cols += [f"snr_ru_{r}" for r in range(n_ru)]
    cols += [f"zeta_low_{k}" for k in range(n_low)]
    cols += [f"zeta_high_best_{k}" for k in range(n_high)]
    cols += [f"zeta_high_ru{r}_{k}" for r in range(n_ru) for k in range(n_high)]
    return cols


def _fmt(v: float) -> str:
    return repr(float(v))


def _csv_text(dataset: Dataset) -> str:
    cfg = dataset.config
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_header(len(cfg.rus), cfg.n_taps_low, cfg.n_taps_high))
    for s in dataset.samples:
        o = s.orientation
        row = [str(s.ue_index), *map(_fmt, s.position), _fmt(o.roll), _fmt(o.pitch), _fmt(o.yaw)]
        row += [str(s.ibbc.index), str(s.best_ru)]
        row += [_fmt(v) for v in s.snr_per_ru_db]
        row += [_fmt(v) for v in s.zeta_low]
        row += [_fmt(v) for v in s.zeta_high_best]
        row += [_fmt(v) for v in s.zeta_high_per_ru.ravel()]
        writer.writerow(row)
    return buf.getvalue()


def manifest_path(csv_path: str | Path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".manifest.json")


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save_dataset(dataset: Dataset, path: str | Path) -> Path:
    """Write the CSV plus its sidecar manifest; returns the manifest path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = _csv_text(dataset).encode()
    path.write_bytes(data)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "seed": dataset.split_seed,
        "config_hash": dataset.config.config_hash(),
        "config": dataset.config.to_dict(),
        "n_samples": len(dataset.samples),
        "csv_file": path.name,
        "csv_sha256": sha256_bytes(data),
        "train_indices": dataset.train_indices,
        "val_indices": dataset.val_indices,
    }
    mpath = manifest_path(path)
    mpath.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return mpath


def load_manifest(path: str | Path) -> dict:
    mpath = manifest_path(path)
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{mpath}: manifest is not valid JSON") from exc
    version = manifest.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"{mpath}: schema version {version!r}, expected {SCHEMA_VERSION}")
    return manifest


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    manifest = load_manifest(path)
    data = path.read_bytes()
    if sha256_bytes(data) != manifest["csv_sha256"]:
        raise DatasetError(f"{path}: content hash does not match manifest (truncated or edited?)")
    config = ExperimentConfig.from_dict(manifest["config"])
    if config.config_hash() != manifest["config_hash"]:
        raise DatasetError(f"{path}: embedded config does not match its hash")
    n_ru, n_low, n_high = len(config.rus), config.n_taps_low, config.n_taps_high
    ibbcs = ibbc_set(config.ibbc_grid_deg)
    reader = csv.reader(io.StringIO(data.decode()))
    header = next(reader, None)
    if header != csv_header(n_ru, n_low, n_high):
        raise DatasetError(f"{path}: unexpected header")
    samples = []
    for line_no, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise DatasetError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
        try:
            samples.append(_parse_row(row, n_ru, n_low, n_high, ibbcs))
        except (ValueError, IndexError) as exc:
            raise DatasetError(f"{path}:{line_no}: {exc}") from exc
    if len(samples) != manifest["n_samples"]:
        raise DatasetError(f"{path}: {len(samples)} samples, manifest says {manifest['n_samples']}")
    return Dataset(
        samples,
        manifest["seed"],
        list(manifest["train_indices"]),
        list(manifest["val_indices"]),
        config,
    )


def _parse_row(row, n_ru, n_low, n_high, ibbcs) -> Sample:
    ue_index = int(row[0])
    position = np.array([float(v) for v in row[1:4]])
    orientation = Orientation(float(row[4]), float(row[5]), float(row[6]))
    ibbc = ibbcs[int(row[7])]
    best_ru = int(row[8])
    pos = 9
    snr = np.array([float(v) for v in row[pos : pos + n_ru]])
    pos += n_ru
    zeta_low = np.array([float(v) for v in row[pos : pos + n_low]])
    pos += n_low + n_high  # zeta_high_best duplicates a row of the per-RU block
    zeta_high = np.array([float(v) for v in row[pos : pos + n_ru * n_high]]).reshape(n_ru, n_high)
    return Sample(ue_index, position, zeta_low, zeta_high, orientation, ibbc, best_ru, snr)


def build_dataset(config: ExperimentConfig, seed: int | None = None) -> Dataset:
    """Scene + IBBC set + generation straight from a config."""
    from .scene import build_scene

    scene = build_scene(config)
    ds = config.dataset
    return generate_dataset(
        scene,
        ibbc_set(config.ibbc_grid_deg),
        ds.per_position,
        ds.seed if seed is None else seed,
        max_tilt_deg=ds.max_tilt_deg,
        max_yaw_deg=ds.max_yaw_deg,
        split_ratio=ds.split_ratio,
        config=config,
    )
