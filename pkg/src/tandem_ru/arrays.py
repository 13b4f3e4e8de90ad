"""Antenna arrays, UE orientation and inter-band beam configuration geometry.

Every array is a planar URA whose lattice spans the local x-y plane with
broadside along local +z. Elements carry an optional cos**q front-hemisphere
power pattern with a finite front-to-back ratio; with q = 0 and an infinite
ratio they are isotropic and only the array factor shapes the beams.

The UE carries both arrays in the same device plane. Its low-band beam stays
at broadside; its high-band beam is steered to the IBBC offset, so an IBBC is a
choice of sub-THz beam relative to the low-band broadside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .propagation import RaySet
    from .scene import Band, NodeSpec, Scene

UNIT_TOL = 1e-9


@dataclass(frozen=True)
class UraSpec:
    rows: int = 2
    cols: int = 2
    element_spacing: float = 0.5  # wavelengths
    # power pattern cos(theta)**q in the front hemisphere, floored at -front_to_back_db
    element_exponent: float = 0.0
    front_to_back_db: float = math.inf

    def __post_init__(self):
        if self.rows * self.cols < 1:
            raise ValueError("URA needs at least one element")

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols

    def lattice(self) -> np.ndarray:
        """(N, 2) element offsets in wavelengths, element m = row * cols + col."""
        r, c = np.divmod(np.arange(self.n_elements), self.cols)
        return self.element_spacing * np.stack([c, r], axis=1).astype(float)


@dataclass(frozen=True)
class Orientation:
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        for name in ("roll", "pitch", "yaw"):
            v = getattr(self, name)
            if not -math.pi <= v < math.pi:
                raise ValueError(f"{name}={v} outside [-pi, pi)")

    def matrix(self) -> np.ndarray:
        return rotation_matrix(self)


@dataclass(frozen=True)
class IbbcClass:
    index: int
    azimuth_offset: float  # radians
    elevation_offset: float  # radians

    @property
    def azimuth_deg(self) -> float:
        return math.degrees(self.azimuth_offset)

    @property
    def elevation_deg(self) -> float:
        return math.degrees(self.elevation_offset)


def ibbc_set(grid_deg) -> list[IbbcClass]:
    """Index the configured (azimuth, elevation) pairs, in degrees, as IBBC classes."""
    return [
        IbbcClass(i, math.radians(az), math.radians(el)) for i, (az, el) in enumerate(grid_deg)
    ]


def rotation_matrix(orientation: Orientation) -> np.ndarray:
    """Device-to-world rotation, intrinsic yaw-pitch-roll: Rz(yaw) Ry(pitch) Rx(roll)."""
    cr, sr = math.cos(orientation.roll), math.sin(orientation.roll)
    cp, sp = math.cos(orientation.pitch), math.sin(orientation.pitch)
    cy, sy = math.cos(orientation.yaw), math.sin(orientation.yaw)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    return rz @ ry @ rx


def ibbc_direction(ibbc: IbbcClass) -> np.ndarray:
    """High-band beam in the device frame: broadside tilted by azimuth toward +x and by elevation toward +y."""
    az, el = ibbc.azimuth_offset, ibbc.elevation_offset
    return np.array([math.sin(az) * math.cos(el), math.sin(el), math.cos(az) * math.cos(el)])


BROADSIDE = np.array([0.0, 0.0, 1.0])

# Reference pose of a handset held upright: device broadside (+z) looks along
# world +x, device +y points up and device +x along world +y. Yaw then sweeps
# both beams around the room and roll spins the device about its broadside.
DEVICE_MOUNT = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def ue_beam_direction(orientation: Orientation, ibbc: IbbcClass | None, band) -> np.ndarray:
    """World-frame UE beam direction for the given band."""
    frame, local_beam = _ue_frame_and_beam(orientation, ibbc, band)
    return frame @ local_beam


def node_frame(facing) -> np.ndarray:
    """Rotation whose columns are the array's x, y and broadside axes in world coordinates."""
    z = np.asarray(facing, dtype=float)
    z = z / np.linalg.norm(z)
    ref = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    x = ref - (ref @ z) * z
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.stack([x, y, z], axis=1)


def _check_unit(direction: np.ndarray) -> np.ndarray:
    d = np.asarray(direction, dtype=float)
    if d.shape != (3,) or abs(float(np.linalg.norm(d)) - 1.0) > UNIT_TOL:
        raise ValueError(f"direction must be a unit 3-vector, got {direction!r}")
    return d


def steering_vector(ura: UraSpec, direction) -> np.ndarray:
    """Array response toward `direction`, given in the array frame."""
    d = _check_unit(direction)
    phase = 2.0 * math.pi * (ura.lattice() @ d[:2])
    return np.exp(1j * phase)


def array_factor(ura: UraSpec, beam_direction, ray_direction) -> complex:
    """Complex conjugate-beamforming response, normalised so |.|^2 is the power gain."""
    w = steering_vector(ura, beam_direction)
    a = steering_vector(ura, ray_direction)
    return complex(np.vdot(w, a) / math.sqrt(ura.n_elements))


def element_gain(ura: UraSpec, direction) -> float:
    """Power pattern of one element toward `direction` (array frame); 1 at broadside."""
    if ura.element_exponent == 0.0 and math.isinf(ura.front_to_back_db):
        return 1.0
    c = float(direction[2])
    g = c**ura.element_exponent if c > 0.0 else 0.0
    return max(g, 10.0 ** (-ura.front_to_back_db / 10.0))


def array_gain(ura: UraSpec, beam_direction, ray_direction) -> float:
    """|a(beam)^H a(ray)|^2 / N; equals N on alignment."""
    return abs(array_factor(ura, beam_direction, ray_direction)) ** 2


def device_frame(orientation: Orientation) -> np.ndarray:
    """Device-to-world rotation: the reference mounting followed by the orientation."""
    return rotation_matrix(orientation) @ DEVICE_MOUNT


def _ue_frame_and_beam(orientation: Orientation, ibbc: IbbcClass | None, band):
    from .scene import Band

    local_beam = BROADSIDE if band is Band.LOW or ibbc is None else ibbc_direction(ibbc)
    return device_frame(orientation), local_beam


def _to_local(frame: np.ndarray, world_dirs: np.ndarray) -> np.ndarray:
    local = np.asarray(world_dirs) @ frame
    return local / np.linalg.norm(local, axis=-1, keepdims=True)


def _responses(ura: UraSpec, beam: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Vectorised array_factor * sqrt(element_gain) for rows of `dirs` (array frame)."""
    lattice = ura.lattice()
    w = np.exp(2j * math.pi * (lattice @ beam[:2]))
    a = np.exp(2j * math.pi * (dirs[:, :2] @ lattice.T))
    af = (a @ w.conj()) / math.sqrt(ura.n_elements)
    elem = np.array([element_gain(ura, d) for d in dirs])
    return af * np.sqrt(elem)


def link_array_factors(
    ura: UraSpec,
    rays: RaySet,
    tx_node: NodeSpec,
    orientation: Orientation,
    ibbc: IbbcClass | None,
    band,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-ray complex responses (array factor and element pattern) at both ends.

    The network-side beam points at the departure direction of the strongest
    ray; the UE beam follows `ue_beam_direction`.
    """
    tx_frame = node_frame(tx_node.facing)
    tx_beam = _to_local(tx_frame, rays.strongest().aod)
    ue_frame, ue_beam = _ue_frame_and_beam(orientation, ibbc, band)
    aods = _to_local(tx_frame, np.array([r.aod for r in rays.rays]))
    aoas = _to_local(ue_frame, np.array([r.aoa for r in rays.rays]))
    return _responses(ura, tx_beam, aods), _responses(ura, ue_beam, aoas)


def beamformed_rays(
    ura: UraSpec,
    rays: RaySet,
    tx_node: NodeSpec,
    orientation: Orientation,
    ibbc: IbbcClass | None,
    band,
) -> RaySet:
    """The same rays with both ends' array factors folded into each gain."""
    if not rays.rays:
        return rays
    f_tx, f_ue = link_array_factors(ura, rays, tx_node, orientation, ibbc, band)
    return rays.with_gains(rays.gains * f_tx * f_ue)


def received_power_mw(
    ura: UraSpec,
    rays: RaySet,
    tx_node: NodeSpec,
    orientation: Orientation,
    ibbc: IbbcClass | None,
    band,
    tx_power_dbm: float,
) -> float:
    if not rays.rays:
        return 0.0
    f_tx, f_ue = link_array_factors(ura, rays, tx_node, orientation, ibbc, band)
    g_tx = np.abs(f_tx) ** 2
    g_ue = np.abs(f_ue) ** 2
    return 10 ** (tx_power_dbm / 10) * float(np.sum(np.abs(rays.gains) ** 2 * g_tx * g_ue))


def link_snr_db(
    scene: Scene,
    rays: RaySet,
    tx_node: NodeSpec,
    ue_pos,
    orientation: Orientation,
    ibbc: IbbcClass | None,
    band: Band,
) -> float:
    """Beamformed SNR of one link: incoherent power sum over rays, in dB.

    Returns -inf for an empty ray set.
    """
    del ue_pos  # the rays already encode the geometry
    params = scene.band(band)
    p_rx = received_power_mw(scene.ura, rays, tx_node, orientation, ibbc, band, params.tx_power_dbm)
    if p_rx <= 0.0:
        return -math.inf
    return 10.0 * math.log10(p_rx) - params.noise_power_dbm
