"""Image-source ray tracing in an empty shoebox room.

Directions follow one convention throughout: ``aod`` points from the
transmitter along the departing ray, ``aoa`` points from the receiver back
toward where the arriving ray comes from.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .scene import RoomSpec

SPEED_OF_LIGHT = 299_792_458.0
MAX_SUPPORTED_ORDER = 3
_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class Ray:
    delay_s: float
    gain: complex
    aod: np.ndarray
    aoa: np.ndarray
    order: int


@dataclass(frozen=True)
class RaySet:
    rays: tuple[Ray, ...]
    freq_hz: float

    def __len__(self) -> int:
        return len(self.rays)

    @property
    def delays(self) -> np.ndarray:
        return np.array([r.delay_s for r in self.rays])

    @property
    def gains(self) -> np.ndarray:
        return np.array([r.gain for r in self.rays], dtype=complex)

    def total_power(self) -> float:
        return float(np.sum(np.abs(self.gains) ** 2)) if self.rays else 0.0

    def strongest(self) -> Ray:
        # ties resolve to the earliest ray since rays are delay-sorted
        return max(self.rays, key=lambda r: abs(r.gain))

    def with_gains(self, gains) -> RaySet:
        rays = tuple(
            Ray(r.delay_s, complex(g), r.aod, r.aoa, r.order) for r, g in zip(self.rays, gains)
        )
        return RaySet(rays, self.freq_hz)


def walls(room: RoomSpec) -> list[tuple[int, float]]:
    """The six faces as (axis, plane coordinate) pairs."""
    dims = room.dims
    return [(axis, side * float(dims[axis])) for axis in range(3) for side in (0, 1)]


def mirror(point: np.ndarray, wall: tuple[int, float]) -> np.ndarray:
    axis, coord = wall
    image = point.copy()
    image[axis] = 2.0 * coord - image[axis]
    return image


def _reflection_points(room, rx, images, sequence, wall_list):
    """Walk back from rx through the image chain; None if the path is not physical."""
    dims = room.dims
    target = rx
    points = []
    for image, w in zip(reversed(images), reversed(sequence)):
        axis, coord = wall_list[w]
        denom = image[axis] - target[axis]
        if denom == 0.0:
            return None
        t = (coord - target[axis]) / denom
        if not _EDGE_TOL < t < 1.0 - _EDGE_TOL:
            return None
        p = target + t * (image - target)
        p[axis] = coord
        others = [a for a in range(3) if a != axis]
        if any(p[a] < -_EDGE_TOL or p[a] > dims[a] + _EDGE_TOL for a in others):
            return None
        points.append(p)
        target = p
    points.reverse()
    return points


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def trace_rays(
    room: RoomSpec,
    tx,
    rx,
    freq_hz: float,
    max_order: int,
    reflection_coeff: float = 0.6,
) -> RaySet:
    """Trace the LOS ray and every specular path with up to `max_order` bounces.

    Each ray carries amplitude ``c / (4 pi f d) * reflection_coeff**order`` and the
    carrier phase ``exp(-j 2 pi f tau)``. Paths whose reflection point falls off
    its wall face, or touches an endpoint (nodes mounted on a wall), are discarded.
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    if not 0 <= max_order <= MAX_SUPPORTED_ORDER:
        raise ValueError(f"max_order must lie in [0, {MAX_SUPPORTED_ORDER}], got {max_order}")
    if not room.contains(tx) or not room.contains(rx):
        raise ValueError("tx and rx must lie inside the room")
    if np.array_equal(tx, rx):
        raise ValueError("tx and rx coincide")

    wall_list = walls(room)
    wavenumber_scale = SPEED_OF_LIGHT / (4.0 * math.pi * freq_hz)
    rays = []

    def emit(length: float, aod: np.ndarray, aoa: np.ndarray, order: int) -> None:
        tau = length / SPEED_OF_LIGHT
        amp = wavenumber_scale / length * reflection_coeff**order
        phase = -2.0 * math.pi * math.fmod(freq_hz * tau, 1.0)
        rays.append(Ray(tau, amp * complex(math.cos(phase), math.sin(phase)), aod, aoa, order))

    los = rx - tx
    emit(float(np.linalg.norm(los)), _unit(los), _unit(-los), 0)

    for order in range(1, max_order + 1):
        for sequence in itertools.product(range(len(wall_list)), repeat=order):
            if any(a == b for a, b in zip(sequence, sequence[1:])):
                continue
            images = []
            current = tx
            for w in sequence:
                current = mirror(current, wall_list[w])
                images.append(current)
            points = _reflection_points(room, rx, images, sequence, wall_list)
            if points is None:
                continue
            path = [tx, *points, rx]
            segments = [b - a for a, b in zip(path, path[1:])]
            if min(np.linalg.norm(s) for s in segments) <= _EDGE_TOL:
                continue
            length = float(np.linalg.norm(rx - images[-1]))
            emit(length, _unit(segments[0]), _unit(-segments[-1]), order)

    rays.sort(key=lambda r: r.delay_s)
    return RaySet(tuple(rays), float(freq_hz))


@dataclass(frozen=True)
class ImpulseResponse:
    taps: np.ndarray
    dropped_energy: float
    n_dropped: int


def _bin_rays(rays: RaySet, n_taps: int, tap_spacing_s: float, values, dtype):
    if n_taps < 1:
        raise ValueError("n_taps must be >= 1")
    if not tap_spacing_s > 0:
        raise ValueError("tap_spacing_s must be > 0")
    out = np.zeros(n_taps, dtype=dtype)
    dropped_energy = 0.0
    n_dropped = 0
    for ray, value in zip(rays.rays, values):
        k = int(math.floor(ray.delay_s / tap_spacing_s))
        if k < n_taps:
            out[k] += value
        else:
            dropped_energy += abs(ray.gain) ** 2
            n_dropped += 1
    return ImpulseResponse(out, dropped_energy, n_dropped)


def channel_impulse_response(rays: RaySet, n_taps: int, tap_spacing_s: float) -> ImpulseResponse:
    """Coherently bin ray gains onto a uniform delay grid.

    Tap k sums the complex gains of rays with delay in [k*dt, (k+1)*dt). Rays
    past the window are dropped and reported in the diagnostics fields.
    """
    return _bin_rays(rays, n_taps, tap_spacing_s, (r.gain for r in rays.rays), complex)


def pdp(cir) -> np.ndarray:
    """Instantaneous power delay profile, |h_k|^2 per tap."""
    taps = cir.taps if isinstance(cir, ImpulseResponse) else np.asarray(cir)
    if taps.size == 0:
        raise ValueError("empty impulse response")
    return np.abs(taps) ** 2


def binned_pdp(rays: RaySet, n_taps: int, tap_spacing_s: float) -> ImpulseResponse:
    """Per-tap ray power, summed incoherently.

    Unlike ``pdp(channel_impulse_response(...))`` this ignores carrier-phase
    interference between rays sharing a tap, so the tap sum plus dropped energy
    equals the total ray power exactly. This is the learning feature.
    """
    return _bin_rays(rays, n_taps, tap_spacing_s, (abs(r.gain) ** 2 for r in rays.rays), float)
