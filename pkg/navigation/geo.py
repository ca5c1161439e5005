"""
Geo Module
Spherical-earth GNSS offsets and rotation into the vehicle frame.

Local frame: +y forward, +x lateral. Bearings are measured so that a rotation by
R(theta)^T takes east/north offsets into that frame with the point straight
ahead landing on (0, d).
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from core.errors import DegenerateLatitudeError, InvalidArgumentError

EARTH_EQUATOR_CIRCUMFERENCE = 40_075_000.0
EARTH_MERIDIAN_CIRCUMFERENCE = 40_008_000.0
_MIN_COS_LAT = 1e-9


def wrap_angle(angle: float) -> float:
    """Wrap radians to [-pi, pi)."""
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def _check_finite(*values: float) -> None:
    if not all(math.isfinite(v) for v in values):
        raise InvalidArgumentError(f"non-finite input {values}")


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        _check_finite(self.lat, self.lon)
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise InvalidArgumentError(f"GeoPoint out of range: ({self.lat}, {self.lon})")


@dataclass(frozen=True)
class LocalPoint:
    x: float
    y: float

    def __add__(self, other: "LocalPoint") -> "LocalPoint":
        return LocalPoint(self.x + other.x, self.y + other.y)

    def as_tuple(self) -> Tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Bearing:
    theta_ro: float

    def __post_init__(self):
        _check_finite(self.theta_ro)
        object.__setattr__(self, "theta_ro", wrap_angle(self.theta_ro))

    @classmethod
    def from_heading(cls, heading: float) -> "Bearing":
        """Bearing for a compass heading (clockwise from north)."""
        return cls(-heading)


def geo_delta(ro: GeoPoint, rp: GeoPoint) -> Tuple[float, float]:
    """
    Metric offset of ``rp`` relative to ``ro``.

    Returns:
        (dx east, dy north) in meters
    """
    dx = (rp.lon - ro.lon) * EARTH_EQUATOR_CIRCUMFERENCE * math.cos(math.radians(ro.lat)) / 360.0
    dy = (rp.lat - ro.lat) * EARTH_MERIDIAN_CIRCUMFERENCE / 360.0
    return dx, dy


def geo_delta_inverse(ro: GeoPoint, dx: float, dy: float) -> GeoPoint:
    """Inverse of ``geo_delta``: the point at (dx, dy) meters from ``ro``."""
    _check_finite(dx, dy)
    cos_lat = math.cos(math.radians(ro.lat))
    if abs(cos_lat) < _MIN_COS_LAT:
        raise DegenerateLatitudeError(f"longitude offset undefined at latitude {ro.lat}")
    lat = ro.lat + dy * 360.0 / EARTH_MERIDIAN_CIRCUMFERENCE
    lon = ro.lon + dx * 360.0 / (EARTH_EQUATOR_CIRCUMFERENCE * cos_lat)
    return GeoPoint(lat, lon)


def rotate_to_local(dx: float, dy: float, bearing: Bearing) -> LocalPoint:
    """
    [x; y] = R(theta)^T [dx; dy].

    Right-handed vehicle frame: +y points along the heading and +x to the
    vehicle's right, so a point dead ahead lands on (0, d).
    """
    _check_finite(dx, dy)
    c, s = math.cos(bearing.theta_ro), math.sin(bearing.theta_ro)
    return LocalPoint(c * dx + s * dy, -s * dx + c * dy)


def geo_to_local(ro: GeoPoint, rp: GeoPoint, bearing: Bearing) -> LocalPoint:
    dx, dy = geo_delta(ro, rp)
    return rotate_to_local(dx, dy, bearing)


def world_to_local(points: np.ndarray, position: np.ndarray, heading: float) -> np.ndarray:
    """
    Vectorized world (east, north) -> vehicle frame for a compass ``heading``.

    Args:
        points: (..., 2) world coordinates
        position: (2,) vehicle position
        heading: radians clockwise from north

    Returns:
        (..., 2) local (x, y)
    """
    theta = -heading
    c, s = math.cos(theta), math.sin(theta)
    d = np.asarray(points, dtype=np.float64) - np.asarray(position, dtype=np.float64)
    return np.stack([c * d[..., 0] + s * d[..., 1], -s * d[..., 0] + c * d[..., 1]], axis=-1)


def local_to_world(points: np.ndarray, position: np.ndarray, heading: float) -> np.ndarray:
    """Inverse of ``world_to_local``."""
    theta = -heading
    c, s = math.cos(theta), math.sin(theta)
    p = np.asarray(points, dtype=np.float64)
    east = c * p[..., 0] - s * p[..., 1]
    north = s * p[..., 0] + c * p[..., 1]
    return np.stack([east, north], axis=-1) + np.asarray(position, dtype=np.float64)
