"""
Heading Filter Module
Two-state extended Kalman filter over [bearing, gyro-z bias].

Predict integrates the bias-corrected gyro; update pulls the estimate toward the
tilt-compensated magnetometer heading.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from core.errors import InvalidArgumentError
from .geo import wrap_angle


@dataclass(frozen=True)
class ImuSample:
    accel: np.ndarray
    gyro: np.ndarray
    mag: np.ndarray

    def __post_init__(self):
        for name in ("accel", "gyro", "mag"):
            value = np.asarray(getattr(self, name), dtype=np.float64)
            if value.shape != (3,) or not np.all(np.isfinite(value)):
                raise InvalidArgumentError(f"ImuSample.{name} must be a finite 3-vector")
            object.__setattr__(self, name, value)

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.accel, self.gyro, self.mag])

    @classmethod
    def from_array(cls, values) -> "ImuSample":
        v = np.asarray(values, dtype=np.float64)
        return cls(accel=v[0:3], gyro=v[3:6], mag=v[6:9])


@dataclass(frozen=True)
class HeadingFilterState:
    bearing: float = 0.0
    bias: float = 0.0
    covariance: np.ndarray = field(default_factory=lambda: np.diag([math.pi ** 2, 0.01 ** 2]))


@dataclass(frozen=True)
class HeadingFilterConfig:
    gyro_noise: float = 0.01          # rad/s, white noise on the rate
    bias_walk: float = 1e-4           # rad/s/sqrt(s)
    mag_noise: float = math.radians(5.0)
    use_magnetometer: bool = True


def tilt_compensated_heading(accel: np.ndarray, mag: np.ndarray) -> Optional[float]:
    """
    Heading of the body y axis from the horizontal magnetic field component.

    Returns None when the field (or its horizontal part) vanishes.
    """
    mag = np.asarray(mag, dtype=np.float64)
    if np.linalg.norm(mag) == 0.0:
        return None
    up = np.asarray(accel, dtype=np.float64)
    norm_up = np.linalg.norm(up)
    up = up / norm_up if norm_up > 0 else np.array([0.0, 0.0, 1.0])

    def horizontal(v):
        return v - np.dot(v, up) * up

    m_h = horizontal(mag)
    if np.linalg.norm(m_h) == 0.0:
        return None
    x_h = horizontal(np.array([1.0, 0.0, 0.0]))
    y_h = horizontal(np.array([0.0, 1.0, 0.0]))
    return math.atan2(float(np.dot(m_h, x_h)), float(np.dot(m_h, y_h)))


def heading_update(
    state: HeadingFilterState,
    imu: ImuSample,
    dt: float,
    config: HeadingFilterConfig = HeadingFilterConfig(),
) -> HeadingFilterState:
    """
    Advance the filter by one IMU sample.

    Args:
        state: Previous estimate
        imu: Accelerometer, gyroscope and magnetometer reading
        dt: Seconds since the previous sample

    Returns:
        New state with the bearing wrapped to [-pi, pi)
    """
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")

    # Predict
    rate = float(imu.gyro[2]) - state.bias
    x = np.array([state.bearing + rate * dt, state.bias])
    f = np.array([[1.0, -dt], [0.0, 1.0]])
    q = np.diag([(config.gyro_noise * dt) ** 2, config.bias_walk ** 2 * dt])
    p = f @ state.covariance @ f.T + q

    measured = tilt_compensated_heading(imu.accel, imu.mag) if config.use_magnetometer else None
    if measured is not None:
        h = np.array([[1.0, 0.0]])
        innovation = wrap_angle(measured - x[0])
        s = float(h @ p @ h.T) + config.mag_noise ** 2
        k = (p @ h.T) / s
        x = x + k[:, 0] * innovation
        i_kh = np.eye(2) - k @ h
        p = i_kh @ p @ i_kh.T + (k * config.mag_noise ** 2) @ k.T

    p = 0.5 * (p + p.T)
    return HeadingFilterState(bearing=wrap_angle(float(x[0])), bias=float(x[1]), covariance=p)
