"""
Sensors Module
GNSS, 9-axis IMU and wheel encoder emulation.
"""
import math
from dataclasses import dataclass

import numpy as np

from config import SimConfig
from navigation.geo import GeoPoint, geo_delta_inverse, wrap_angle
from navigation.heading_filter import ImuSample
from .vehicle import VehicleState

GRAVITY = 9.81
MAG_DIP = -0.6


@dataclass(frozen=True)
class SensorReading:
    gnss: GeoPoint
    imu: ImuSample
    omega_l: float
    omega_r: float


def sense(origin: GeoPoint, state: VehicleState, params: SimConfig, rng: np.random.Generator = None) -> SensorReading:
    """
    Emulate one sensor sweep. Without ``rng`` the readings are noise-free.

    The magnetometer reports the field in the body frame as
    (sin b, cos b, dip) with b the bearing to north, so the level heading is
    atan2(m_x, m_y).
    """
    def noise(sigma, size=None):
        if rng is None or sigma == 0.0:
            return np.zeros(size) if size else 0.0
        return rng.normal(0.0, sigma, size)

    east = state.x + noise(params.gnss_noise)
    north = state.y + noise(params.gnss_noise)
    fix = geo_delta_inverse(origin, float(east), float(north))

    bearing = wrap_angle(-state.heading)
    accel = np.array([0.0, state.accel, GRAVITY]) + noise(params.accel_noise, 3)
    gyro = np.array([0.0, 0.0, -state.yaw_rate]) + noise(params.gyro_noise, 3)
    mag = np.array([math.sin(bearing), math.cos(bearing), MAG_DIP]) + noise(params.mag_noise, 3)

    omega_l = state.omega_l + noise(params.wheel_noise)
    omega_r = state.omega_r + noise(params.wheel_noise)
    return SensorReading(fix, ImuSample(accel=accel, gyro=gyro, mag=mag), float(omega_l), float(omega_r))
