"""
Vehicle Module
Differential-drive (nonholonomic unicycle) kinematics with a first-order speed lag.

Heading is a compass angle (clockwise from north); forward is (sin h, cos h) in
world (east, north). A positive yaw rate turns toward the local +x side.
"""
import math
from dataclasses import dataclass, replace

import numpy as np

from agents.controller import ControlCommand
from config import SimConfig
from core.errors import InvalidArgumentError


@dataclass(frozen=True)
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0
    speed: float = 0.0
    yaw_rate: float = 0.0
    accel: float = 0.0
    omega_l: float = 0.0
    omega_r: float = 0.0

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def forward(self) -> np.ndarray:
        return np.array([math.sin(self.heading), math.cos(self.heading)])


def wheel_speeds(speed: float, yaw_rate: float, params: SimConfig):
    half = yaw_rate * params.track_width / 2.0
    return (speed - half) / params.wheel_radius, (speed + half) / params.wheel_radius


def step_vehicle(state: VehicleState, control: ControlCommand, dt: float, params: SimConfig = SimConfig()) -> VehicleState:
    """
    Integrate one control interval.

    Throttle sets the target speed ``throttle * max_speed`` reached through a
    first-order lag; steering sets the yaw rate ``-steering * max_yaw_rate``.
    The displacement runs along the chord of the travelled arc, so there is never
    a component across the mid-step heading.
    """
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    throttle = float(np.clip(control.throttle, 0.0, 1.0))
    steering = float(np.clip(control.steering, -1.0, 1.0))

    target = throttle * params.max_speed
    decay = math.exp(-dt / params.speed_tau)
    speed = min(target + (state.speed - target) * decay, params.max_speed)
    distance = target * dt + (state.speed - target) * params.speed_tau * (1.0 - decay)
    distance = max(distance, 0.0)

    yaw_rate = -steering * params.max_yaw_rate
    turn = yaw_rate * dt
    chord = distance if abs(turn) < 1e-12 else distance * math.sin(turn / 2.0) / (turn / 2.0)
    mid = state.heading + turn / 2.0

    omega_l, omega_r = wheel_speeds(speed, yaw_rate, params)
    return replace(
        state,
        x=state.x + chord * math.sin(mid),
        y=state.y + chord * math.cos(mid),
        heading=math.atan2(math.sin(state.heading + turn), math.cos(state.heading + turn)),
        speed=speed,
        yaw_rate=yaw_rate,
        accel=(speed - state.speed) / dt,
        omega_l=omega_l,
        omega_r=omega_r,
    )
