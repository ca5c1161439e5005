"""
Controller Module
The control policy: route command derivation, aim-point geometry, the lateral
and longitudinal PID loops, and the weighted MLP/PID fusion.
"""
import math
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Optional, Sequence, Tuple

import numpy as np

from config import ControllerConfig, PidGains
from core.errors import InvalidArgumentError
from navigation.geo import LocalPoint

RIGHT_THRESHOLDS = (-4.0, -8.0)
LEFT_THRESHOLDS = (4.0, 8.0)


class Command(IntEnum):
    STRAIGHT = 0
    LEFT = 1
    RIGHT = 2


@dataclass(frozen=True)
class ControlCommand:
    steering: float
    throttle: float

    def clamped(self) -> "ControlCommand":
        return ControlCommand(
            float(np.clip(self.steering, -1.0, 1.0)),
            float(np.clip(self.throttle, 0.0, 1.0)),
        )


@dataclass(frozen=True)
class AimGeometry:
    aim: LocalPoint
    theta: float            # degrees, 90 = straight ahead
    gamma: float            # desired speed, m/s
    degenerate: bool = False


@dataclass(frozen=True)
class PidState:
    kp: float
    ki: float
    kd: float
    out_min: float = -1.0
    out_max: float = 1.0
    integral: float = 0.0
    prev_error: float = 0.0

    @classmethod
    def from_gains(cls, gains: PidGains, out_min: float, out_max: float) -> "PidState":
        return cls(kp=gains.kp, ki=gains.ki, kd=gains.kd, out_min=out_min, out_max=out_max)

    def reset(self) -> "PidState":
        return replace(self, integral=0.0, prev_error=0.0)


@dataclass(frozen=True)
class ControlWeights:
    """2×2 blend weights; column 0 for steering, column 1 for throttle."""

    beta: np.ndarray

    @property
    def b00(self) -> float:
        return float(self.beta[0, 0])

    @property
    def b10(self) -> float:
        return float(self.beta[1, 0])

    @property
    def b01(self) -> float:
        return float(self.beta[0, 1])

    @property
    def b11(self) -> float:
        return float(self.beta[1, 1])


def derive_command(rp1: LocalPoint, rp2: LocalPoint) -> Command:
    """
    Right is tested first; thresholds are inclusive.

    Labels key on the sign of local x from ``rotate_to_local``, whose +x is the
    vehicle's geometric right: a route point to the right reads LEFT.
    """
    if rp1.x <= RIGHT_THRESHOLDS[0] or rp2.x <= RIGHT_THRESHOLDS[1]:
        return Command.RIGHT
    if rp1.x >= LEFT_THRESHOLDS[0] or rp2.x >= LEFT_THRESHOLDS[1]:
        return Command.LEFT
    return Command.STRAIGHT


def aim_geometry(wp1: LocalPoint, wp2: LocalPoint, speed_gain: float = 1.75) -> AimGeometry:
    """
    Aim point between the first two waypoints, its heading angle and the desired speed.

    A zero aim point yields 90 degrees (no lateral error) and is flagged degenerate.
    """
    aim = LocalPoint((wp1.x + wp2.x) / 2.0, (wp1.y + wp2.y) / 2.0)
    gamma = speed_gain * math.hypot(wp1.x - wp2.x, wp1.y - wp2.y)
    if aim.x == 0.0 and aim.y == 0.0:
        return AimGeometry(aim, 90.0, gamma, degenerate=True)
    return AimGeometry(aim, math.degrees(math.atan2(aim.y, aim.x)), gamma)


def linear_speed(omega_l: float, omega_r: float, r: float) -> float:
    return (omega_l + omega_r) / 2.0 * r


def pid_step(state: PidState, error: float, dt: float) -> Tuple[float, PidState]:
    """
    One PID update with integral anti-windup and output clamping.

    Returns:
        (output, new state)
    """
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    integral = state.integral + error * dt
    if state.ki > 0:
        integral = float(np.clip(integral, state.out_min / state.ki, state.out_max / state.ki))
    derivative = (error - state.prev_error) / dt
    output = state.kp * error + state.ki * integral + state.kd * derivative
    output = float(np.clip(output, state.out_min, state.out_max))
    return output, replace(state, integral=integral, prev_error=error)


def init_control_weights(alpha: Sequence[float]) -> ControlWeights:
    a0, a1, a2 = (float(a) for a in alpha)
    if min(a0, a1, a2) <= 0:
        raise InvalidArgumentError(f"loss weights must be positive, got {alpha}")
    b00 = a1 / (a1 + a0)
    b01 = a2 / (a2 + a0)
    return ControlWeights(np.array([[b00, b01], [1.0 - b00, 1.0 - b01]]))


def fuse_controls(
    mlp_st: float,
    mlp_th: float,
    pid_st: float,
    pid_th: float,
    weights: ControlWeights,
    deadband: float = 0.1,
) -> ControlCommand:
    """Combine the MLP and PID estimates."""
    mlp_on, pid_on = mlp_th >= deadband, pid_th >= deadband
    if mlp_on and pid_on:
        mlp_steers, pid_steers = abs(mlp_st) >= deadband, abs(pid_st) >= deadband
        if mlp_steers and not pid_steers:
            steering = mlp_st
        elif not mlp_steers and pid_steers:
            steering = pid_st
        else:
            # the trailing else pairs with the second test: both or neither steer -> blend
            steering = weights.b00 * mlp_st + weights.b10 * pid_st
        throttle = weights.b01 * mlp_th + weights.b11 * pid_th
    elif mlp_on:
        steering, throttle = mlp_st, mlp_th
    elif pid_on:
        steering, throttle = pid_st, pid_th
    else:
        steering, throttle = 0.0, 0.0
    return ControlCommand(steering, throttle).clamped()


class ControlPolicy:
    """
    Stateful wrapper that threads both PID states through an episode.
    """

    def __init__(self, config: ControllerConfig = None, weights: Optional[ControlWeights] = None):
        self.config = config or ControllerConfig()
        self.weights = weights or init_control_weights((1.0, 1.0, 1.0))
        self.reset()

    def reset(self) -> None:
        self.lateral = PidState.from_gains(self.config.lateral, -1.0, 1.0)
        self.longitudinal = PidState.from_gains(self.config.longitudinal, 0.0, 1.0)

    def pid_controls(self, waypoints: Sequence[LocalPoint], omega_l: float, omega_r: float) -> Tuple[float, float, AimGeometry]:
        geometry = aim_geometry(waypoints[0], waypoints[1], self.config.speed_gain)
        nu = linear_speed(omega_l, omega_r, self.config.wheel_radius)
        steering, self.lateral = pid_step(self.lateral, geometry.theta - 90.0, self.config.dt)
        throttle, self.longitudinal = pid_step(self.longitudinal, geometry.gamma - nu, self.config.dt)
        return steering, throttle, geometry

    def act(self, waypoints: Sequence[LocalPoint], mlp_st: float, mlp_th: float, omega_l: float, omega_r: float) -> ControlCommand:
        pid_st, pid_th, _ = self.pid_controls(waypoints, omega_l, omega_r)
        return fuse_controls(mlp_st, mlp_th, pid_st, pid_th, self.weights, self.config.deadband)
