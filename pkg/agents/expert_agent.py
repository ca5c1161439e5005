"""
Expert Agent Module
Scripted driver with privileged access to the true vehicle pose: pure pursuit
along the densified route with a speed profile that eases off near obstacles and
near the finish.
"""
import math
from typing import Optional, Tuple

import numpy as np

from config import SimConfig
from core.errors import InvalidArgumentError
from navigation.geo import world_to_local
from .controller import ControlCommand

PATH_SPACING = 0.25
MIN_PURSUIT_SPEED = 0.3
SLOWDOWN_DISTANCE = 1.5
FINISH_SLOWDOWN = 0.4
SEARCH_WINDOW = 40


def densify(points: np.ndarray, spacing: float = PATH_SPACING) -> np.ndarray:
    """Insert vertices so no segment is longer than ``spacing``."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        raise InvalidArgumentError("a path needs at least two points")
    out = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(math.ceil(np.linalg.norm(b - a) / spacing)))
        out.extend(a + (b - a) * (k / n) for k in range(1, n + 1))
    return np.array(out)


def pursuit_curvature(target_local: np.ndarray) -> float:
    """Curvature of the arc through the origin tangent to +y that reaches the target."""
    x, y = float(target_local[0]), float(target_local[1])
    l2 = x * x + y * y
    return 0.0 if l2 < 1e-12 else 2.0 * x / l2


def expert_policy(
    state,
    path: np.ndarray,
    progress: int,
    params: SimConfig = SimConfig(),
    world=None,
    t: float = 0.0,
) -> Tuple[ControlCommand, int]:
    """
    One expert decision.

    Args:
        state: True VehicleState
        path: Densified world-frame route polyline
        progress: Index of the closest path vertex found so far
        world: Optional World for the obstacle slowdown
        t: Episode time

    Returns:
        (control, updated progress)
    """
    position = state.position
    window = path[progress:progress + SEARCH_WINDOW]
    progress += int(np.argmin(np.linalg.norm(window - position, axis=1)))

    ahead = path[progress:]
    dist = np.linalg.norm(ahead - position, axis=1)
    beyond = np.nonzero(dist >= params.lookahead)[0]
    target = ahead[beyond[0]] if beyond.size else path[-1]

    local = world_to_local(target, position, state.heading)
    kappa = pursuit_curvature(local)
    yaw_rate = max(state.speed, MIN_PURSUIT_SPEED) * kappa
    steering = float(np.clip(-yaw_rate / params.max_yaw_rate, -1.0, 1.0))

    v_des = params.max_speed
    v_des = min(v_des, FINISH_SLOWDOWN * float(np.linalg.norm(path[-1] - position)) + 0.3)
    if world is not None:
        stretch = ahead[: int(round(params.lookahead * 2 / PATH_SPACING)) + 1]
        gap = float(np.min(world.clearance(stretch, t))) - params.vehicle_radius - params.monitor_clearance
        v_des *= float(np.clip(gap / SLOWDOWN_DISTANCE, 0.0, 1.0))
    throttle = float(np.clip(v_des / params.max_speed, 0.0, 1.0))
    return ControlCommand(steering, throttle), progress


class ExpertAgent:
    """
    Stateful expert for one route; keeps the path progress between ticks.
    """

    needs_lidar = False

    def __init__(self, route_points: np.ndarray, params: SimConfig = None, world=None):
        self.params = params or SimConfig()
        self.world = world
        self.path = densify(route_points)
        self.progress = 0

    def reset(self) -> None:
        self.progress = 0

    def control(self, state, t: float = 0.0) -> ControlCommand:
        command, self.progress = expert_policy(state, self.path, self.progress, self.params, self.world, t)
        return command

    def act(self, tick) -> ControlCommand:
        return self.control(tick.state, tick.t)

    @property
    def remaining(self) -> Optional[float]:
        return float(np.sum(np.linalg.norm(np.diff(self.path[self.progress:], axis=0), axis=1)))
