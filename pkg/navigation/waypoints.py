"""
Waypoint accumulation: each predicted delta is added to the previous waypoint,
starting from the vehicle at the origin.
"""
from typing import List, Sequence, Tuple

from core.errors import InvalidArgumentError
from .geo import LocalPoint

WAYPOINT_STEPS = 3


def accumulate_waypoints(
    deltas: Sequence[Tuple[float, float]],
    origin: LocalPoint = LocalPoint(0.0, 0.0),
) -> List[LocalPoint]:
    if len(deltas) != WAYPOINT_STEPS:
        raise InvalidArgumentError(f"expected {WAYPOINT_STEPS} deltas, got {len(deltas)}")
    waypoints = []
    current = origin
    for dx, dy in deltas:
        current = LocalPoint(current.x + dx, current.y + dy)
        waypoints.append(current)
    return waypoints
