"""
Interventions Module
Safety oracle for closed-loop driving: roll the vehicle forward under its
current controls and take over when the predicted path leaves traversable
ground or closes in on an obstacle.
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from agents.controller import ControlCommand
from config import SimConfig
from .vehicle import VehicleState, step_vehicle
from .world import World

ROLLOUT_DT = 0.05


@dataclass
class TakeoverDecision:
    takeover: bool
    reason: Optional[str] = None
    min_clearance: float = float("inf")


@dataclass
class InterventionRecord:
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass
class InterventionLedger:
    """Count and total time of takeovers in one episode."""

    records: List[InterventionRecord] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.records)

    @property
    def total_time(self) -> float:
        return float(sum(r.duration for r in self.records))


def predict_path(state: VehicleState, control: ControlCommand, horizon: float, params: SimConfig) -> np.ndarray:
    """Positions over ``horizon`` seconds under constant controls, current pose included."""
    steps = max(1, int(round(horizon / ROLLOUT_DT)))
    positions = [state.position]
    for _ in range(steps):
        state = step_vehicle(state, control, ROLLOUT_DT, params)
        positions.append(state.position)
    return np.array(positions)


def intervention_monitor(
    state: VehicleState,
    control: ControlCommand,
    world: World,
    t: float,
    params: SimConfig = SimConfig(),
) -> TakeoverDecision:
    """
    Decide whether the safety driver must take over.

    Args:
        state: Current vehicle state
        control: Control the agent wants to apply
        world: Scene with the current actors
        t: Episode time (walker positions)

    Returns:
        TakeoverDecision with the triggering reason, if any
    """
    path = predict_path(state, control, params.monitor_horizon, params)
    if not np.all(world.traversable(path)):
        return TakeoverDecision(True, "off_road")
    clearance = world.clearance(path, t) - params.vehicle_radius
    min_clearance = float(np.min(clearance))
    if min_clearance < params.monitor_clearance:
        return TakeoverDecision(True, "obstacle", min_clearance)
    return TakeoverDecision(False, None, min_clearance)
