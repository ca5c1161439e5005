"""
Agent Orchestrator Module
Runs one closed-loop episode at the log rate and routes control between the
driving agent and the expert safety driver.
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from config import FINISH_RADIUS, LidarConfig, SimConfig
from perception.projection import LabeledPointCloud
from simulation.interventions import InterventionLedger, InterventionRecord, intervention_monitor
from simulation.lidar import raycast_scan
from simulation.sensors import SensorReading, sense
from simulation.vehicle import VehicleState, step_vehicle
from simulation.world import RouteSpec, World
from .controller import ControlCommand
from .model_agent import RouteFollower, RouteObservation

BRAKE_TAIL = 3.0
EXPERT_TIME_LIMIT = 900.0


@dataclass
class Tick:
    """What an agent sees at one control step. ``state`` is the true pose."""

    t: float
    state: VehicleState
    reading: SensorReading
    cloud: Optional[LabeledPointCloud]


@dataclass
class TickRecord:
    t: float
    state: VehicleState
    reading: SensorReading
    cloud: Optional[LabeledPointCloud]
    route: Optional[RouteObservation]
    control: ControlCommand
    takeover: bool


@dataclass
class EpisodeResult:
    scene: str
    route: str
    completed: bool
    elapsed: float
    ledger: InterventionLedger
    trace: List[TickRecord] = field(default_factory=list)
    tail: List[VehicleState] = field(default_factory=list)

    @property
    def interventions(self) -> int:
        return self.ledger.count

    @property
    def intervention_time(self) -> float:
        return self.ledger.total_time

    @property
    def poses(self) -> List[VehicleState]:
        """Every recorded state followed by the braking tail."""
        return [r.state for r in self.trace] + self.tail


def start_state(route: RouteSpec) -> VehicleState:
    """At the first route point, facing the second."""
    (x0, y0), (x1, y1) = route.world_points[0], route.world_points[1]
    return VehicleState(x=float(x0), y=float(y0), heading=math.atan2(x1 - x0, y1 - y0))


def reached_finish(state: VehicleState, route: RouteSpec, radius: float = FINISH_RADIUS) -> bool:
    return float(np.linalg.norm(state.position - route.world_points[-1])) < radius


def expert_time(world: World, route: RouteSpec, sim: SimConfig = None) -> float:
    """Time the expert needs to finish ``route`` without sensors or safety driver."""
    from .expert_agent import ExpertAgent

    sim = sim or SimConfig()
    expert = ExpertAgent(route.drive_path, sim, world)
    state, t = start_state(route), 0.0
    while not reached_finish(state, route) and t < EXPERT_TIME_LIMIT:
        state = step_vehicle(state, expert.control(state, t), sim.dt, sim)
        t += sim.dt
    return t


class EpisodeOrchestrator:
    """
    Main loop of one episode: sense, let the agent act, let the monitor veto,
    hand control to the expert until safe (at least ``min_takeover`` seconds),
    then integrate the vehicle.
    """

    def __init__(
        self,
        world: World,
        route: RouteSpec,
        agent=None,
        sim: SimConfig = None,
        lidar: LidarConfig = None,
        rng: np.random.Generator = None,
        monitor: bool = True,
        record: bool = False,
        timeout: Optional[float] = None,
    ):
        """
        Initialize the orchestrator.

        Args:
            world: Populated scene
            route: Route to drive
            agent: Object with ``act(tick)``; None lets the expert drive
            rng: Sensor noise source; None gives noise-free sensors
            monitor: Enable the safety driver
            record: Keep every tick plus a braking tail for ground truth
            timeout: Episode time limit in seconds
        """
        self.world = world
        self.route = route
        self.sim = sim or SimConfig()
        self.lidar = lidar or LidarConfig()
        self.rng = rng
        self.monitor = monitor
        self.record = record
        self._agent = agent
        self._timeout = timeout

        # Lazy-loaded helpers
        self._expert = None
        self._follower = None

    @property
    def expert(self):
        """Lazy load the expert safety driver."""
        if self._expert is None:
            from .expert_agent import ExpertAgent
            self._expert = ExpertAgent(self.route.drive_path, self.sim, self.world)
        return self._expert

    @property
    def agent(self):
        return self._agent if self._agent is not None else self.expert

    @property
    def follower(self) -> RouteFollower:
        """Route observer for the logged route points and command."""
        if self._follower is None:
            self._follower = RouteFollower(self.route.points)
        return self._follower

    @property
    def timeout(self) -> float:
        if self._timeout is None:
            self._timeout = 3.0 * expert_time(self.world, self.route, self.sim)
        return self._timeout

    def _needs_lidar(self) -> bool:
        return self.record or getattr(self.agent, "needs_lidar", True)

    def run(self) -> EpisodeResult:
        """
        Drive the route until the finish or the timeout.

        Returns:
            EpisodeResult with the intervention ledger (and the trace when recording)
        """
        sim = self.sim
        state, t = start_state(self.route), 0.0
        ledger = InterventionLedger()
        trace: List[TickRecord] = []
        takeover_start: Optional[float] = None
        completed = False
        limit = self.timeout

        while t < limit - 1e-9:
            reading = sense(self.world.origin, state, sim, self.rng)
            cloud = raycast_scan(self.world, state.position, state.heading, self.lidar, t) if self._needs_lidar() else None
            tick = Tick(t, state, reading, cloud)
            route_obs = self.follower.observe(reading.gnss, reading.imu, sim.dt) if self.record else None

            proposed = self.agent.act(tick)
            expert_control = self.expert.control(state, t) if self.agent is not self.expert else proposed

            if takeover_start is not None:
                if t - takeover_start >= sim.min_takeover - 1e-9 and not intervention_monitor(state, proposed, self.world, t, sim).takeover:
                    ledger.records.append(InterventionRecord(takeover_start, t))
                    takeover_start = None
            elif self.monitor and intervention_monitor(state, proposed, self.world, t, sim).takeover:
                takeover_start = t

            control = expert_control if takeover_start is not None else proposed
            if self.record:
                trace.append(TickRecord(t, state, reading, cloud, route_obs, control, takeover_start is not None))

            state = step_vehicle(state, control, sim.dt, sim)
            t += sim.dt
            if reached_finish(state, self.route):
                completed = True
                break

        if takeover_start is not None:
            # a takeover lasts at least min_takeover even when the episode ends first
            ledger.records.append(InterventionRecord(takeover_start, max(t, takeover_start + sim.min_takeover)))

        tail: List[VehicleState] = []
        if self.record:
            brake = ControlCommand(0.0, 0.0)
            for _ in range(int(round(BRAKE_TAIL / sim.dt))):
                state = step_vehicle(state, brake, sim.dt, sim)
                tail.append(state)

        status = "finished" if completed else "timed out"
        print(f"[Episode] {self.world.name}/{self.route.name} {status} after {t:.2f}s, "
              f"{ledger.count} interventions ({ledger.total_time:.2f}s)")
        return EpisodeResult(self.world.name, self.route.name, completed, t, ledger, trace, tail)
