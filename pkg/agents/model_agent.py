"""
Model Agent Module
Drives from sensor readings alone: heading filter and route tracker for the
route points, projection of the LiDAR cloud, network inference and the fused
control policy.
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Protocol, Sequence

import numpy as np

from config import ControllerConfig, ModelConfig, ROUTE_REACH_RADIUS, FINISH_RADIUS
from core.errors import InvalidArgumentError
from model.network import ModelBatch, ObservationInput
from navigation.geo import Bearing, GeoPoint, LocalPoint
from navigation.heading_filter import (
    HeadingFilterConfig,
    HeadingFilterState,
    ImuSample,
    heading_update,
    tilt_compensated_heading,
)
from navigation.route import RouteTracker
from perception.projection import LabeledPointCloud, project_bev, project_front
from .controller import Command, ControlCommand, ControlPolicy, ControlWeights, derive_command


class Predictor(Protocol):
    """Anything that maps a ModelBatch to waypoints, steering and throttle."""

    config: ModelConfig

    def predict_batch(self, batch: ModelBatch) -> Dict[str, np.ndarray]:
        ...


class ZeroModel:
    """Outputs zero waypoints, steering and throttle."""

    def __init__(self, config: ModelConfig = None):
        self.config = config or ModelConfig()

    def predict_batch(self, batch: ModelBatch) -> Dict[str, np.ndarray]:
        n = len(batch)
        return {
            "waypoints": np.zeros((n, 2 * self.config.waypoint_steps)),
            "steering": np.zeros(n),
            "throttle": np.zeros(n),
        }


class OracleModel:
    """Returns the batch's own targets; scores a perfect offline run."""

    def __init__(self, config: ModelConfig = None):
        self.config = config or ModelConfig()

    def predict_batch(self, batch: ModelBatch) -> Dict[str, np.ndarray]:
        if batch.targets is None:
            raise InvalidArgumentError("the oracle needs a batch with targets")
        return {k: np.array(batch.targets[k], dtype=np.float64) for k in ("waypoints", "steering", "throttle")}


class ConstantModel:
    """Predicts the per-output median of a training split for every sample."""

    def __init__(self, values: Dict[str, np.ndarray], config: ModelConfig = None):
        self.config = config or ModelConfig()
        self.values = {k: np.asarray(v, dtype=np.float64) for k, v in values.items()}

    @classmethod
    def fit(cls, dataset, config: ModelConfig = None) -> "ConstantModel":
        if len(dataset) == 0:
            raise InvalidArgumentError("cannot fit a constant model on an empty dataset")
        targets = dataset.targets()
        values = {k: np.median(v, axis=0) for k, v in targets.items()}
        print(f"[Model] Constant baseline from {len(dataset)} samples: "
              f"steering {float(values['steering']):.3f}, throttle {float(values['throttle']):.3f}")
        return cls(values, config)

    def predict_batch(self, batch: ModelBatch) -> Dict[str, np.ndarray]:
        n = len(batch)
        return {
            "waypoints": np.tile(self.values["waypoints"], (n, 1)),
            "steering": np.full(n, float(self.values["steering"])),
            "throttle": np.full(n, float(self.values["throttle"])),
        }


@dataclass
class RouteObservation:
    rp1: LocalPoint
    rp2: LocalPoint
    command: Command
    bearing: float


class RouteFollower:
    """
    Heading filter plus route tracker: turns GNSS fixes and IMU samples into
    the two route points in the vehicle frame and the derived command.
    """

    def __init__(
        self,
        route: Sequence[GeoPoint],
        filter_config: HeadingFilterConfig = HeadingFilterConfig(),
        reach_radius: float = ROUTE_REACH_RADIUS,
        finish_radius: float = FINISH_RADIUS,
    ):
        self.filter_config = filter_config
        self.tracker = RouteTracker(route, reach_radius, finish_radius)
        self.state: Optional[HeadingFilterState] = None

    def reset(self) -> None:
        self.tracker.index = 0
        self.state = None

    def observe(self, fix: GeoPoint, imu: ImuSample, dt: float) -> RouteObservation:
        if self.state is None:
            initial = tilt_compensated_heading(imu.accel, imu.mag)
            self.state = HeadingFilterState(bearing=initial if initial is not None else 0.0)
            if initial is None:
                self.state = heading_update(self.state, imu, dt, self.filter_config)
        else:
            self.state = heading_update(self.state, imu, dt, self.filter_config)
        bearing = Bearing(self.state.bearing)
        rp1, rp2 = self.tracker.update(fix, bearing)
        return RouteObservation(rp1, rp2, derive_command(rp1, rp2), bearing.theta_ro)

    def finished(self, fix: GeoPoint) -> bool:
        return self.tracker.finished(fix)


def build_observation(
    config: ModelConfig,
    cloud: LabeledPointCloud,
    route: RouteObservation,
    omega_l: float,
    omega_r: float,
) -> ObservationInput:
    """Project the cloud for the perspectives the model uses."""
    return ObservationInput(
        front_grid=project_front(cloud, config.front_grid) if config.uses_front else None,
        bev_grid=project_bev(cloud, config.bev_grid) if config.uses_bev else None,
        rp1=route.rp1,
        rp2=route.rp2,
        omega_l=omega_l,
        omega_r=omega_r,
        command=int(route.command),
    )


class DrivingAgent:
    """
    Closed-loop agent: sense -> route points -> projection -> network -> fused control.
    """

    needs_lidar = True

    def __init__(
        self,
        model: Predictor,
        route: Sequence[GeoPoint],
        controller: ControllerConfig = None,
        weights: Optional[ControlWeights] = None,
        filter_config: HeadingFilterConfig = HeadingFilterConfig(),
    ):
        self.model = model
        self.controller_config = controller or ControllerConfig()
        self.policy = ControlPolicy(self.controller_config, weights)
        self.follower = RouteFollower(route, filter_config)
        self.last_route: Optional[RouteObservation] = None
        self.last_output: Optional[Dict[str, np.ndarray]] = None

    def reset(self) -> None:
        self.policy.reset()
        self.follower.reset()
        self.last_route = None
        self.last_output = None

    def waypoints(self) -> List[LocalPoint]:
        wps = self.last_output["waypoints"][0].reshape(-1, 2)
        return [LocalPoint(float(x), float(y)) for x, y in wps]

    def act(self, tick) -> ControlCommand:
        reading = tick.reading
        route = self.follower.observe(reading.gnss, reading.imu, self.controller_config.dt)
        obs = build_observation(self.model.config, tick.cloud, route, reading.omega_l, reading.omega_r)
        self.last_route = route
        self.last_output = self.model.predict_batch(ModelBatch.from_observations([obs]))
        return self.policy.act(
            self.waypoints(),
            float(self.last_output["steering"][0]),
            float(self.last_output["throttle"][0]),
            reading.omega_l,
            reading.omega_r,
        )
