# Closed-loop simulator: scenes, raycast LiDAR, vehicle, sensors, safety driver, logs
from .datagen import generate_dataset, plan_jobs, read_manifest, run_expert_episode, samples_from_result
from .episode_log import EpisodeLog, ObservationSample, read_log, write_log
from .interventions import InterventionLedger, InterventionRecord, TakeoverDecision, intervention_monitor, predict_path
from .lidar import ray_directions, raycast_reference, raycast_scan
from .sensors import SensorReading, sense
from .vehicle import VehicleState, step_vehicle, wheel_speeds
from .world import Obstacle, Region, RouteSpec, Walker, World, load_scene, load_scenes, scene_path

__all__ = [
    "generate_dataset",
    "plan_jobs",
    "read_manifest",
    "run_expert_episode",
    "samples_from_result",
    "EpisodeLog",
    "ObservationSample",
    "read_log",
    "write_log",
    "InterventionLedger",
    "InterventionRecord",
    "TakeoverDecision",
    "intervention_monitor",
    "predict_path",
    "ray_directions",
    "raycast_reference",
    "raycast_scan",
    "SensorReading",
    "sense",
    "VehicleState",
    "step_vehicle",
    "wheel_speeds",
    "Obstacle",
    "Region",
    "RouteSpec",
    "Walker",
    "World",
    "load_scene",
    "load_scenes",
    "scene_path",
]
