import json
import os

import numpy as np
import pytest

from config import GridConfig, LidarConfig, ModelConfig, SimConfig, StageSpec
from database.run_store import RunStore
from navigation.geo import GeoPoint, geo_delta_inverse
from navigation.heading_filter import ImuSample
from perception.projection import LabeledPointCloud
from simulation.episode_log import EpisodeLog, ObservationSample, write_log

ORIGIN = GeoPoint(34.7050, 135.4990)


@pytest.fixture
def tiny_model_config():
    """Small float64 layout; both encoders end at 8×2×4."""
    return ModelConfig(
        front_grid=GridConfig(mode="front", height=8, width=32),
        bev_grid=GridConfig(mode="bev", height=16, width=16),
        front_stages=[
            StageSpec(out_channels=4, dilations=[1, 2], pool=(2, 4)),
            StageSpec(out_channels=8, pool=(2, 2)),
        ],
        bev_stages=[
            StageSpec(out_channels=4, dilations=[1, 2], pool=(4, 2)),
            StageSpec(out_channels=8, pool=(2, 2)),
        ],
        fusion_channels=8,
        latent_size=16,
        mlp_hidden=[8],
        dtype="float64",
        init_seed=0,
    )


@pytest.fixture
def tiny_lidar():
    return LidarConfig(rings=4, azimuth_steps=72)


@pytest.fixture
def quiet_sim():
    return SimConfig(gnss_noise=0.0, gyro_noise=0.0, accel_noise=0.0, mag_noise=0.0)


SCENE = {
    "name": "strip",
    "origin": {"lat": ORIGIN.lat, "lon": ORIGIN.lon},
    "background_class": 17,
    "regions": [
        {"class": 11, "polygon": [[-6, -10], [6, -10], [6, 60], [-6, 60]]},
        {"class": 9, "polygon": [[-4, -10], [4, -10], [4, 60], [-4, 60]]},
    ],
    "obstacles": [
        {"class": 13, "height": 5.0, "polygon": [[9, 10], [15, 10], [15, 30], [9, 30]]},
    ],
    "route_paths": [
        {"name": "north", "split": "trainval", "path": [[0, 0], [0, 40]]},
        {"name": "north_test", "split": "test", "path": [[0, 2], [0, 42]]},
    ],
    "spawn": {
        "parked": [[-8.0, 20.0, 0.0]],
        "walkways": [[[8.0, 0.0], [8.0, 8.0]]],
    },
}


@pytest.fixture
def scene_file(tmp_path):
    path = tmp_path / "strip.json"
    path.write_text(json.dumps(SCENE), encoding="utf-8")
    return str(path)


@pytest.fixture
def store(tmp_path):
    return RunStore(str(tmp_path / "registry.db"))


def _straight_log(
    n: int = 12,
    speed: float = 1.0,
    steering: float = 0.1,
    throttle: float = 0.8,
    seed: int = 0,
    route_x: float = 0.0,
) -> EpisodeLog:
    """
    Vehicle driving north along x = 0 at ``speed``; route points every 12 m
    along x = ``route_x``; a handful of random points ahead of it.
    """
    rng = np.random.default_rng(seed)
    route = [geo_delta_inverse(ORIGIN, route_x, 12.0 * k) for k in range(4)]
    samples = []
    for i in range(n):
        t = i / 4.0
        fix = geo_delta_inverse(ORIGIN, 0.0, speed * t)
        xyz = np.column_stack([rng.uniform(-6, 6, 30), rng.uniform(1, 15, 30), rng.uniform(-1, 0.5, 30)])
        classes = rng.integers(0, 20, 30)
        samples.append(ObservationSample(
            timestamp=t,
            cloud=LabeledPointCloud(xyz, classes, t),
            gnss=fix,
            imu=ImuSample(accel=[0.0, 0.0, 9.81], gyro=[0.0, 0.0, 0.0], mag=[0.0, 1.0, -0.6]),
            omega_l=speed / 0.15,
            omega_r=speed / 0.15,
            steering=steering,
            throttle=throttle,
            waypoints=np.array([0.0, speed, 0.0, 2 * speed, 0.0, 3 * speed]),
            command=0,
        ))
    return EpisodeLog(route=route, samples=samples)


@pytest.fixture
def make_log():
    return _straight_log


@pytest.fixture
def log_dir(tmp_path):
    """Six synthetic logs: two conditions × three repeats, no manifest."""
    directory = tmp_path / "logs"
    for c_idx, condition in enumerate(("sparse", "dense")):
        for k in range(3):
            log = _straight_log(n=8, steering=0.1 * (c_idx + 1), seed=10 * c_idx + k)
            write_log(os.path.join(str(directory), f"strip_north_{condition}_r{k}.dpl"), log)
    return str(directory)
