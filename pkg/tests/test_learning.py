import os

import numpy as np
import pytest

from agents.controller import init_control_weights
from agents.model_agent import ConstantModel
from config import EvalConfig, TrainConfig
from evaluation.offline import load_eval_logs, offline_eval
from evaluation.online import online_eval
from model.network import DrivingNetwork
from perception.projection import LabeledPointCloud, project_bev, project_front
from simulation.datagen import generate_dataset
from simulation.episode_log import write_log
from simulation.world import load_scene
from training.dataset import load_dataset
from training.trainer import train

TRAIN = TrainConfig(batch_size=16, learning_rate=3e-3, max_epochs=40, early_stop_patience=40,
                    val_fraction=0.25, seed=0, show_progress=False)


def spherical_patch(r, azimuths, elevations):
    """Points at range ``r`` on a 1-degree azimuth/elevation lattice."""
    az, el = np.meshgrid(np.radians(azimuths), np.radians(elevations))
    az, el = az.ravel(), el.ravel()
    return np.column_stack([r * np.cos(el) * np.sin(az), r * np.cos(el) * np.cos(az), r * np.sin(el)])


# near wall that hides everything behind it from the front view
WALL = spherical_patch(2.0, np.arange(35.0, 86.0), np.arange(-30.0, 11.0))
# behind the wall and inside the BEV extents: only the BEV sees its class
THROTTLE_CUE = spherical_patch(8.0, np.arange(45.0, 76.0), np.arange(-5.0, 6.0))
# straight ahead beyond the BEV's forward range: only the front view sees it
_x, _y = np.meshgrid(np.linspace(-5.0, 5.0, 21), np.linspace(20.0, 28.0, 9))
STEERING_CUE = np.column_stack([_x.ravel(), _y.ravel(), np.zeros(_x.size)])


def cue_cloud(steer_left: bool, fast: bool, t: float) -> LabeledPointCloud:
    classes = np.concatenate([
        np.full(len(WALL), 13),
        np.full(len(STEERING_CUE), 1 if steer_left else 13),
        np.full(len(THROTTLE_CUE), 6 if fast else 15),
    ])
    return LabeledPointCloud(np.vstack([WALL, STEERING_CUE, THROTTLE_CUE]), classes, t)


def write_cue_logs(directory, make_log, repeats, seed):
    """
    Straight-driving logs whose steering label follows a front-only cue and
    whose throttle label follows a BEV-only cue; every log holds each of the
    four combinations equally often.
    """
    rng = np.random.default_rng(seed)
    for k in range(repeats):
        log = make_log(n=16, seed=seed + k)
        for sample, combo in zip(log.samples, rng.permutation(np.repeat(np.arange(4), 4))):
            steer_left, fast = bool(combo & 1), bool(combo & 2)
            sample.cloud = cue_cloud(steer_left, fast, sample.timestamp)
            sample.steering = 0.5 if steer_left else -0.5
            sample.throttle = 0.8 if fast else 0.2
        write_log(os.path.join(directory, f"cue_north_sparse_r{k}.dpl"), log)
    return directory


def test_cues_are_split_between_the_perspectives(tiny_model_config):
    front, bev = tiny_model_config.front_grid, tiny_model_config.bev_grid
    a, b = cue_cloud(True, True, 0.0), cue_cloud(False, False, 0.0)
    steer_only, throttle_only = cue_cloud(True, False, 0.0), cue_cloud(False, True, 0.0)
    assert not np.array_equal(project_front(a, front).to_channels(), project_front(b, front).to_channels())
    np.testing.assert_array_equal(project_front(throttle_only, front).to_channels(), project_front(b, front).to_channels())
    np.testing.assert_array_equal(project_bev(steer_only, bev).to_channels(), project_bev(b, bev).to_channels())
    assert not np.array_equal(project_bev(throttle_only, bev).to_channels(), project_bev(b, bev).to_channels())


@pytest.mark.slow
def test_front_bev_beats_the_constant_baseline_and_every_ablation(tmp_path, make_log, tiny_model_config):
    train_dir = write_cue_logs(str(tmp_path / "train"), make_log, repeats=8, seed=0)
    test_set = load_eval_logs(write_cue_logs(str(tmp_path / "test"), make_log, repeats=4, seed=100))

    constant = ConstantModel.fit(load_dataset(train_dir), tiny_model_config)
    baseline = offline_eval(constant, test_set, "constant")[0].tm

    tm = {}
    for name, update in (
        ("front_bev", {}),
        ("front", {"perspective": "front"}),
        ("bev", {"perspective": "bev"}),
        ("depth", {"input_variant": "depth"}),
    ):
        config = tiny_model_config.model_copy(update=update)
        result = train(load_dataset(train_dir), config, TRAIN, str(tmp_path / name))
        tm[name] = offline_eval(DrivingNetwork.load(result.best_dir), test_set, name)[0].tm

    assert tm["front_bev"] < baseline
    assert tm["front_bev"] <= tm["front"]
    assert tm["front_bev"] <= tm["bev"]
    # log depth alone cannot tell the cue classes apart
    assert tm["front_bev"] <= tm["depth"]


@pytest.mark.slow
def test_trained_model_needs_no_more_takeovers_than_an_untrained_one(tmp_path, scene_file, quiet_sim, tiny_lidar,
                                                                     tiny_model_config):
    log_dir = str(tmp_path / "logs")
    generate_dataset(log_dir, [scene_file], ["sparse", "dense"], seed=0, sim=quiet_sim, lidar=tiny_lidar,
                     splits=["trainval"], workers=1, show_progress=False)
    result = train(load_dataset(log_dir), tiny_model_config,
                   TRAIN.model_copy(update={"max_epochs": 20, "val_fraction": 0.5}), str(tmp_path / "train"))

    scenes = {"strip": load_scene(scene_file)}
    drive = dict(conditions=["sparse"], eval_config=EvalConfig(repeats=1), sim=quiet_sim, lidar=tiny_lidar,
                 show_progress=False)
    trained, _ = online_eval(DrivingNetwork.load(result.best_dir), scenes, "trained",
                             weights=init_control_weights(result.best_alpha), **drive)
    untrained, _ = online_eval(DrivingNetwork(tiny_model_config), scenes, "untrained", **drive)

    assert trained[0].incomplete == 0
    assert trained[0].interventions <= untrained[0].interventions
