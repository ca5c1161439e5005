"""
Data Generation Module
Runs the expert over the scene × route × condition matrix and writes one
episode log per run plus a manifest.
"""
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from config import CONDITIONS, SCENE_DIRECTORY, SHOW_PROGRESS, LidarConfig, SimConfig
from navigation.geo import world_to_local
from perception.projection import LabeledPointCloud
from .episode_log import EpisodeLog, ObservationSample, write_log
from .world import RouteSpec, World, load_scene, scene_path

MANIFEST_FILE = "manifest.json"
WAYPOINT_HORIZONS = (1.0, 2.0, 3.0)


@dataclass(frozen=True)
class EpisodeJob:
    scene: str
    route: str
    condition: str
    repeat: int
    split: str
    entropy: tuple

    @property
    def file_name(self) -> str:
        return f"{self.scene}_{self.route}_{self.condition}_r{self.repeat}.dpl"


def episode_rngs(entropy: Sequence[int]):
    """Independent generators for traffic placement and sensor noise."""
    traffic, noise = np.random.SeedSequence(list(entropy)).spawn(2)
    return np.random.default_rng(traffic), np.random.default_rng(noise)


def populate_condition(world: World, condition: str, rng: np.random.Generator) -> World:
    counts = CONDITIONS[condition]
    return world.populate(counts["parked"], counts["walkers"], rng)


def future_waypoints(poses, index: int, steps: Sequence[int]) -> np.ndarray:
    """Positions ``steps`` ticks after ``index`` in the vehicle frame at ``index``."""
    now = poses[index]
    last = len(poses) - 1
    targets = np.array([poses[min(index + s, last)].position for s in steps])
    return world_to_local(targets, now.position, now.heading).reshape(-1)


def _forward_half(cloud: LabeledPointCloud) -> LabeledPointCloud:
    keep = cloud.xyz[:, 1] >= 0.0
    return LabeledPointCloud(cloud.xyz[keep], cloud.classes[keep], cloud.timestamp)


def samples_from_result(result, sim: SimConfig) -> List[ObservationSample]:
    """
    Turn a recorded episode into log samples. Ground-truth waypoints come from
    the true future poses, braking tail included.
    """
    poses = result.poses
    steps = [int(round(h / sim.dt)) for h in WAYPOINT_HORIZONS]
    samples = []
    for i, rec in enumerate(result.trace):
        cloud = _forward_half(rec.cloud) if sim.log_forward_only else rec.cloud
        samples.append(ObservationSample(
            timestamp=rec.t,
            cloud=cloud,
            gnss=rec.reading.gnss,
            imu=rec.reading.imu,
            omega_l=rec.reading.omega_l,
            omega_r=rec.reading.omega_r,
            steering=rec.control.steering,
            throttle=rec.control.throttle,
            waypoints=future_waypoints(poses, i, steps),
            command=int(rec.route.command),
        ))
    return samples


def run_expert_episode(
    world: World,
    route: RouteSpec,
    condition: str,
    entropy: Sequence[int],
    sim: SimConfig = None,
    lidar: LidarConfig = None,
):
    """
    Drive ``route`` with the expert under ``condition`` and record it.

    Returns:
        (EpisodeLog, EpisodeResult)
    """
    from agents.orchestrator import EpisodeOrchestrator, expert_time

    sim = sim or SimConfig()
    traffic_rng, noise_rng = episode_rngs(entropy)
    populate_condition(world, condition, traffic_rng)
    orchestrator = EpisodeOrchestrator(
        world, route, agent=None, sim=sim, lidar=lidar, rng=noise_rng, monitor=True, record=True,
        timeout=3.0 * expert_time(world, route, sim),
    )
    result = orchestrator.run()
    return EpisodeLog(route=list(route.points), samples=samples_from_result(result, sim)), result


def _run_job(job: EpisodeJob, out_dir: str, directory: str, sim: SimConfig, lidar: LidarConfig) -> Dict:
    world = load_scene(scene_path(job.scene, directory))
    log, result = run_expert_episode(world, world.route(job.route), job.condition, job.entropy, sim, lidar)
    write_log(os.path.join(out_dir, job.file_name), log)
    entry = asdict(job)
    entry.pop("entropy")
    entry.update(file=job.file_name, samples=len(log), interventions=result.interventions, completed=result.completed)
    return entry


def plan_jobs(
    scenes: Dict[str, World],
    conditions: Sequence[str],
    seed: int,
    splits: Sequence[str] = ("trainval", "test"),
    test_repeats: int = 3,
) -> List[EpisodeJob]:
    """Train-val routes once per condition; test routes ``test_repeats`` times."""
    jobs = []
    for s_idx, (name, world) in enumerate(sorted(scenes.items())):
        for r_idx, route in enumerate(world.routes):
            if route.split not in splits:
                continue
            repeats = test_repeats if route.split == "test" else 1
            for c_idx, condition in enumerate(conditions):
                if condition not in CONDITIONS:
                    raise ValueError(f"unknown condition '{condition}'")
                for k in range(repeats):
                    jobs.append(EpisodeJob(name, route.name, condition, k, route.split, (seed, s_idx, r_idx, c_idx, k)))
    return jobs


def generate_dataset(
    out_dir: str,
    scene_names: Sequence[str],
    conditions: Sequence[str],
    seed: int,
    sim: SimConfig = None,
    lidar: LidarConfig = None,
    splits: Sequence[str] = ("trainval", "test"),
    test_repeats: int = 3,
    directory: str = SCENE_DIRECTORY,
    workers: Optional[int] = None,
    show_progress: bool = SHOW_PROGRESS,
) -> List[Dict]:
    """
    Generate expert logs for every scene × route × condition (× repeat).

    Args:
        out_dir: Destination for the .dpl logs and manifest.json
        scene_names: Bundled scene names or scene file paths
        conditions: Traffic conditions
        seed: Root seed; each episode derives its own stream

    Returns:
        Manifest entries, one per written log
    """
    sim = sim or SimConfig()
    lidar = lidar or LidarConfig()
    workers = workers or sim.workers
    os.makedirs(out_dir, exist_ok=True)
    scenes = {os.path.splitext(os.path.basename(n))[0]: load_scene(scene_path(n, directory)) for n in scene_names}
    jobs = plan_jobs(scenes, conditions, seed, splits, test_repeats)
    print(f"[DataGen] {len(jobs)} episodes over {len(scenes)} scenes -> {out_dir}")

    # scene names may be file paths; workers resolve them from the directory of each file
    lookup = {os.path.splitext(os.path.basename(n))[0]: os.path.dirname(scene_path(n, directory)) for n in scene_names}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_job, job, out_dir, lookup[job.scene], sim, lidar) for job in jobs]
            entries = [f.result() for f in tqdm(futures, desc="episodes", disable=not show_progress)]
    else:
        entries = [_run_job(job, out_dir, lookup[job.scene], sim, lidar) for job in tqdm(jobs, desc="episodes", disable=not show_progress)]

    with open(os.path.join(out_dir, MANIFEST_FILE), "w", encoding="utf-8") as f:
        json.dump({"seed": seed, "episodes": entries}, f, indent=2, sort_keys=True)
    bad = [e["file"] for e in entries if e["interventions"] or not e["completed"]]
    if bad:
        print(f"[DataGen] warning: expert needed help or timed out on {len(bad)} episodes: {', '.join(bad[:5])}")
    print(f"[DataGen] wrote {len(entries)} logs, {sum(e['samples'] for e in entries)} samples")
    return entries


def read_manifest(log_dir: str) -> List[Dict]:
    path = os.path.join(log_dir, MANIFEST_FILE)
    if not os.path.exists(path):
        return []
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)["episodes"]
