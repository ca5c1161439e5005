"""
Online Evaluation Module
Closed-loop driving of the test routes with the safety driver active; counts
takeovers and their duration per traffic condition.
"""
import os
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from agents.controller import ControlWeights
from agents.model_agent import DrivingAgent
from agents.orchestrator import EpisodeOrchestrator, expert_time
from config import CONDITIONS, SHOW_PROGRESS, ControllerConfig, EvalConfig, LidarConfig, SimConfig
from core.errors import InvalidArgumentError
from simulation.datagen import episode_rngs, populate_condition, samples_from_result
from simulation.episode_log import EpisodeLog, write_log
from simulation.world import RouteSpec, World


@dataclass
class EpisodeScore:
    scene: str
    route: str
    condition: str
    repeat: int
    completed: bool
    interventions: int
    intervention_time: float
    elapsed: float


@dataclass
class OnlineRow:
    condition: str
    model: str
    interventions: float
    interventions_std: float
    time_s: float
    time_s_std: float
    episodes: int = 0
    incomplete: int = 0

    def metrics(self) -> Dict[str, float]:
        return {
            "interventions": self.interventions,
            "interventions_std": self.interventions_std,
            "time_s": self.time_s,
            "time_s_std": self.time_s_std,
            "episodes": self.episodes,
            "incomplete": self.incomplete,
        }


def drive_route(
    model,
    world: World,
    route: RouteSpec,
    condition: str,
    entropy: Sequence[int],
    sim: SimConfig = None,
    lidar: LidarConfig = None,
    controller: ControllerConfig = None,
    weights: Optional[ControlWeights] = None,
    timeout_factor: float = 3.0,
    monitor: bool = True,
    record: bool = False,
):
    """
    One closed-loop episode. ``model`` None lets the expert drive.

    Returns:
        EpisodeResult from the orchestrator
    """
    sim = sim or SimConfig()
    traffic_rng, noise_rng = episode_rngs(entropy)
    populate_condition(world, condition, traffic_rng)
    agent = None if model is None else DrivingAgent(model, route.points, controller, weights)
    orchestrator = EpisodeOrchestrator(
        world, route, agent=agent, sim=sim, lidar=lidar, rng=noise_rng, monitor=monitor, record=record,
        timeout=timeout_factor * expert_time(world, route, sim),
    )
    return orchestrator.run()


def _aggregate(scores: List[EpisodeScore], condition: str, model_name: str) -> OnlineRow:
    """Mean over every episode; std of the per-repeat means."""
    repeats = sorted({s.repeat for s in scores})
    counts = np.array([np.mean([s.interventions for s in scores if s.repeat == k]) for k in repeats])
    times = np.array([np.mean([s.intervention_time for s in scores if s.repeat == k]) for k in repeats])
    return OnlineRow(
        condition=condition,
        model=model_name,
        interventions=float(np.mean([s.interventions for s in scores])),
        interventions_std=float(counts.std()),
        time_s=float(np.mean([s.intervention_time for s in scores])),
        time_s_std=float(times.std()),
        episodes=len(scores),
        incomplete=sum(not s.completed for s in scores),
    )


def online_eval(
    model,
    scenes: Dict[str, World],
    model_name: str = "model",
    conditions: Optional[Sequence[str]] = None,
    eval_config: EvalConfig = None,
    controller: ControllerConfig = None,
    sim: SimConfig = None,
    lidar: LidarConfig = None,
    weights: Optional[ControlWeights] = None,
    seed: int = 0,
    routes: Optional[Sequence[str]] = None,
    show_progress: bool = SHOW_PROGRESS,
    replay_dir: Optional[str] = None,
):
    """
    Drive every test route of every scene ``eval_config.repeats`` times per condition.

    Args:
        model: Network with ``predict_batch``, or None for the expert
        scenes: Scene name -> World
        routes: Restrict to these route names (default: the evaluation split)
        replay_dir: When set, every episode is recorded there as an episode log
        weights: Control fusion weights, default from unit loss weights

    Returns:
        (rows per condition, per-episode scores)
    """
    eval_config = eval_config or EvalConfig()
    sim = sim or SimConfig()
    conditions = list(conditions or sim.conditions)
    for condition in conditions:
        if condition not in CONDITIONS:
            raise InvalidArgumentError(f"unknown condition '{condition}'")

    jobs = []
    for s_idx, (name, world) in enumerate(sorted(scenes.items())):
        for r_idx, route in enumerate(world.routes):
            selected = route.name in routes if routes else route.split == eval_config.split
            if not selected:
                continue
            for c_idx, condition in enumerate(conditions):
                for k in range(eval_config.repeats):
                    jobs.append((world, route, condition, k, (seed, s_idx, r_idx, c_idx, k)))
    if not jobs:
        raise InvalidArgumentError("no routes selected for online evaluation")
    print(f"[Eval] driving {len(jobs)} episodes with {model_name}")

    scores: List[EpisodeScore] = []
    for world, route, condition, k, entropy in tqdm(jobs, desc="episodes", disable=not show_progress):
        result = drive_route(
            model, world, route, condition, entropy, sim, lidar, controller, weights, eval_config.timeout_factor,
            record=replay_dir is not None,
        )
        scores.append(EpisodeScore(
            world.name, route.name, condition, k, result.completed,
            result.interventions, result.intervention_time, result.elapsed,
        ))
        if replay_dir is not None:
            name = f"{world.name}_{route.name}_{condition}_r{k}.dpl"
            write_log(os.path.join(replay_dir, name), EpisodeLog(list(route.points), samples_from_result(result, sim)))

    rows = []
    for condition in conditions:
        row = _aggregate([s for s in scores if s.condition == condition], condition, model_name)
        print(f"[Eval] {model_name} {condition}: interventions={row.interventions:.2f}±{row.interventions_std:.2f} "
              f"time={row.time_s:.2f}±{row.time_s_std:.2f}s, {row.incomplete}/{row.episodes} incomplete")
        rows.append(row)
    return rows, scores


def episode_dicts(scores: Sequence[EpisodeScore]) -> List[Dict]:
    return [asdict(s) for s in scores]
