"""
Offline Evaluation Module
Replays held-out expert logs through a model and scores waypoint, steering and
throttle errors per traffic condition, averaged over the repeated drives.
"""
import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from config import CONDITIONS, ControllerConfig, EvalConfig, ModelConfig
from core.errors import InvalidArgumentError
from training.dataset import DrivingDataset, load_dataset
from training.trainer import SplitScores, evaluate_split


@dataclass
class OfflineRow:
    condition: str
    model: str
    mae_wp: float
    mae_st: float
    mae_th: float
    tm: float
    tm_std: float
    repeats: int = 1
    samples: int = 0

    def metrics(self) -> Dict[str, float]:
        return {
            "mae_wp": self.mae_wp,
            "mae_st": self.mae_st,
            "mae_th": self.mae_th,
            "tm": self.tm,
            "tm_std": self.tm_std,
            "repeats": self.repeats,
            "samples": self.samples,
        }


def load_eval_logs(log_dir: str, eval_config: EvalConfig = None, controller: ControllerConfig = None) -> DrivingDataset:
    """Logs of the evaluation split; commands re-derived unless the controller says otherwise."""
    eval_config = eval_config or EvalConfig()
    controller = controller or ControllerConfig()
    return load_dataset(
        log_dir,
        split=eval_config.split,
        use_logged_commands=controller.use_logged_commands,
        skip_corrupt=eval_config.skip_corrupt,
    )


def dataset_conditions(dataset: DrivingDataset) -> List[str]:
    """Conditions present, in the canonical order first."""
    present = {s.condition for s in dataset}
    return [c for c in CONDITIONS if c in present] + sorted(present - set(CONDITIONS))


def score_condition(model, dataset: DrivingDataset, condition: str, model_name: str, config: ModelConfig = None) -> OfflineRow:
    """
    Per-repeat MAEs for one condition; the row holds their means and the
    std of the per-repeat total metric.
    """
    subset = dataset.where(condition=condition)
    if len(subset) == 0:
        raise InvalidArgumentError(f"no evaluation samples for condition '{condition}'")
    repeats = sorted({s.repeat for s in subset})
    runs: List[SplitScores] = [evaluate_split(model, subset.where(repeat=k), config) for k in repeats]
    mae = np.array([[r.mae_wp, r.mae_st, r.mae_th] for r in runs]).mean(axis=0)
    tm_runs = np.array([r.tm for r in runs])
    return OfflineRow(
        condition=condition,
        model=model_name,
        mae_wp=float(mae[0]),
        mae_st=float(mae[1]),
        mae_th=float(mae[2]),
        tm=float(mae[0]) + float(mae[1]) + float(mae[2]),
        tm_std=float(tm_runs.std()),
        repeats=len(runs),
        samples=len(subset),
    )


def offline_eval(
    model,
    dataset: DrivingDataset,
    model_name: str = "model",
    conditions: Optional[Sequence[str]] = None,
    config: ModelConfig = None,
) -> List[OfflineRow]:
    """
    Score ``model`` on every requested condition of ``dataset``.

    Args:
        model: Network or stub with ``predict_batch``
        dataset: Evaluation samples (see ``load_eval_logs``)
        model_name: Label for the report rows
        conditions: Conditions to report, default every condition present

    Returns:
        One OfflineRow per condition, in request order
    """
    conditions = list(conditions) if conditions else dataset_conditions(dataset)
    if not conditions:
        warnings.warn("offline evaluation found no samples")
    rows = []
    for condition in conditions:
        row = score_condition(model, dataset, condition, model_name, config)
        print(f"[Eval] {model_name} {condition}: wp={row.mae_wp:.4f} st={row.mae_st:.4f} "
              f"th={row.mae_th:.4f} TM={row.tm:.4f}±{row.tm_std:.4f} over {row.repeats} repeats")
        rows.append(row)
    return rows
