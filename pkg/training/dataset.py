"""
Dataset Module
Assembles behaviour-cloning samples from episode logs. Route points are
recovered by replaying each log through the same heading filter and route
tracker the driving agent uses; clouds stay compact and are projected per batch.
"""
import glob
import os
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from agents.model_agent import RouteFollower
from config import LOG_RATE_HZ, ModelConfig
from core.errors import InvalidArgumentError, LogFormatError
from model.network import ModelBatch
from perception.projection import LabeledPointCloud, project_bev, project_front
from simulation.datagen import read_manifest
from simulation.episode_log import EpisodeLog, read_log

LOG_PATTERN = "*.dpl"


@dataclass
class DrivingSample:
    """One training example; the cloud is projected only when batched."""

    cloud: LabeledPointCloud
    route: np.ndarray           # [rp1.x, rp1.y, rp2.x, rp2.y]
    omega: np.ndarray           # [omega_l, omega_r]
    command: int
    waypoints: np.ndarray       # 6 values, meters
    steering: float
    throttle: float
    source: str = ""
    condition: str = ""
    repeat: int = 0


@dataclass
class DrivingDataset:
    samples: List[DrivingSample] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[DrivingSample]:
        return iter(self.samples)

    def subset(self, indices: Sequence[int]) -> "DrivingDataset":
        return DrivingDataset([self.samples[i] for i in indices])

    def sources(self) -> List[str]:
        """Distinct log names in first-seen order."""
        return list(dict.fromkeys(s.source for s in self.samples))

    def where(self, **fields) -> "DrivingDataset":
        return DrivingDataset([s for s in self.samples if all(getattr(s, k) == v for k, v in fields.items())])

    def targets(self, indices: Optional[Sequence[int]] = None) -> Dict[str, np.ndarray]:
        chosen = self.samples if indices is None else [self.samples[i] for i in indices]
        return {
            "waypoints": np.array([s.waypoints for s in chosen], dtype=np.float64).reshape(len(chosen), -1),
            "steering": np.array([s.steering for s in chosen], dtype=np.float64),
            "throttle": np.array([s.throttle for s in chosen], dtype=np.float64),
        }

    def batch(self, indices: Sequence[int], config: ModelConfig) -> ModelBatch:
        """Project the selected clouds and stack them with their targets."""
        chosen = [self.samples[i] for i in indices]
        if not chosen:
            raise InvalidArgumentError("cannot build an empty batch")
        front = np.stack([project_front(s.cloud, config.front_grid).to_channels() for s in chosen]) if config.uses_front else None
        bev = np.stack([project_bev(s.cloud, config.bev_grid).to_channels() for s in chosen]) if config.uses_bev else None
        return ModelBatch(
            front=front,
            bev=bev,
            route=np.stack([s.route for s in chosen]).astype(np.float64),
            omega=np.stack([s.omega for s in chosen]).astype(np.float64),
            command=np.array([s.command for s in chosen], dtype=np.int64),
            targets=self.targets(indices),
        )

    def batches(self, config: ModelConfig, batch_size: int, order: Optional[Sequence[int]] = None) -> Iterator[ModelBatch]:
        order = np.arange(len(self)) if order is None else np.asarray(order)
        for start in range(0, len(order), batch_size):
            yield self.batch(order[start:start + batch_size], config)


def samples_from_log(
    log: EpisodeLog,
    source: str = "",
    condition: str = "",
    repeat: int = 0,
    use_logged_commands: bool = False,
    stride: int = 1,
) -> List[DrivingSample]:
    """
    Replay a log through the route follower to recover Rp1/Rp2 and the command.

    Args:
        log: Parsed episode log
        use_logged_commands: Keep the logged command instead of deriving it from the route points
        stride: Keep every ``stride``-th sample (the follower still sees all of them)
    """
    follower = RouteFollower(log.route)
    samples = []
    previous = None
    for i, rec in enumerate(log.samples):
        dt = 1.0 / LOG_RATE_HZ if previous is None else rec.timestamp - previous
        previous = rec.timestamp
        obs = follower.observe(rec.gnss, rec.imu, dt)
        if i % stride:
            continue
        samples.append(DrivingSample(
            cloud=rec.cloud,
            route=np.array([obs.rp1.x, obs.rp1.y, obs.rp2.x, obs.rp2.y]),
            omega=np.array([rec.omega_l, rec.omega_r]),
            command=int(rec.command) if use_logged_commands else int(obs.command),
            waypoints=np.asarray(rec.waypoints, dtype=np.float64).reshape(6),
            steering=float(rec.steering),
            throttle=float(rec.throttle),
            source=source,
            condition=condition,
            repeat=repeat,
        ))
    return samples


def _parse_name(name: str) -> Tuple[str, int]:
    """Condition and repeat from ``{scene}_{route}_{condition}_r{k}``."""
    parts = name.split("_")
    if len(parts) >= 2 and parts[-1].startswith("r") and parts[-1][1:].isdigit():
        return parts[-2], int(parts[-1][1:])
    return "", 0


def list_logs(log_dir: str, split: Optional[str] = None) -> List[Dict]:
    """
    Log entries of a directory: manifest entries when a manifest exists,
    otherwise every ``*.dpl`` file with condition/repeat parsed from its name.
    """
    manifest = read_manifest(log_dir)
    if manifest:
        entries = [dict(e, path=os.path.join(log_dir, e["file"])) for e in manifest]
    else:
        entries = []
        for path in sorted(glob.glob(os.path.join(log_dir, LOG_PATTERN))):
            name = os.path.splitext(os.path.basename(path))[0]
            condition, repeat = _parse_name(name)
            entries.append({"file": os.path.basename(path), "path": path, "condition": condition, "repeat": repeat, "split": None})
    if split is not None:
        entries = [e for e in entries if e.get("split") in (split, None)]
    return sorted(entries, key=lambda e: e["file"])


def load_dataset(
    log_dir: str,
    split: Optional[str] = "trainval",
    use_logged_commands: bool = False,
    stride: int = 1,
    skip_corrupt: bool = True,
) -> DrivingDataset:
    """
    Load every log of ``split`` under ``log_dir``.

    Raises:
        LogFormatError: A log is corrupt and ``skip_corrupt`` is off
    """
    dataset = DrivingDataset()
    entries = list_logs(log_dir, split)
    for entry in entries:
        name = os.path.splitext(entry["file"])[0]
        try:
            log = read_log(entry["path"], strict=not skip_corrupt)
        except LogFormatError as e:
            if not skip_corrupt:
                raise
            warnings.warn(f"skipping {entry['file']}: {e}")
            continue
        dataset.samples.extend(samples_from_log(
            log, name, entry.get("condition", ""), int(entry.get("repeat", 0)), use_logged_commands, stride,
        ))
    print(f"[Dataset] {len(dataset)} samples from {len(entries)} logs in {log_dir}")
    return dataset


def split_dataset(dataset: DrivingDataset, val_fraction: float, seed: int) -> Tuple[DrivingDataset, DrivingDataset, List[str]]:
    """
    Seeded train/val split by whole logs so validation never sees a training
    episode; a single-log dataset is split by samples instead.

    Returns:
        (train, val, validation log names)
    """
    rng = np.random.default_rng(seed)
    sources = dataset.sources()
    if len(sources) > 1:
        order = [sources[i] for i in rng.permutation(len(sources))]
        n_val = min(len(sources) - 1, max(1, int(round(val_fraction * len(sources)))))
        held_out = set(order[:n_val])
        train = DrivingDataset([s for s in dataset.samples if s.source not in held_out])
        val = DrivingDataset([s for s in dataset.samples if s.source in held_out])
        return train, val, sorted(held_out)
    if len(dataset) < 2:
        raise InvalidArgumentError("need at least two samples to split into train and validation")
    order = rng.permutation(len(dataset))
    n_val = min(len(dataset) - 1, max(1, int(round(val_fraction * len(dataset)))))
    return dataset.subset(sorted(order[n_val:])), dataset.subset(sorted(order[:n_val])), list(sources)
