# Behaviour-cloning training: losses, adaptive loss weights, datasets, trainer
from .dataset import DrivingDataset, DrivingSample, list_logs, load_dataset, samples_from_log, split_dataset
from .losses import TASKS, TaskLosses, mtl_loss, task_errors
from .mgn import MgnState, mgn_update, normalize_weights, shared_gradient_norms
from .trainer import (
    EarlyStopping,
    PlateauScheduler,
    SplitScores,
    Trainer,
    TrainResult,
    evaluate_split,
    load_alpha,
    train,
)

__all__ = [
    "DrivingDataset",
    "DrivingSample",
    "list_logs",
    "load_dataset",
    "samples_from_log",
    "split_dataset",
    "TASKS",
    "TaskLosses",
    "mtl_loss",
    "task_errors",
    "MgnState",
    "mgn_update",
    "normalize_weights",
    "shared_gradient_norms",
    "EarlyStopping",
    "PlateauScheduler",
    "SplitScores",
    "Trainer",
    "TrainResult",
    "evaluate_split",
    "load_alpha",
    "train",
]
