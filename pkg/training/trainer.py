"""
Trainer Module
Behaviour-cloning loop: multi-task L1 loss, adaptive loss weights, AdamW with
a plateau learning-rate schedule, early stopping and best-checkpoint saving.
"""
import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from config import ModelConfig, TrainConfig
from core.errors import InvalidArgumentError, TrainingDivergedError
from core.optim import AdamW
from core.tensor import backward
from model.network import DrivingNetwork, ModelBatch
from .dataset import DrivingDataset, split_dataset
from .losses import TASKS, mtl_loss, task_errors
from .mgn import MgnState, mgn_update, shared_gradient_norms

RUN_LOG_FILE = "run_log.jsonl"
CURVE_FILE = "curve.csv"
BEST_DIR = "best"
ALPHA_FILE = "alpha.json"
DIVERGED_FILE = "diverged_batch.npz"
EVAL_BATCH = 32

CURVE_COLUMNS = [
    "epoch", "lr", "alpha_wp", "alpha_st", "alpha_th",
    "train_wp", "train_st", "train_th", "train_total",
    "val_wp", "val_st", "val_th", "val_total",
]


class SplitScores(NamedTuple):
    """Dataset-averaged absolute errors per task."""

    mae_wp: float
    mae_st: float
    mae_th: float

    @property
    def tm(self) -> float:
        return self.mae_wp + self.mae_st + self.mae_th


@dataclass
class PlateauScheduler:
    """Multiply the lr by ``factor`` once ``patience`` epochs pass without a new strict minimum."""

    lr: float
    patience: int = 5
    factor: float = 0.5
    best: float = math.inf
    stalled: int = 0

    def step(self, val_loss: float) -> float:
        if val_loss < self.best:
            self.best = val_loss
            self.stalled = 0
        else:
            self.stalled += 1
            if self.stalled >= self.patience:
                self.lr *= self.factor
                self.stalled = 0
        return self.lr


@dataclass
class EarlyStopping:
    """Signals a stop after ``patience`` consecutive epochs without a new strict minimum."""

    patience: int = 30
    best: float = math.inf
    stalled: int = 0

    def step(self, val_loss: float) -> bool:
        """Returns True when the new value is a strict minimum."""
        if val_loss < self.best:
            self.best = val_loss
            self.stalled = 0
            return True
        self.stalled += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.stalled >= self.patience


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    alpha: List[float]
    train: Dict[str, float]
    val: Dict[str, float]
    improved: bool

    def curve_row(self) -> List:
        return [
            self.epoch, self.lr, *self.alpha,
            self.train["wp"], self.train["st"], self.train["th"], self.train["total"],
            self.val["wp"], self.val["st"], self.val["th"], self.val["total"],
        ]


@dataclass
class TrainResult:
    model: DrivingNetwork
    best_dir: str
    best_epoch: int
    best_val: float
    best_alpha: List[float]
    final_alpha: List[float]
    history: List[EpochRecord] = field(default_factory=list)
    stopped_early: bool = False
    run_id: Optional[int] = None


def evaluate_split(model, dataset: DrivingDataset, config: ModelConfig = None, batch_size: int = EVAL_BATCH) -> SplitScores:
    """
    Mean absolute error of each task over every sample of ``dataset``.

    Args:
        model: Anything with ``predict_batch`` (network, oracle or zero stub)
        dataset: Samples to score
        config: Projection layout, defaults to the model's own
    """
    if len(dataset) == 0:
        raise InvalidArgumentError("cannot evaluate an empty split")
    config = config or model.config
    totals = {"wp": 0.0, "st": 0.0, "th": 0.0}
    for batch in dataset.batches(config, batch_size):
        errors = task_errors(model.predict_batch(batch), batch.targets)
        for k in totals:
            totals[k] += float(errors[k].sum())
    n = len(dataset)
    return SplitScores(totals["wp"] / n, totals["st"] / n, totals["th"] / n)


def _dump_batch(path: str, batch: ModelBatch, epoch: int, index: int, alpha: np.ndarray) -> None:
    arrays = {
        "route": batch.route,
        "omega": batch.omega,
        "command": batch.command,
        "epoch": np.array(epoch),
        "batch_index": np.array(index),
        "alpha": alpha,
    }
    if batch.front is not None:
        arrays["front"] = batch.front
    if batch.bev is not None:
        arrays["bev"] = batch.bev
    for k, v in (batch.targets or {}).items():
        arrays[f"target_{k}"] = v
    np.savez(path, **arrays)


def _write_json(path: str, payload) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)


def load_alpha(checkpoint: str) -> Optional[List[float]]:
    """Loss weights stored beside a checkpoint, or None when absent."""
    directory = checkpoint if os.path.isdir(checkpoint) else os.path.dirname(checkpoint)
    path = os.path.join(directory, ALPHA_FILE)
    if not os.path.exists(path):
        return None
    with open(path, "r", encoding="utf-8") as f:
        return [float(a) for a in json.load(f)["alpha"]]


class Trainer:
    """
    One training run. Holds the model, optimizer, loss weights and schedule
    state; ``fit`` drives the epochs and writes every artifact under ``out_dir``.
    """

    def __init__(
        self,
        model_config: ModelConfig = None,
        train_config: TrainConfig = None,
        out_dir: str = "./runs/train",
        store=None,
        model: Optional[DrivingNetwork] = None,
    ):
        self.model_config = model_config or ModelConfig()
        self.config = train_config or TrainConfig()
        self.out_dir = out_dir
        self.store = store
        self.model = model or DrivingNetwork(self.model_config)
        self.optimizer = AdamW(self.model.params, self.config.learning_rate, self.config.weight_decay)
        self.alpha = np.ones(len(TASKS))
        self.mgn = MgnState(power=self.config.mgn_power, smoothing=self.config.mgn_smoothing)
        self.shared = sorted(self.model.shared_parameters(self.config.mgn_shared))
        if self.config.mgn_enabled and not self.shared:
            raise InvalidArgumentError(f"no parameters match the shared prefix '{self.config.mgn_shared}'")
        self.rng = np.random.default_rng(self.config.seed)

    def train_step(self, batch: ModelBatch, epoch: int = 0, index: int = 0) -> Dict[str, float]:
        """
        Forward, one backward pass per task, AdamW on the alpha-weighted sum,
        then the loss-weight update from the shared-layer gradient norms.
        """
        output = self.model.forward(batch)
        losses = mtl_loss(output, batch.targets, self.alpha)
        values = losses.values()
        if not all(math.isfinite(v) for v in values.values()):
            os.makedirs(self.out_dir, exist_ok=True)
            path = os.path.join(self.out_dir, DIVERGED_FILE)
            _dump_batch(path, batch, epoch, index, self.alpha)
            raise TrainingDivergedError(f"non-finite loss {values} at epoch {epoch}, batch {index}; batch saved to {path}")

        task_grads = [backward(task, self.model.params) for task in losses.tasks()]
        grads = {
            name: sum(float(a) * g[name] for a, g in zip(self.alpha, task_grads))
            for name in self.model.params
        }
        self.optimizer.step(grads)

        if self.config.mgn_enabled:
            norms = shared_gradient_norms(task_grads, self.shared, self.alpha)
            self.mgn, self.alpha = mgn_update(self.mgn, norms, self.alpha)
        return values

    def train_epoch(self, dataset: DrivingDataset, epoch: int) -> Tuple[Dict[str, float], List[int]]:
        """Returns sample-weighted mean losses and the shuffle order used."""
        order = self.rng.permutation(len(dataset))
        size = self.config.batch_size
        totals = {"wp": 0.0, "st": 0.0, "th": 0.0, "total": 0.0}
        starts = range(0, len(order), size)
        for index, start in enumerate(tqdm(starts, desc=f"epoch {epoch}", disable=not self.config.show_progress, leave=False)):
            batch = dataset.batch(order[start:start + size], self.model_config)
            values = self.train_step(batch, epoch, index)
            for k in totals:
                totals[k] += values[k] * len(batch)
        return {k: v / len(dataset) for k, v in totals.items()}, [int(i) for i in order]

    def validate(self, dataset: DrivingDataset) -> Dict[str, float]:
        """Unit-weight multi-task loss on the validation split."""
        scores = evaluate_split(self.model, dataset, self.model_config)
        return {"wp": scores.mae_wp, "st": scores.mae_st, "th": scores.mae_th, "total": scores.tm}

    def save_best(self) -> str:
        best_dir = os.path.join(self.out_dir, BEST_DIR)
        self.model.save(best_dir)
        _write_json(os.path.join(best_dir, ALPHA_FILE), {"alpha": [float(a) for a in self.alpha]})
        return best_dir

    def fit(self, train_set: DrivingDataset, val_set: DrivingDataset, val_sources: Sequence[str] = ()) -> TrainResult:
        """
        Train until ``max_epochs`` or early stop.

        Returns:
            TrainResult with the in-memory model (last epoch) and the best checkpoint path
        """
        if len(train_set) == 0 or len(val_set) == 0:
            raise InvalidArgumentError(f"need non-empty splits, got train={len(train_set)} val={len(val_set)}")
        cfg = self.config
        os.makedirs(self.out_dir, exist_ok=True)
        run_log = os.path.join(self.out_dir, RUN_LOG_FILE)
        curve_path = os.path.join(self.out_dir, CURVE_FILE)
        open(run_log, "w").close()
        with open(curve_path, "w", newline="", encoding="utf-8") as f:
            csv.writer(f).writerow(CURVE_COLUMNS)

        run_id = None
        if self.store is not None:
            run_id = self.store.create_run("train", os.path.basename(os.path.abspath(self.out_dir)), self.out_dir, {
                "model": self.model_config.model_dump(mode="json"),
                "train": cfg.model_dump(mode="json"),
            })

        scheduler = PlateauScheduler(cfg.learning_rate, cfg.lr_patience, cfg.lr_factor)
        stopper = EarlyStopping(cfg.early_stop_patience)
        result = TrainResult(self.model, "", 0, math.inf, [], [], run_id=run_id)
        print(f"[Trainer] {len(train_set)} train / {len(val_set)} val samples, "
              f"{self.model.parameter_count()} parameters -> {self.out_dir}")

        for epoch in range(1, cfg.max_epochs + 1):
            lr = self.optimizer.lr
            train_losses, order = self.train_epoch(train_set, epoch)
            val_losses = self.validate(val_set)
            improved = stopper.step(val_losses["total"])
            if improved:
                result.best_dir = self.save_best()
                result.best_epoch, result.best_val = epoch, val_losses["total"]
                result.best_alpha = [float(a) for a in self.alpha]
            self.optimizer.lr = scheduler.step(val_losses["total"])

            record = EpochRecord(epoch, lr, [float(a) for a in self.alpha], train_losses, val_losses, improved)
            result.history.append(record)
            with open(run_log, "a", encoding="utf-8") as f:
                f.write(json.dumps({
                    "epoch": epoch,
                    "lr": lr,
                    "alpha": record.alpha,
                    "train": train_losses,
                    "val": val_losses,
                    "improved": improved,
                    "permutation": order,
                    **({"val_logs": list(val_sources)} if epoch == 1 else {}),
                }) + "\n")
            with open(curve_path, "a", newline="", encoding="utf-8") as f:
                csv.writer(f).writerow(record.curve_row())
            if self.store is not None:
                self.store.add_epoch(run_id, epoch, lr, record.alpha, train_losses["total"], val_losses["total"],
                                     {"train": train_losses, "val": val_losses})

            mark = " *" if improved else ""
            print(f"[Trainer] epoch {epoch} lr={lr:.1e} train={train_losses['total']:.4f} "
                  f"val={val_losses['total']:.4f} alpha=({', '.join(f'{a:.3f}' for a in self.alpha)}){mark}")
            if stopper.should_stop:
                result.stopped_early = True
                print(f"[Trainer] no validation improvement for {stopper.stalled} epochs, stopping")
                break

        result.final_alpha = [float(a) for a in self.alpha]
        print(f"[Trainer] best epoch {result.best_epoch} val={result.best_val:.4f} saved in {result.best_dir}")
        return result


def train(
    dataset: DrivingDataset,
    model_config: ModelConfig = None,
    train_config: TrainConfig = None,
    out_dir: str = "./runs/train",
    store=None,
    validation: Optional[DrivingDataset] = None,
) -> TrainResult:
    """
    Split ``dataset`` by logs (unless ``validation`` is given) and train.

    Args:
        dataset: Training samples, or train+val when ``validation`` is None
        store: Optional RunStore that records the run and each epoch
    """
    train_config = train_config or TrainConfig()
    if validation is None:
        train_set, val_set, val_sources = split_dataset(dataset, train_config.val_fraction, train_config.seed)
    else:
        train_set, val_set, val_sources = dataset, validation, validation.sources()
    trainer = Trainer(model_config, train_config, out_dir, store)
    return trainer.fit(train_set, val_set, val_sources)
