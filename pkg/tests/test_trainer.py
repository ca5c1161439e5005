import csv
import json
import os

import numpy as np
import pytest

from config import TrainConfig
from core.errors import InvalidArgumentError, TrainingDivergedError
from model.network import DrivingNetwork
from training.dataset import list_logs, load_dataset, samples_from_log, split_dataset
from training.trainer import (
    CURVE_COLUMNS,
    DIVERGED_FILE,
    EarlyStopping,
    PlateauScheduler,
    Trainer,
    evaluate_split,
    load_alpha,
    train,
)


def quick_config(**overrides) -> TrainConfig:
    values = dict(batch_size=16, max_epochs=2, learning_rate=1e-3, seed=3, show_progress=False)
    values.update(overrides)
    return TrainConfig(**values)


def test_plateau_scheduler_halves_after_five_stalls():
    scheduler = PlateauScheduler(1e-4, patience=5, factor=0.5)
    assert scheduler.step(1.0) == 1e-4
    for _ in range(4):
        assert scheduler.step(1.0) == 1e-4
    assert scheduler.step(1.0) == pytest.approx(5e-5)
    assert scheduler.step(0.5) == pytest.approx(5e-5)


def test_early_stopping_on_constant_loss():
    stopper = EarlyStopping(patience=3)
    epochs = 0
    while not stopper.should_stop:
        epochs += 1
        improved = stopper.step(2.0)
        assert improved == (epochs == 1)
    assert epochs == 3 + 1


def test_list_logs_parses_names(log_dir):
    entries = list_logs(log_dir)
    assert len(entries) == 6
    assert {e["condition"] for e in entries} == {"sparse", "dense"}
    assert sorted({e["repeat"] for e in entries}) == [0, 1, 2]


def test_samples_recover_route_points(make_log):
    samples = samples_from_log(make_log(n=8), "strip_north", stride=2)
    assert len(samples) == 4
    first = samples[0]
    assert first.route[:2] == pytest.approx([0.0, 12.0], abs=1e-3)
    assert first.command == 0
    np.testing.assert_allclose(first.waypoints, [0, 1, 0, 2, 0, 3])
    assert first.omega == pytest.approx([1.0 / 0.15] * 2)


def test_logged_command_override(make_log):
    samples = samples_from_log(make_log(n=4, route_x=-6.0), use_logged_commands=False)
    assert samples[0].command == 2
    samples = samples_from_log(make_log(n=4, route_x=-6.0), use_logged_commands=True)
    assert samples[0].command == 0


def test_split_by_logs_is_seeded(log_dir):
    dataset = load_dataset(log_dir)
    train_a, val_a, held_a = split_dataset(dataset, 0.33, seed=1)
    train_b, val_b, held_b = split_dataset(dataset, 0.33, seed=1)
    assert held_a == held_b
    assert len(held_a) == 2
    assert len(train_a) + len(val_a) == len(dataset) == 48
    assert not set(train_a.sources()) & set(val_a.sources())


def test_single_log_splits_by_samples(make_log):
    from training.dataset import DrivingDataset
    dataset = DrivingDataset(samples_from_log(make_log(n=9), "only"))
    train_set, val_set, _ = split_dataset(dataset, 0.33, seed=0)
    assert (len(train_set), len(val_set)) == (6, 3)
    with pytest.raises(InvalidArgumentError):
        split_dataset(dataset.subset([0]), 0.33, seed=0)


def test_training_run_writes_artifacts(tmp_path, log_dir, tiny_model_config, store):
    out_dir = str(tmp_path / "run")
    result = train(load_dataset(log_dir), tiny_model_config, quick_config(), out_dir, store=store)

    with open(os.path.join(out_dir, "run_log.jsonl"), encoding="utf-8") as f:
        lines = [json.loads(line) for line in f]
    assert [line["epoch"] for line in lines] == [1, 2]
    assert len(lines[0]["val_logs"]) == 2
    assert sorted(lines[0]["permutation"]) == list(range(32))

    with open(os.path.join(out_dir, "curve.csv"), encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == CURVE_COLUMNS
    assert len(rows) == 3

    best = os.path.join(out_dir, "best")
    for name in ("model.dpw", "model_config.json", "alpha.json"):
        assert os.path.exists(os.path.join(best, name))
    alpha = load_alpha(best)
    assert sum(alpha) == pytest.approx(3.0)
    assert result.best_alpha == pytest.approx(alpha)
    assert result.best_epoch in (1, 2)

    restored = DrivingNetwork.load(best)
    assert restored.config == tiny_model_config
    assert len(store.get_epochs(result.run_id)) == 2
    assert store.get_run(result.run_id)["kind"] == "train"


def test_training_is_deterministic(tmp_path, log_dir, tiny_model_config):
    dataset = load_dataset(log_dir)
    a = train(dataset, tiny_model_config, quick_config(), str(tmp_path / "a"))
    b = train(dataset, tiny_model_config, quick_config(), str(tmp_path / "b"))
    for name, p in a.model.params.items():
        np.testing.assert_array_equal(p.data, b.model.params[name].data)
    assert a.final_alpha == b.final_alpha
    assert [r.val for r in a.history] == [r.val for r in b.history]


def test_repeated_steps_reduce_the_loss(log_dir, tiny_model_config, tmp_path):
    dataset = load_dataset(log_dir)
    trainer = Trainer(tiny_model_config, quick_config(learning_rate=1e-2, weight_decay=0.0, mgn_enabled=False), str(tmp_path))
    batch = dataset.batch(list(range(8)), tiny_model_config)
    first = trainer.train_step(batch)["total"]
    for _ in range(30):
        last = trainer.train_step(batch)["total"]
    assert last < first


def test_mgn_keeps_weights_normalized_during_training(log_dir, tiny_model_config, tmp_path):
    dataset = load_dataset(log_dir)
    trainer = Trainer(tiny_model_config, quick_config(), str(tmp_path))
    batch = dataset.batch(list(range(16)), tiny_model_config)
    for _ in range(3):
        trainer.train_step(batch)
    assert trainer.alpha.sum() == pytest.approx(3.0)
    assert trainer.mgn.steps == 3


def test_non_finite_loss_dumps_batch(log_dir, tiny_model_config, tmp_path):
    dataset = load_dataset(log_dir)
    model = DrivingNetwork(tiny_model_config)
    model.params["head.dx.bias"].data[:] = np.nan
    trainer = Trainer(tiny_model_config, quick_config(), str(tmp_path / "run"), model=model)
    with pytest.raises(TrainingDivergedError):
        trainer.train_step(dataset.batch([0, 1], tiny_model_config), epoch=4, index=7)
    dump = np.load(str(tmp_path / "run" / DIVERGED_FILE))
    assert int(dump["epoch"]) == 4
    assert int(dump["batch_index"]) == 7
    assert dump["front"].shape[0] == 2


def test_evaluate_split_rejects_empty(log_dir, tiny_model_config):
    dataset = load_dataset(log_dir)
    with pytest.raises(InvalidArgumentError):
        evaluate_split(DrivingNetwork(tiny_model_config), dataset.subset([]))


def test_unknown_shared_prefix_rejected(tiny_model_config):
    with pytest.raises(InvalidArgumentError):
        Trainer(tiny_model_config, quick_config(mgn_shared="nothing"))
