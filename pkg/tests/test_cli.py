import json
import os

import pytest

from cli import main, model_label
from evaluation.reports import read_report
from simulation.episode_log import write_log


def test_bad_arguments_exit_with_two(capsys):
    assert main([]) == 2
    assert main(["fly"]) == 2
    assert main(["project"]) == 2


def test_model_label():
    assert model_label("runs/front/best") == "front"
    assert model_label("runs/bev") == "bev"


def test_project_dumps_grids_and_images(tmp_path, make_log):
    log_path = str(tmp_path / "ep.dpl")
    write_log(log_path, make_log(n=3))
    out = tmp_path / "proj"
    assert main(["--out-dir", str(tmp_path), "project", log_path, "--index", "2", "--dir", str(out)]) == 0
    names = sorted(os.listdir(out))
    assert names == ["ep_0002_bev.grid", "ep_0002_bev.png", "ep_0002_front.grid", "ep_0002_front.png"]


def test_project_index_out_of_range(tmp_path, make_log, capsys):
    log_path = str(tmp_path / "ep.dpl")
    write_log(log_path, make_log(n=2))
    assert main(["project", log_path, "--index", "5"]) == 1
    assert "[CLI Error]" in capsys.readouterr().err


def test_unreadable_config_is_a_library_error(tmp_path):
    bad = tmp_path / "app.json"
    bad.write_text("{not json", encoding="utf-8")
    assert main(["--config", str(bad), "--no-registry", "eval-offline", "--oracle"]) == 1


def test_eval_offline_needs_a_model(tmp_path, log_dir):
    assert main(["--out-dir", str(tmp_path), "--no-registry", "eval-offline", "--logs", log_dir]) == 1


def test_eval_offline_oracle_report(tmp_path, log_dir):
    report = str(tmp_path / "offline.csv")
    code = main(["--out-dir", str(tmp_path), "--no-registry", "eval-offline",
                 "--logs", log_dir, "--oracle", "--zero", "--report", report])
    assert code == 0
    rows = read_report(report)
    assert [(r["condition"], r["model"]) for r in rows] == [
        ("sparse", "oracle"), ("dense", "oracle"), ("sparse", "zero"), ("dense", "zero"),
    ]
    assert float(rows[0]["tm"]) == pytest.approx(0.0, abs=1e-9)
    assert float(rows[3]["tm"]) == pytest.approx(2.0, rel=1e-6)


def test_train_then_score_checkpoint(tmp_path, log_dir, tiny_model_config):
    config_path = tmp_path / "app.json"
    config_path.write_text(json.dumps({
        "model": tiny_model_config.model_dump(mode="json"),
        "train": {"batch_size": 16, "max_epochs": 3, "show_progress": False},
    }), encoding="utf-8")
    common = ["--config", str(config_path), "--seed", "5", "--out-dir", str(tmp_path), "--no-registry"]

    assert main(common + ["train", "--logs", log_dir, "--epochs", "1"]) == 0
    best = tmp_path / "train" / "best"
    assert (best / "model.dpw").exists()
    with open(tmp_path / "train" / "run_log.jsonl", encoding="utf-8") as f:
        assert len(f.readlines()) == 1

    report = str(tmp_path / "scores.csv")
    assert main(common + ["eval-offline", "--logs", log_dir, "--checkpoint", str(best), "--report", report]) == 0
    rows = read_report(report)
    assert {r["model"] for r in rows} == {"train"}
    assert all(float(r["tm"]) >= 0.0 for r in rows)


def test_runs_are_registered(tmp_path, log_dir, monkeypatch):
    from database import run_store
    from database.run_store import RunStore

    registry = RunStore(str(tmp_path / "registry.db"))
    monkeypatch.setattr(run_store, "_run_store", registry)
    assert main(["--out-dir", str(tmp_path), "eval-offline", "--logs", log_dir, "--oracle"]) == 0
    runs = registry.list_runs("eval-offline")
    assert len(runs) == 1
    assert runs[0]["name"] == "oracle"
    assert len(registry.get_reports(runs[0]["id"])) == 2


@pytest.mark.slow
def test_full_pipeline(tmp_path, scene_file, tiny_model_config):
    config_path = tmp_path / "app.json"
    config_path.write_text(json.dumps({
        "model": tiny_model_config.model_dump(mode="json"),
        "train": {"batch_size": 16, "max_epochs": 2, "show_progress": False},
        "lidar": {"rings": 4, "azimuth_steps": 72},
        "sim": {"gnss_noise": 0.0, "gyro_noise": 0.0, "accel_noise": 0.0, "mag_noise": 0.0},
        "eval": {"repeats": 1},
    }), encoding="utf-8")
    common = ["--config", str(config_path), "--seed", "3", "--out-dir", str(tmp_path), "--no-registry"]
    best = str(tmp_path / "train" / "best")

    assert main(common + ["gen-data", "--scenes", scene_file, "--conditions", "sparse",
                          "--test-repeats", "1", "--workers", "1"]) == 0
    assert sorted(os.listdir(tmp_path / "logs")) == [
        "manifest.json", "strip_north_sparse_r0.dpl", "strip_north_test_sparse_r0.dpl",
    ]

    assert main(common + ["train"]) == 0
    assert (tmp_path / "train" / "best" / "model.dpw").exists()

    assert main(common + ["eval-offline", "--checkpoint", best, "--constant"]) == 0
    rows = read_report(str(tmp_path / "offline_report.csv"))
    assert [(r["condition"], r["model"]) for r in rows] == [("sparse", "train"), ("sparse", "constant")]

    assert main(common + ["drive", "--checkpoint", best, "--scenes", scene_file, "--conditions", "sparse"]) == 0
    online = read_report(str(tmp_path / "online_report.csv"))
    assert [(r["condition"], r["model"]) for r in online] == [("sparse", "train")]
    assert len(read_report(str(tmp_path / "drive" / "train" / "episodes.csv"))) == 1
    assert os.listdir(tmp_path / "drive" / "train" / "replays") == ["strip_north_test_sparse_r0.dpl"]
