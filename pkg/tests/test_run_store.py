import pytest

from database.run_store import RunStore


def test_create_and_get_run(store):
    run_id = store.create_run("train", "front", "/tmp/runs/front", {"lr": 1e-4, "seed": 0})
    run = store.get_run(run_id)
    assert run["kind"] == "train"
    assert run["name"] == "front"
    assert run["out_dir"] == "/tmp/runs/front"
    assert run["config"] == {"lr": 1e-4, "seed": 0}
    assert run["created_at"]
    assert store.get_run(run_id + 100) is None


def test_list_runs_newest_first(store):
    ids = [store.create_run(kind) for kind in ("train", "drive", "train")]
    assert [r["id"] for r in store.list_runs()] == ids[::-1]
    assert [r["id"] for r in store.list_runs("train")] == [ids[2], ids[0]]
    assert len(store.list_runs(limit=1)) == 1


def test_epochs_replace_on_rerun(store):
    run_id = store.create_run("train")
    store.add_epoch(run_id, 1, 1e-4, [1.0, 1.0, 1.0], 0.9, 0.8, {"wp": 0.5})
    store.add_epoch(run_id, 2, 1e-4, [0.9, 1.1, 1.0], 0.7, 0.6)
    store.add_epoch(run_id, 2, 5e-5, [0.8, 1.2, 1.0], 0.65, 0.55)
    epochs = store.get_epochs(run_id)
    assert [e["epoch"] for e in epochs] == [1, 2]
    assert epochs[0]["losses"] == {"wp": 0.5}
    assert epochs[1]["lr"] == pytest.approx(5e-5)
    assert epochs[1]["alpha"] == [0.8, 1.2, 1.0]


def test_reports_and_overall_stats(store):
    train_id = store.create_run("train")
    eval_id = store.create_run("eval-offline")
    store.add_epoch(train_id, 1, 1e-4, [1, 1, 1], 1.0, 1.0)
    store.add_report(eval_id, "sparse", "front", {"tm": 0.4})
    store.add_report(eval_id, "dense", "front", {"tm": 0.6})
    reports = store.get_reports(eval_id)
    assert [r["condition"] for r in reports] == ["sparse", "dense"]
    assert reports[1]["metrics"]["tm"] == 0.6
    stats = store.get_overall_stats()
    assert stats == {
        "total_runs": 2,
        "runs_by_kind": {"train": 1, "eval-offline": 1},
        "total_epochs": 1,
        "total_reports": 2,
    }


def test_store_persists_across_instances(tmp_path):
    path = str(tmp_path / "nested" / "runs.db")
    run_id = RunStore(path).create_run("drive", "expert")
    assert RunStore(path).get_run(run_id)["name"] == "expert"
