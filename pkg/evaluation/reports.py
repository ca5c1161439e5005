"""
Reports Module
CSV tables for offline and online results, plus run-store bookkeeping.
"""
import csv
import os
from dataclasses import asdict
from typing import List, Sequence

OFFLINE_COLUMNS = ["condition", "model", "mae_wp", "mae_st", "mae_th", "tm", "tm_std"]
ONLINE_COLUMNS = ["condition", "model", "interventions", "interventions_std", "time_s", "time_s_std"]
EPISODE_COLUMNS = ["scene", "route", "condition", "repeat", "completed", "interventions", "intervention_time", "elapsed"]
STD_NOTE = "# std is taken over repeated drives of the same routes"


def _write(path: str, columns: Sequence[str], rows: Sequence, note: str = None) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        if note:
            f.write(note + "\n")
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            values = asdict(row)
            writer.writerow([values[c] for c in columns])
    return path


def write_offline_report(path: str, rows: Sequence) -> str:
    """One line per condition × model: MAEs, TM and its std over repeats."""
    return _write(path, OFFLINE_COLUMNS, rows, STD_NOTE)


def write_online_report(path: str, rows: Sequence) -> str:
    return _write(path, ONLINE_COLUMNS, rows, STD_NOTE)


def write_episode_table(path: str, scores: Sequence) -> str:
    """Per-episode outcomes, including runs that timed out."""
    return _write(path, EPISODE_COLUMNS, scores)


def read_report(path: str) -> List[dict]:
    """Rows of a report written above, comment line skipped, numbers left as strings."""
    with open(path, "r", encoding="utf-8") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))


def record_reports(store, run_id: int, rows: Sequence) -> None:
    for row in rows:
        store.add_report(run_id, row.condition, row.model, row.metrics())
    print(f"[RunStore] run {run_id}: {len(rows)} report rows")
