"""
Run Store Module
SQLite registry of training runs, their per-epoch records and evaluation reports.
"""
import json
import os
import sqlite3
from typing import Any, Dict, List, Optional, Sequence

from config import SQLITE_DB_PATH


class RunStore:
    """
    Registry of runs for later comparison. Files on disk stay the primary
    artifacts; this only indexes them.
    """

    def __init__(self, db_path: str = SQLITE_DB_PATH):
        """
        Initialize the run store.

        Args:
            db_path: Path to SQLite database
        """
        self.db_path = db_path
        directory = os.path.dirname(os.path.abspath(db_path))
        os.makedirs(directory, exist_ok=True)
        self._init_db()

    def _get_conn(self) -> sqlite3.Connection:
        """Get database connection."""
        return sqlite3.connect(self.db_path)

    def _init_db(self) -> None:
        """Initialize all required tables."""
        conn = self._get_conn()
        c = conn.cursor()

        c.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                kind TEXT NOT NULL,
                name TEXT,
                created_at DATETIME DEFAULT CURRENT_TIMESTAMP,
                out_dir TEXT,
                config_json TEXT
            )
        """)

        c.execute("""
            CREATE TABLE IF NOT EXISTS epochs (
                run_id INTEGER NOT NULL,
                epoch INTEGER NOT NULL,
                lr REAL,
                alpha_json TEXT,
                train_loss REAL,
                val_loss REAL,
                losses_json TEXT,
                PRIMARY KEY (run_id, epoch),
                FOREIGN KEY (run_id) REFERENCES runs(id)
            )
        """)

        c.execute("""
            CREATE TABLE IF NOT EXISTS reports (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id INTEGER NOT NULL,
                condition TEXT,
                model TEXT,
                metrics_json TEXT,
                FOREIGN KEY (run_id) REFERENCES runs(id)
            )
        """)

        c.execute("CREATE INDEX IF NOT EXISTS idx_runs_kind ON runs(kind)")
        c.execute("CREATE INDEX IF NOT EXISTS idx_reports_run ON reports(run_id)")

        conn.commit()
        conn.close()

    # Runs

    def create_run(self, kind: str, name: str = None, out_dir: str = None, config: Dict[str, Any] = None) -> int:
        """
        Register a run.

        Args:
            kind: "train", "eval-offline" or "drive"
            name: Human-readable label
            out_dir: Where the run's files live
            config: JSON-serializable configuration snapshot

        Returns:
            The new run id
        """
        conn = self._get_conn()
        c = conn.cursor()
        c.execute("""
            INSERT INTO runs (kind, name, out_dir, config_json)
            VALUES (?, ?, ?, ?)
        """, (kind, name, out_dir, json.dumps(config or {}, sort_keys=True)))
        run_id = c.lastrowid
        conn.commit()
        conn.close()
        return run_id

    def get_run(self, run_id: int) -> Optional[Dict]:
        conn = self._get_conn()
        c = conn.cursor()
        c.execute("""
            SELECT id, kind, name, created_at, out_dir, config_json
            FROM runs WHERE id = ?
        """, (run_id,))
        row = c.fetchone()
        conn.close()

        if row:
            return {
                "id": row[0],
                "kind": row[1],
                "name": row[2],
                "created_at": row[3],
                "out_dir": row[4],
                "config": json.loads(row[5] or "{}"),
            }
        return None

    def list_runs(self, kind: str = None, limit: int = 100) -> List[Dict]:
        """Most recent runs first, optionally of one kind."""
        conn = self._get_conn()
        c = conn.cursor()
        if kind:
            c.execute("""
                SELECT id, kind, name, created_at, out_dir
                FROM runs WHERE kind = ?
                ORDER BY id DESC LIMIT ?
            """, (kind, limit))
        else:
            c.execute("""
                SELECT id, kind, name, created_at, out_dir
                FROM runs ORDER BY id DESC LIMIT ?
            """, (limit,))
        rows = c.fetchall()
        conn.close()

        return [
            {"id": row[0], "kind": row[1], "name": row[2], "created_at": row[3], "out_dir": row[4]}
            for row in rows
        ]

    # Epochs

    def add_epoch(
        self,
        run_id: int,
        epoch: int,
        lr: float,
        alpha: Sequence[float],
        train_loss: float,
        val_loss: float,
        losses: Dict[str, float] = None,
    ) -> None:
        conn = self._get_conn()
        c = conn.cursor()
        c.execute("""
            INSERT OR REPLACE INTO epochs (run_id, epoch, lr, alpha_json, train_loss, val_loss, losses_json)
            VALUES (?, ?, ?, ?, ?, ?, ?)
        """, (run_id, epoch, lr, json.dumps([float(a) for a in alpha]), train_loss, val_loss,
              json.dumps(losses or {}, sort_keys=True)))
        conn.commit()
        conn.close()

    def get_epochs(self, run_id: int) -> List[Dict]:
        conn = self._get_conn()
        c = conn.cursor()
        c.execute("""
            SELECT epoch, lr, alpha_json, train_loss, val_loss, losses_json
            FROM epochs WHERE run_id = ?
            ORDER BY epoch
        """, (run_id,))
        rows = c.fetchall()
        conn.close()

        return [
            {
                "epoch": row[0],
                "lr": row[1],
                "alpha": json.loads(row[2]),
                "train_loss": row[3],
                "val_loss": row[4],
                "losses": json.loads(row[5] or "{}"),
            }
            for row in rows
        ]

    # Reports

    def add_report(self, run_id: int, condition: str, model: str, metrics: Dict[str, Any]) -> None:
        conn = self._get_conn()
        c = conn.cursor()
        c.execute("""
            INSERT INTO reports (run_id, condition, model, metrics_json)
            VALUES (?, ?, ?, ?)
        """, (run_id, condition, model, json.dumps(metrics, sort_keys=True)))
        conn.commit()
        conn.close()

    def get_reports(self, run_id: int) -> List[Dict]:
        conn = self._get_conn()
        c = conn.cursor()
        c.execute("""
            SELECT condition, model, metrics_json
            FROM reports WHERE run_id = ?
            ORDER BY id
        """, (run_id,))
        rows = c.fetchall()
        conn.close()

        return [{"condition": row[0], "model": row[1], "metrics": json.loads(row[2])} for row in rows]

    def get_overall_stats(self) -> Dict[str, Any]:
        """Run counts per kind plus totals."""
        conn = self._get_conn()
        c = conn.cursor()

        c.execute("SELECT kind, COUNT(*) FROM runs GROUP BY kind")
        runs_by_kind = {row[0]: row[1] for row in c.fetchall()}
        c.execute("SELECT COUNT(*) FROM epochs")
        total_epochs = c.fetchone()[0]
        c.execute("SELECT COUNT(*) FROM reports")
        total_reports = c.fetchone()[0]

        conn.close()

        return {
            "total_runs": sum(runs_by_kind.values()),
            "runs_by_kind": runs_by_kind,
            "total_epochs": total_epochs,
            "total_reports": total_reports,
        }


# Singleton instance
_run_store = None

def get_run_store() -> RunStore:
    """Get run store singleton."""
    global _run_store
    if _run_store is None:
        _run_store = RunStore()
    return _run_store
