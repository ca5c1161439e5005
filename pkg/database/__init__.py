# SQLite run registry
from .run_store import RunStore, get_run_store

__all__ = ["RunStore", "get_run_store"]
