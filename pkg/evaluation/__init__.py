# Offline and online evaluation protocols plus CSV reports
from .offline import OfflineRow, dataset_conditions, load_eval_logs, offline_eval, score_condition
from .online import EpisodeScore, OnlineRow, drive_route, episode_dicts, online_eval
from .reports import (
    OFFLINE_COLUMNS,
    ONLINE_COLUMNS,
    read_report,
    record_reports,
    write_episode_table,
    write_offline_report,
    write_online_report,
)

__all__ = [
    "OfflineRow",
    "dataset_conditions",
    "load_eval_logs",
    "offline_eval",
    "score_condition",
    "EpisodeScore",
    "OnlineRow",
    "drive_route",
    "episode_dicts",
    "online_eval",
    "OFFLINE_COLUMNS",
    "ONLINE_COLUMNS",
    "read_report",
    "record_reports",
    "write_episode_table",
    "write_offline_report",
    "write_online_report",
]
