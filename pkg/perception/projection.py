"""
Projection Module
Rasterizes class-labeled LiDAR points into front-view and bird's-eye-view grids
of one-hot class layers plus a logarithmic depth layer.
"""
import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from config import GridConfig, NUM_CLASSES
from core.errors import InvalidArgumentError, ShapeError

VACANT = -1
DEPTH_CHANNEL = NUM_CLASSES
MIN_LOG_DEPTH = 1e-6


@dataclass(frozen=True)
class LabeledPoint:
    x: float
    y: float
    z: float
    class_id: int

    @property
    def range(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


class LabeledPointCloud:
    """
    N sensor-frame points (+y forward, +x lateral, +z up) with class ids.
    """

    def __init__(self, xyz: np.ndarray, classes: np.ndarray, timestamp: float = 0.0):
        xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
        classes = np.asarray(classes).reshape(-1)
        if len(xyz) != len(classes):
            raise ShapeError(f"{len(xyz)} points but {len(classes)} class ids")
        if not np.all(np.isfinite(xyz)):
            raise InvalidArgumentError("point cloud contains non-finite coordinates")
        if classes.size and (classes.min() < 0 or classes.max() >= NUM_CLASSES):
            raise InvalidArgumentError(f"class ids must lie in [0, {NUM_CLASSES})")
        self.xyz = xyz
        self.classes = classes.astype(np.uint8)
        self.timestamp = float(timestamp)

    @classmethod
    def empty(cls, timestamp: float = 0.0) -> "LabeledPointCloud":
        return cls(np.zeros((0, 3)), np.zeros(0, dtype=np.uint8), timestamp)

    @classmethod
    def from_points(cls, points, timestamp: float = 0.0) -> "LabeledPointCloud":
        points = list(points)
        xyz = np.array([[p.x, p.y, p.z] for p in points], dtype=np.float64).reshape(-1, 3)
        return cls(xyz, np.array([p.class_id for p in points], dtype=np.uint8), timestamp)

    @property
    def ranges(self) -> np.ndarray:
        x, y, z = self.xyz[:, 0], self.xyz[:, 1], self.xyz[:, 2]
        return np.sqrt(x * x + y * y + z * z)

    def __len__(self) -> int:
        return len(self.classes)

    def __iter__(self) -> Iterator[LabeledPoint]:
        for (x, y, z), c in zip(self.xyz, self.classes):
            yield LabeledPoint(float(x), float(y), float(z), int(c))


@dataclass
class ProjectedGrid:
    """
    Compact grid: the winning class per cell (``VACANT`` when empty) and its
    log-depth. ``to_channels`` expands to the dense 21×H×W layout.
    """

    mode: str
    class_map: np.ndarray
    depth_map: np.ndarray

    @property
    def shape(self):
        return (NUM_CLASSES + 1,) + self.class_map.shape

    @classmethod
    def zeros(cls, cfg: GridConfig) -> "ProjectedGrid":
        return cls(
            cfg.mode,
            np.full((cfg.height, cfg.width), VACANT, dtype=np.int16),
            np.zeros((cfg.height, cfg.width), dtype=np.float32),
        )

    def to_channels(self, dtype=np.float32) -> np.ndarray:
        h, w = self.class_map.shape
        channels = np.zeros((NUM_CLASSES + 1, h, w), dtype=dtype)
        rows, cols = np.nonzero(self.class_map != VACANT)
        channels[self.class_map[rows, cols], rows, cols] = 1.0
        channels[DEPTH_CHANNEL] = self.depth_map
        return channels

    @classmethod
    def from_channels(cls, mode: str, channels: np.ndarray) -> "ProjectedGrid":
        if channels.ndim != 3 or channels.shape[0] != NUM_CLASSES + 1:
            raise ShapeError(f"expected {NUM_CLASSES + 1}×H×W channels, got {channels.shape}")
        classes = channels[:NUM_CLASSES]
        occupied = classes.max(axis=0) > 0
        class_map = np.where(occupied, classes.argmax(axis=0), VACANT).astype(np.int16)
        return cls(mode, class_map, channels[DEPTH_CHANNEL].astype(np.float32))

    def occupied_cells(self) -> int:
        return int(np.count_nonzero(self.class_map != VACANT))


def log_depth(ranges, max_depth: float) -> np.ndarray:
    """ln(1 + r) / ln(1 + max_depth), clipped to [MIN_LOG_DEPTH, 1] for occupied cells."""
    values = np.log1p(np.asarray(ranges, dtype=np.float64)) / math.log1p(max_depth)
    return np.clip(values, MIN_LOG_DEPTH, 1.0)


def _rasterize(cfg: GridConfig, rows: np.ndarray, cols: np.ndarray, ranges: np.ndarray, classes: np.ndarray) -> ProjectedGrid:
    grid = ProjectedGrid.zeros(cfg)
    if rows.size == 0:
        return grid
    cells = rows * cfg.width + cols
    # nearest range wins; equal ranges fall back to point order
    order = np.lexsort((np.arange(cells.size), ranges, cells))
    sorted_cells = cells[order]
    first = np.ones(order.size, dtype=bool)
    first[1:] = sorted_cells[1:] != sorted_cells[:-1]
    winners = order[first]
    grid.class_map.flat[cells[winners]] = classes[winners]
    grid.depth_map.flat[cells[winners]] = log_depth(ranges[winners], cfg.max_depth)
    return grid


def front_cells(xyz: np.ndarray, cfg: GridConfig):
    """Row/column of each point with y > 0, plus the mask of kept points."""
    x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    keep = y > 0
    x, y, z = x[keep], y[keep], z[keep]
    az_min, az_max = cfg.azimuth_range
    el_min, el_max = cfg.elevation_range
    azimuth = np.degrees(np.arctan2(x, y))
    elevation = np.degrees(np.arctan2(z, np.sqrt(x * x + y * y)))
    cols = np.floor((azimuth - az_min) / (az_max - az_min) * cfg.width).astype(np.int64)
    rows = np.floor((el_max - elevation) / (el_max - el_min) * cfg.height).astype(np.int64)
    return np.clip(rows, 0, cfg.height - 1), np.clip(cols, 0, cfg.width - 1), keep


def bev_cells(xyz: np.ndarray, cfg: GridConfig):
    """Row/column of each point inside the BEV extents, plus the mask of kept points."""
    x, y = xyz[:, 0], xyz[:, 1]
    fwd_min, fwd_max = cfg.forward_range
    lat_min, lat_max = cfg.lateral_range
    keep = (y >= fwd_min) & (y < fwd_max) & (x >= lat_min) & (x < lat_max)
    cell_y = (fwd_max - fwd_min) / cfg.height
    cell_x = (lat_max - lat_min) / cfg.width
    rows = np.floor((fwd_max - y[keep]) / cell_y).astype(np.int64)
    cols = np.floor((x[keep] - lat_min) / cell_x).astype(np.int64)
    return np.clip(rows, 0, cfg.height - 1), np.clip(cols, 0, cfg.width - 1), keep


def project_front(cloud: LabeledPointCloud, cfg: GridConfig) -> ProjectedGrid:
    """Front-view grid over the azimuth/elevation window ahead of the sensor."""
    if cfg.mode != "front":
        raise InvalidArgumentError(f"project_front needs a front grid config, got '{cfg.mode}'")
    rows, cols, keep = front_cells(cloud.xyz, cfg)
    return _rasterize(cfg, rows, cols, cloud.ranges[keep], cloud.classes[keep])


def project_bev(cloud: LabeledPointCloud, cfg: GridConfig) -> ProjectedGrid:
    """Top-down grid; row 0 is the far edge, out-of-extent points are dropped."""
    if cfg.mode != "bev":
        raise InvalidArgumentError(f"project_bev needs a bev grid config, got '{cfg.mode}'")
    rows, cols, keep = bev_cells(cloud.xyz, cfg)
    return _rasterize(cfg, rows, cols, cloud.ranges[keep], cloud.classes[keep])


def project(cloud: LabeledPointCloud, cfg: GridConfig) -> ProjectedGrid:
    return project_front(cloud, cfg) if cfg.mode == "front" else project_bev(cloud, cfg)


def reference_rasterize(cloud: LabeledPointCloud, cfg: GridConfig) -> ProjectedGrid:
    """
    Sequential point-by-point rasterizer. Slow; used to cross-check the
    vectorized projections.
    """
    h, w = cfg.height, cfg.width
    best_range = np.full((h, w), np.inf)
    best_class = np.full((h, w), VACANT, dtype=np.int64)
    for point in cloud:
        cell: Optional[tuple] = None
        if cfg.mode == "front":
            if point.y > 0:
                az = math.degrees(math.atan2(point.x, point.y))
                el = math.degrees(math.atan2(point.z, math.sqrt(point.x * point.x + point.y * point.y)))
                col = math.floor((az - cfg.azimuth_range[0]) / (cfg.azimuth_range[1] - cfg.azimuth_range[0]) * w)
                row = math.floor((cfg.elevation_range[1] - el) / (cfg.elevation_range[1] - cfg.elevation_range[0]) * h)
                cell = (min(max(row, 0), h - 1), min(max(col, 0), w - 1))
        else:
            fwd_min, fwd_max = cfg.forward_range
            lat_min, lat_max = cfg.lateral_range
            if fwd_min <= point.y < fwd_max and lat_min <= point.x < lat_max:
                row = math.floor((fwd_max - point.y) / ((fwd_max - fwd_min) / h))
                col = math.floor((point.x - lat_min) / ((lat_max - lat_min) / w))
                cell = (min(max(row, 0), h - 1), min(max(col, 0), w - 1))
        if cell is None:
            continue
        r = point.range
        if r < best_range[cell]:
            best_range[cell] = r
            best_class[cell] = point.class_id

    grid = ProjectedGrid.zeros(cfg)
    occupied = best_class != VACANT
    grid.class_map[occupied] = best_class[occupied]
    grid.depth_map[occupied] = log_depth(best_range[occupied], cfg.max_depth)
    return grid
