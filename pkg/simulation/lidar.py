"""
LiDAR Module
Vectorized raycasting against the ground plane, obstacle walls and obstacle tops.
Every return carries the class of the entity it hit.
"""
import math
from typing import List, Tuple

import numpy as np
from matplotlib.path import Path

from config import LidarConfig
from perception.projection import LabeledPointCloud
from .world import Obstacle, World

_EPS = 1e-12


def ray_directions(config: LidarConfig) -> np.ndarray:
    """
    Unit directions in the sensor frame (+y forward, +x lateral, +z up),
    ring-major, azimuth measured from +y toward +x.
    """
    lo, hi = config.elevation_range
    elevations = np.radians(np.linspace(lo, hi, config.rings))
    azimuths = np.arange(config.azimuth_steps) * (2.0 * math.pi / config.azimuth_steps)
    el, az = np.meshgrid(elevations, azimuths, indexing="ij")
    el, az = el.ravel(), az.ravel()
    return np.stack([np.cos(el) * np.sin(az), np.cos(el) * np.cos(az), np.sin(el)], axis=1)


def sensor_to_world(directions: np.ndarray, heading: float) -> np.ndarray:
    """Rotate sensor-frame directions into world (east, north, up)."""
    c, s = math.cos(heading), math.sin(heading)
    x, y, z = directions[:, 0], directions[:, 1], directions[:, 2]
    return np.stack([c * x + s * y, -s * x + c * y, z], axis=1)


def _wall_hits(origin: np.ndarray, dirs: np.ndarray, obstacles: List[Obstacle], chunk: int = 1024) -> Tuple[np.ndarray, np.ndarray]:
    """Nearest wall distance per ray and the index of the obstacle hit."""
    n = len(dirs)
    if not obstacles:
        return np.full(n, np.inf), np.full(n, -1, dtype=np.int64)
    if n > chunk:
        parts = [_wall_hits(origin, dirs[i:i + chunk], obstacles, chunk) for i in range(0, n, chunk)]
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
    a = np.concatenate([o.edges[0] for o in obstacles])
    b = np.concatenate([o.edges[1] for o in obstacles])
    heights = np.concatenate([np.full(len(o.polygon), o.height) for o in obstacles])
    owner = np.concatenate([np.full(len(o.polygon), i) for i, o in enumerate(obstacles)])

    e = b - a                                   # (E, 2)
    w = a - origin[None, :2]                    # (E, 2)
    dx, dy = dirs[:, 0:1], dirs[:, 1:2]         # (R, 1)
    denom = dx * e[None, :, 1] - dy * e[None, :, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w[None, :, 0] * e[None, :, 1] - w[None, :, 1] * e[None, :, 0]) / denom
        s = (w[None, :, 0] * dy - w[None, :, 1] * dx) / denom
    z = origin[2] + t * dirs[:, 2:3]
    valid = (np.abs(denom) > _EPS) & (t > _EPS) & (s >= 0.0) & (s <= 1.0) & (z >= 0.0) & (z <= heights[None, :])
    t = np.where(valid, t, np.inf)
    col = np.argmin(t, axis=1)
    best_t = t[np.arange(n), col]
    best_idx = np.where(np.isfinite(best_t), owner[col], -1)
    return best_t, best_idx


def _top_hits(origin: np.ndarray, dirs: np.ndarray, obstacles: List[Obstacle]) -> Tuple[np.ndarray, np.ndarray]:
    n = len(dirs)
    best_t = np.full(n, np.inf)
    best_idx = np.full(n, -1, dtype=np.int64)
    dz = dirs[:, 2]
    for i, obstacle in enumerate(obstacles):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (obstacle.height - origin[2]) / dz
        candidates = np.nonzero((np.abs(dz) > _EPS) & (t > _EPS) & (t < best_t))[0]
        if candidates.size == 0:
            continue
        xy = origin[None, :2] + t[candidates, None] * dirs[candidates, :2]
        inside = Path(obstacle.polygon).contains_points(xy)
        hit = candidates[inside]
        best_t[hit] = t[hit]
        best_idx[hit] = i
    return best_t, best_idx


def raycast_scan(world: World, position, heading: float, config: LidarConfig, t: float = 0.0) -> LabeledPointCloud:
    """
    Scan from ``position`` (world x, y) at compass ``heading``.

    Returns:
        Sensor-frame labeled cloud of the nearest hit per ray within range
    """
    sensor_dirs = ray_directions(config)
    dirs = sensor_to_world(sensor_dirs, heading)
    origin = np.array([float(position[0]), float(position[1]), config.mount_height])
    obstacles = [o for o in world.obstacles_at(t) if o.distance(origin[None, :2])[0] <= config.max_range]

    with np.errstate(divide="ignore", invalid="ignore"):
        ground_t = np.where(dirs[:, 2] < -_EPS, origin[2] / -dirs[:, 2], np.inf)
    wall_t, wall_idx = _wall_hits(origin, dirs, obstacles)
    top_t, top_idx = _top_hits(origin, dirs, obstacles)

    candidates = np.stack([ground_t, wall_t, top_t], axis=1)
    kind = np.argmin(candidates, axis=1)
    dist = candidates[np.arange(len(dirs)), kind]
    hit = dist <= config.max_range

    classes = np.zeros(len(dirs), dtype=np.int64)
    obstacle_classes = np.array([o.class_id for o in obstacles] + [0], dtype=np.int64)
    classes[kind == 1] = obstacle_classes[wall_idx[kind == 1]]
    classes[kind == 2] = obstacle_classes[top_idx[kind == 2]]
    ground_rays = hit & (kind == 0)
    if np.any(ground_rays):
        ground_xy = origin[None, :2] + dist[ground_rays, None] * dirs[ground_rays, :2]
        classes[ground_rays] = world.ground_class(ground_xy)

    xyz = sensor_dirs[hit] * dist[hit, None]
    return LabeledPointCloud(xyz, classes[hit].astype(np.uint8), t)


def raycast_reference(world: World, position, heading: float, directions: np.ndarray, mount_height: float,
                      max_range: float, t: float = 0.0):
    """
    Ray-by-ray, entity-by-entity intersector used to cross-check ``raycast_scan``.

    Returns:
        List of (range, class) or None per sensor-frame direction
    """
    origin = np.array([float(position[0]), float(position[1]), mount_height])
    results = []
    for sensor_dir in directions:
        d = sensor_to_world(sensor_dir[None, :], heading)[0]
        best = (math.inf, None)
        if d[2] < -_EPS:
            tg = origin[2] / -d[2]
            xy = origin[:2] + tg * d[:2]
            best = (tg, int(world.ground_class(xy[None])[0]))
        for obstacle in world.obstacles_at(t):
            poly = obstacle.polygon
            for k in range(len(poly)):
                a, b = poly[k], poly[(k + 1) % len(poly)]
                e = b - a
                denom = d[0] * e[1] - d[1] * e[0]
                if abs(denom) <= _EPS:
                    continue
                w = a - origin[:2]
                tw = (w[0] * e[1] - w[1] * e[0]) / denom
                sw = (w[0] * d[1] - w[1] * d[0]) / denom
                z = origin[2] + tw * d[2]
                if tw > _EPS and 0.0 <= sw <= 1.0 and 0.0 <= z <= obstacle.height and tw < best[0]:
                    best = (tw, obstacle.class_id)
            if abs(d[2]) > _EPS:
                tt = (obstacle.height - origin[2]) / d[2]
                if _EPS < tt < best[0]:
                    xy = origin[:2] + tt * d[:2]
                    if Path(poly).contains_point(xy):
                        best = (tt, obstacle.class_id)
        results.append(best if best[0] <= max_range else None)
    return results
