"""
World Module
Class-labeled 2.5D scenes: ground regions, extruded obstacles, routes and spawn
candidates, loaded from JSON scene files.
"""
import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from matplotlib.path import Path

from config import GROUND_CLASSES, NUM_CLASSES, ROUTE_GAP, SCENE_DIRECTORY, TRAVERSABLE_CLASSES
from core.errors import SceneFormatError
from navigation.geo import GeoPoint, geo_delta, geo_delta_inverse, local_to_world
from navigation.route import resample_route

BACKGROUND_CLASS = 17
PERSON_CLASS = 6
CAR_CLASS = 1
CAR_SIZE = (1.8, 4.2)
CAR_HEIGHT = 1.5
PERSON_SIZE = 0.5
PERSON_HEIGHT = 1.7


@dataclass
class Region:
    class_id: int
    polygon: np.ndarray
    path: Path = field(repr=False, default=None)

    def __post_init__(self):
        self.polygon = np.asarray(self.polygon, dtype=np.float64)
        if self.polygon.ndim != 2 or self.polygon.shape[0] < 3 or self.polygon.shape[1] != 2:
            raise SceneFormatError("a region needs a polygon of at least 3 (x, y) vertices")
        if abs(_signed_area(self.polygon)) < 1e-9:
            raise SceneFormatError("degenerate region polygon")
        if self.class_id not in GROUND_CLASSES:
            raise SceneFormatError(f"class {self.class_id} is not a ground class")
        self.path = Path(self.polygon)


@dataclass
class Obstacle:
    """Convex polygon footprint extruded from the ground to ``height``."""

    class_id: int
    polygon: np.ndarray
    height: float

    def __post_init__(self):
        poly = np.asarray(self.polygon, dtype=np.float64)
        if poly.ndim != 2 or poly.shape[0] < 3 or poly.shape[1] != 2:
            raise SceneFormatError("an obstacle needs a polygon of at least 3 (x, y) vertices")
        if not 0 < self.class_id < NUM_CLASSES:
            raise SceneFormatError(f"obstacle class {self.class_id} outside [1, {NUM_CLASSES})")
        if self.height <= 0:
            raise SceneFormatError("obstacle height must be positive")
        if _signed_area(poly) < 0:
            poly = poly[::-1].copy()
        self.polygon = poly

    @property
    def edges(self):
        return self.polygon, np.roll(self.polygon, -1, axis=0)

    def distance(self, points: np.ndarray) -> np.ndarray:
        return polygon_distance(points, self.polygon)


@dataclass
class RouteSpec:
    name: str
    split: str
    points: List[GeoPoint]
    world_points: np.ndarray
    path: Optional[np.ndarray] = None

    @property
    def drive_path(self) -> np.ndarray:
        """Authored centreline when available, else the route points."""
        return self.world_points if self.path is None else self.path


@dataclass
class Walker:
    """Pedestrian pacing back and forth along a walkway segment."""

    start: np.ndarray
    end: np.ndarray
    speed: float = 0.8
    phase: float = 0.0

    def position(self, t: float) -> np.ndarray:
        length = float(np.linalg.norm(self.end - self.start))
        if length == 0.0:
            return self.start.copy()
        travelled = (self.phase * length + self.speed * t) % (2.0 * length)
        frac = travelled / length if travelled <= length else 2.0 - travelled / length
        return self.start + frac * (self.end - self.start)

    def obstacle(self, t: float) -> Obstacle:
        return Obstacle(PERSON_CLASS, square(self.position(t), PERSON_SIZE), PERSON_HEIGHT)


def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def square(centre: np.ndarray, size: float) -> np.ndarray:
    h = size / 2.0
    cx, cy = centre
    return np.array([[cx - h, cy - h], [cx + h, cy - h], [cx + h, cy + h], [cx - h, cy + h]])


def oriented_box(centre, heading: float, width: float, length: float) -> np.ndarray:
    """Rectangle with its long side along compass ``heading``."""
    hw, hl = width / 2.0, length / 2.0
    corners = np.array([[hw, hl], [-hw, hl], [-hw, -hl], [hw, -hl]])
    return local_to_world(corners, np.asarray(centre, dtype=np.float64), heading)


def polygon_distance(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Distance from each point to a polygon (zero inside)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    a = polygon
    b = np.roll(polygon, -1, axis=0)
    ab = b - a
    ap = pts[:, None, :] - a[None, :, :]
    t = np.clip(np.sum(ap * ab, axis=2) / np.maximum(np.sum(ab * ab, axis=1), 1e-12), 0.0, 1.0)
    closest = a[None] + t[..., None] * ab[None]
    dist = np.linalg.norm(pts[:, None, :] - closest, axis=2).min(axis=1)
    inside = Path(polygon).contains_points(pts)
    dist[inside] = 0.0
    return dist


class World:
    """
    Static scene content plus the dynamic actors of one traffic condition.
    """

    def __init__(
        self,
        name: str,
        origin: GeoPoint,
        regions: Sequence[Region],
        obstacles: Sequence[Obstacle],
        routes: Sequence[RouteSpec] = (),
        parking_spots: np.ndarray = None,
        walkways: np.ndarray = None,
        background_class: int = BACKGROUND_CLASS,
    ):
        self.name = name
        self.origin = origin
        self.regions = list(regions)
        self.static_obstacles = list(obstacles)
        self.routes = list(routes)
        self.parking_spots = np.zeros((0, 3)) if parking_spots is None else np.asarray(parking_spots, dtype=np.float64)
        self.walkways = np.zeros((0, 2, 2)) if walkways is None else np.asarray(walkways, dtype=np.float64)
        self.background_class = background_class
        self.parked: List[Obstacle] = []
        self.walkers: List[Walker] = []

    # Ground

    def ground_class(self, xy: np.ndarray) -> np.ndarray:
        """Ground class under each (x, y); later regions override earlier ones."""
        pts = np.atleast_2d(np.asarray(xy, dtype=np.float64))
        classes = np.full(len(pts), self.background_class, dtype=np.int64)
        for region in self.regions:
            classes[region.path.contains_points(pts)] = region.class_id
        return classes

    def traversable(self, xy: np.ndarray) -> np.ndarray:
        return np.isin(self.ground_class(xy), TRAVERSABLE_CLASSES)

    # Obstacles

    def obstacles_at(self, t: float) -> List[Obstacle]:
        return self.static_obstacles + self.parked + [w.obstacle(t) for w in self.walkers]

    def clearance(self, xy: np.ndarray, t: float) -> np.ndarray:
        """Distance from each point to the nearest obstacle at time ``t``."""
        pts = np.atleast_2d(np.asarray(xy, dtype=np.float64))
        best = np.full(len(pts), np.inf)
        for obstacle in self.obstacles_at(t):
            best = np.minimum(best, obstacle.distance(pts))
        return best

    def populate(self, parked: int, walkers: int, rng: np.random.Generator) -> "World":
        """
        Place ``parked`` cars and ``walkers`` pedestrians drawn from the scene's
        spawn candidates.
        """
        self.parked = []
        self.walkers = []
        if parked and len(self.parking_spots):
            picks = rng.choice(len(self.parking_spots), size=min(parked, len(self.parking_spots)), replace=False)
            for idx in sorted(picks):
                x, y, heading = self.parking_spots[idx]
                self.parked.append(Obstacle(CAR_CLASS, oriented_box((x, y), heading, *CAR_SIZE), CAR_HEIGHT))
        if walkers and len(self.walkways):
            picks = rng.choice(len(self.walkways), size=min(walkers, len(self.walkways)), replace=False)
            for idx in sorted(picks):
                a, b = self.walkways[idx]
                self.walkers.append(Walker(a.copy(), b.copy(), speed=float(rng.uniform(0.5, 1.0)), phase=float(rng.uniform())))
        return self

    # Routes

    def route(self, name: str) -> RouteSpec:
        for route in self.routes:
            if route.name == name:
                return route
        raise SceneFormatError(f"scene '{self.name}' has no route '{name}'")

    def routes_for(self, split: Optional[str]) -> List[RouteSpec]:
        return [r for r in self.routes if split is None or r.split == split]

    def to_world(self, point: GeoPoint) -> np.ndarray:
        return np.array(geo_delta(self.origin, point))

    def to_geo(self, xy) -> GeoPoint:
        return geo_delta_inverse(self.origin, float(xy[0]), float(xy[1]))

    @property
    def bounds(self):
        pts = np.concatenate([r.polygon for r in self.regions]) if self.regions else np.zeros((1, 2))
        return pts.min(axis=0), pts.max(axis=0)


def _parse_route(world_origin: GeoPoint, raw, index: int, gap: float) -> RouteSpec:
    if isinstance(raw, list):
        raw = {"points": raw}
    name = raw.get("name", f"route{index}")
    split = raw.get("split", "trainval")
    if split not in ("trainval", "test"):
        raise SceneFormatError(f"route '{name}' has unknown split '{split}'")
    path = None
    if "path" in raw:
        path = np.asarray(raw["path"], dtype=np.float64)
        world_points = resample_route(path, gap)
        points = [geo_delta_inverse(world_origin, float(x), float(y)) for x, y in world_points]
    else:
        points = [GeoPoint(float(p["lat"]), float(p["lon"])) for p in raw.get("points", [])]
        world_points = np.array([geo_delta(world_origin, p) for p in points])
    if len(points) < 2:
        raise SceneFormatError(f"route '{name}' needs at least two points")
    return RouteSpec(name, split, points, world_points, path)


def load_scene(path: str, gap: float = ROUTE_GAP) -> World:
    """
    Read a JSON scene file.

    Raises:
        SceneFormatError: unreadable file or invalid content
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise SceneFormatError(f"cannot read scene {path}: {e}") from e

    try:
        origin = GeoPoint(float(raw["origin"]["lat"]), float(raw["origin"]["lon"]))
        regions = [Region(int(r["class"]), r["polygon"]) for r in raw.get("regions", [])]
        obstacles = [Obstacle(int(o["class"]), o["polygon"], float(o["height"])) for o in raw.get("obstacles", [])]
        route_items = list(raw.get("routes", [])) + [dict(r) for r in raw.get("route_paths", [])]
        routes = [_parse_route(origin, r, i, gap) for i, r in enumerate(route_items)]
        spawn = raw.get("spawn", {})
        world = World(
            name=raw.get("name", os.path.splitext(os.path.basename(path))[0]),
            origin=origin,
            regions=regions,
            obstacles=obstacles,
            routes=routes,
            parking_spots=spawn.get("parked"),
            walkways=spawn.get("walkways"),
            background_class=int(raw.get("background_class", BACKGROUND_CLASS)),
        )
    except SceneFormatError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise SceneFormatError(f"invalid scene {path}: {e}") from e
    return world


def scene_path(name: str, directory: str = SCENE_DIRECTORY) -> str:
    return name if name.endswith(".json") and os.path.exists(name) else os.path.join(directory, f"{name}.json")


def load_scenes(names: Sequence[str], directory: str = SCENE_DIRECTORY) -> Dict[str, World]:
    return {os.path.splitext(os.path.basename(n))[0]: load_scene(scene_path(n, directory)) for n in names}
