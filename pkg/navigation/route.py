"""
Route Module
Route-point resampling and active route-point tracking.
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.errors import InvalidArgumentError
from .geo import Bearing, GeoPoint, LocalPoint, geo_delta, geo_to_local


def resample_route(polyline: np.ndarray, gap: float = 12.0) -> np.ndarray:
    """
    Place points along ``polyline`` so consecutive points are exactly ``gap`` apart
    (straight-line distance). The remainder shorter than one gap is dropped.

    Args:
        polyline: (K, 2) metric vertices, K >= 2
        gap: Chord length in meters

    Returns:
        (M, 2) route points starting at the first vertex
    """
    pts = np.asarray(polyline, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise InvalidArgumentError("polyline must be a (K>=2, 2) array")
    if gap <= 0:
        raise InvalidArgumentError("gap must be positive")

    out = [pts[0].copy()]
    seg, u = 0, 0.0
    while seg < len(pts) - 1:
        centre = out[-1]
        found = False
        while seg < len(pts) - 1:
            a, b = pts[seg], pts[seg + 1]
            d = b - a
            f = a - centre
            qa = float(d @ d)
            if qa == 0.0:
                seg, u = seg + 1, 0.0
                continue
            qb = 2.0 * float(f @ d)
            qc = float(f @ f) - gap * gap
            disc = qb * qb - 4.0 * qa * qc
            if disc >= 0.0:
                root = math.sqrt(disc)
                for cand in sorted(((-qb - root) / (2 * qa), (-qb + root) / (2 * qa))):
                    if u <= cand <= 1.0:
                        u = cand
                        out.append(a + cand * d)
                        found = True
                        break
            if found:
                break
            seg, u = seg + 1, 0.0
        if not found:
            break
    return np.array(out)


class RouteTracker:
    """
    Keeps the index of the active route point and reports the first two route
    points in the vehicle frame.
    """

    def __init__(self, route: Sequence[GeoPoint], reach_radius: float = 4.0, finish_radius: float = 2.0):
        if len(route) < 2:
            raise InvalidArgumentError("a route needs at least two points")
        self.route = list(route)
        self.reach_radius = reach_radius
        self.finish_radius = finish_radius
        self.index = 0

    @property
    def last_index(self) -> int:
        return len(self.route) - 1

    def update(self, fix: GeoPoint, bearing: Bearing) -> Tuple[LocalPoint, LocalPoint]:
        """
        Advance past reached or passed points, then return (Rp1, Rp2).
        """
        while self.index < self.last_index:
            local = geo_to_local(fix, self.route[self.index], bearing)
            if math.hypot(local.x, local.y) < self.reach_radius or local.y < 0.0:
                self.index += 1
            else:
                break
        return self.current(fix, bearing)

    def current(self, fix: GeoPoint, bearing: Bearing) -> Tuple[LocalPoint, LocalPoint]:
        rp1 = geo_to_local(fix, self.route[self.index], bearing)
        rp2 = geo_to_local(fix, self.route[min(self.index + 1, self.last_index)], bearing)
        return rp1, rp2

    def finished(self, fix: GeoPoint) -> bool:
        dx, dy = geo_delta(fix, self.route[-1])
        return math.hypot(dx, dy) < self.finish_radius

    def remaining(self) -> int:
        return self.last_index - self.index


def route_gaps(route: Sequence[GeoPoint], origin: Optional[GeoPoint] = None) -> List[float]:
    """Metric distances between consecutive route points."""
    origin = origin or route[0]
    gaps = []
    for a, b in zip(route[:-1], route[1:]):
        ax, ay = geo_delta(origin, a)
        bx, by = geo_delta(origin, b)
        gaps.append(math.hypot(bx - ax, by - ay))
    return gaps
