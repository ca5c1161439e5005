import math

import numpy as np
import pytest

from core.errors import InvalidArgumentError
from navigation.geo import Bearing, GeoPoint, geo_delta_inverse
from navigation.route import RouteTracker, resample_route, route_gaps

ORIGIN = GeoPoint(34.7050, 135.4990)


def north_route(n: int = 4, gap: float = 12.0):
    return [geo_delta_inverse(ORIGIN, 0.0, gap * k) for k in range(n)]


def test_resample_straight_line():
    points = resample_route(np.array([[0.0, 0.0], [0.0, 40.0]]), 12.0)
    np.testing.assert_allclose(points, [[0, 0], [0, 12], [0, 24], [0, 36]], atol=1e-12)


def test_resample_keeps_exact_chord_gaps_around_corners():
    polyline = np.array([[0.0, 0.0], [0.0, 30.0], [25.0, 30.0], [25.0, 70.0]])
    points = resample_route(polyline, 12.0)
    gaps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    assert len(points) >= 6
    np.testing.assert_allclose(gaps, 12.0, atol=1e-9)


@pytest.mark.parametrize("polyline, gap", [
    (np.array([[0.0, 0.0]]), 12.0),
    (np.array([[0.0, 0.0], [0.0, 10.0]]), 0.0),
])
def test_resample_rejects_bad_input(polyline, gap):
    with pytest.raises(InvalidArgumentError):
        resample_route(polyline, gap)


def test_route_gaps_of_geo_route():
    gaps = route_gaps(north_route())
    assert gaps == pytest.approx([12.0] * 3, abs=1e-6)


def test_tracker_skips_point_under_the_vehicle():
    tracker = RouteTracker(north_route())
    rp1, rp2 = tracker.update(ORIGIN, Bearing(0.0))
    assert tracker.index == 1
    assert (rp1.x, rp1.y) == pytest.approx((0.0, 12.0), abs=1e-6)
    assert (rp2.x, rp2.y) == pytest.approx((0.0, 24.0), abs=1e-6)


def test_tracker_advances_inside_reach_radius():
    tracker = RouteTracker(north_route())
    tracker.update(ORIGIN, Bearing(0.0))
    rp1, _ = tracker.update(geo_delta_inverse(ORIGIN, 0.0, 7.0), Bearing(0.0))
    assert tracker.index == 1
    assert rp1.y == pytest.approx(5.0, abs=1e-6)
    rp1, rp2 = tracker.update(geo_delta_inverse(ORIGIN, 0.0, 9.0), Bearing(0.0))
    assert tracker.index == 2
    assert rp1.y == pytest.approx(15.0, abs=1e-6)
    assert rp2.y == pytest.approx(27.0, abs=1e-6)


def test_tracker_advances_past_points_behind():
    tracker = RouteTracker(north_route(), reach_radius=0.5)
    tracker.index = 1
    tracker.update(geo_delta_inverse(ORIGIN, 3.0, 13.0), Bearing(0.0))
    assert tracker.index == 2


def test_tracker_holds_last_point_and_reports_finish():
    route = north_route()
    tracker = RouteTracker(route)
    fix = geo_delta_inverse(ORIGIN, 0.0, 30.0)
    rp1, rp2 = tracker.update(fix, Bearing(0.0))
    assert tracker.index == tracker.last_index
    assert rp1 == rp2
    assert rp1.y == pytest.approx(6.0, abs=1e-6)
    assert tracker.remaining() == 0
    assert not tracker.finished(fix)
    assert tracker.finished(geo_delta_inverse(ORIGIN, 0.5, 36.5))


def test_tracker_rotates_into_vehicle_frame():
    tracker = RouteTracker(north_route())
    tracker.index = 1
    heading = math.pi / 2  # facing east: north lies on the vehicle's -x side
    rp1, _ = tracker.current(geo_delta_inverse(ORIGIN, 0.0, 6.0), Bearing.from_heading(heading))
    assert rp1.x == pytest.approx(-6.0, abs=1e-5)
    assert rp1.y == pytest.approx(0.0, abs=1e-5)


def test_tracker_needs_two_points():
    with pytest.raises(InvalidArgumentError):
        RouteTracker(north_route(1))
