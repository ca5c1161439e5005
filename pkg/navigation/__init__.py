# Global-to-local navigation: GNSS offsets, bearing filter, waypoints, routes
from .geo import (
    Bearing,
    GeoPoint,
    LocalPoint,
    geo_delta,
    geo_delta_inverse,
    geo_to_local,
    local_to_world,
    rotate_to_local,
    world_to_local,
    wrap_angle,
)
from .heading_filter import HeadingFilterConfig, HeadingFilterState, ImuSample, heading_update, tilt_compensated_heading
from .route import RouteTracker, resample_route, route_gaps
from .waypoints import accumulate_waypoints

__all__ = [
    "Bearing",
    "GeoPoint",
    "LocalPoint",
    "geo_delta",
    "geo_delta_inverse",
    "geo_to_local",
    "local_to_world",
    "rotate_to_local",
    "world_to_local",
    "wrap_angle",
    "HeadingFilterConfig",
    "HeadingFilterState",
    "ImuSample",
    "heading_update",
    "tilt_compensated_heading",
    "RouteTracker",
    "resample_route",
    "route_gaps",
    "accumulate_waypoints",
]
