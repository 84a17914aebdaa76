"""Bidirectional GPS <-> robot-world transformation.

A GeoReference anchors the robot's local metric frame to a geodetic point
(nominally the charging station). The projection is an equirectangular
local tangent plane on a spherical earth: accurate to well under a
centimeter over a parking lot, and exactly invertible, which is what the
drift-resync contract needs.

heading_offset is kept in the math convention (counter-clockwise angle
from the ENU east axis to the robot-world x axis). Compass bearings,
clockwise from true north, convert via ``heading_from_compass_bearing``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Pose2D, Point2D, normalize_angle

EARTH_RADIUS_M = 6_371_000.0

# Flat-earth validity bound for the projection.
MAX_PROJECTION_RANGE_M = 50_000.0


class OutOfProjectionRangeError(ValueError):
    """Point is too far from the reference origin for a flat-earth projection."""


def heading_from_compass_bearing(bearing: float) -> float:
    """Convert clockwise-from-north compass bearing to the CCW-from-east convention."""
    return normalize_angle(math.pi / 2.0 - bearing)


def compass_bearing_from_heading(heading: float) -> float:
    return normalize_angle(math.pi / 2.0 - heading)


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} out of [-90, 90]")
        if not -180.0 < self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} out of (-180, 180]")


@dataclass(frozen=True)
class GeoReference:
    """Anchors the local metric frame: origin geopoint + world x-axis heading."""

    origin: GeoPoint
    heading_offset: float = 0.0
    earth_radius: float = EARTH_RADIUS_M

    def __post_init__(self):
        object.__setattr__(self, "heading_offset",
                           normalize_angle(self.heading_offset))

    @classmethod
    def from_compass(cls, origin: GeoPoint, bearing: float) -> "GeoReference":
        return cls(origin, heading_from_compass_bearing(bearing))


def _enu_offset(ref: GeoReference, g: GeoPoint) -> tuple[float, float]:
    lat0 = math.radians(ref.origin.lat)
    east = math.radians(g.lon - ref.origin.lon) * ref.earth_radius * math.cos(lat0)
    north = math.radians(g.lat - ref.origin.lat) * ref.earth_radius
    return east, north


def to_local(ref: GeoReference, g: GeoPoint) -> Point2D:
    """Project a geopoint into the robot-world frame.

    Raises OutOfProjectionRangeError beyond the flat-earth validity bound.
    """
    east, north = _enu_offset(ref, g)
    if math.hypot(east, north) > MAX_PROJECTION_RANGE_M:
        raise OutOfProjectionRangeError(
            f"point {g} is farther than {MAX_PROJECTION_RANGE_M/1000:.0f} km "
            "from the reference origin")
    c, s = math.cos(ref.heading_offset), math.sin(ref.heading_offset)
    # rotate ENU by -heading_offset into the world frame
    return Point2D(c * east + s * north, -s * east + c * north)


def to_gps(ref: GeoReference, p: Point2D) -> GeoPoint:
    """Exact algebraic inverse of to_local under the same reference."""
    if math.hypot(p.x, p.y) > MAX_PROJECTION_RANGE_M:
        raise OutOfProjectionRangeError(
            f"local point ({p.x}, {p.y}) is beyond the projection validity bound")
    c, s = math.cos(ref.heading_offset), math.sin(ref.heading_offset)
    east = c * p.x - s * p.y
    north = s * p.x + c * p.y
    lat0 = math.radians(ref.origin.lat)
    lat = ref.origin.lat + math.degrees(north / ref.earth_radius)
    lon = ref.origin.lon + math.degrees(east / (ref.earth_radius * math.cos(lat0)))
    return GeoPoint(lat, lon)


def resync(ref: GeoReference, station: GeoPoint, station_heading: float,
           measured_pose: Pose2D) -> GeoReference:
    """Re-anchor the transformation at a known reference point.

    Returns a new reference under which ``measured_pose`` (the robot's
    current, possibly drifted, believed pose) maps exactly onto the
    station's surveyed geopoint and heading. Called when the robot is
    physically docked, this cancels accumulated transformation drift.
    """
    new_offset = normalize_angle(station_heading - measured_pose.theta)
    c, s = math.cos(new_offset), math.sin(new_offset)
    east = c * measured_pose.x - s * measured_pose.y
    north = s * measured_pose.x + c * measured_pose.y
    origin_lat = station.lat - math.degrees(north / ref.earth_radius)
    lat0 = math.radians(origin_lat)
    origin_lon = station.lon - math.degrees(east / (ref.earth_radius * math.cos(lat0)))
    return GeoReference(GeoPoint(origin_lat, origin_lon), new_offset,
                        ref.earth_radius)


def format_degrees(value: float) -> str:
    """Serialize decimal degrees with 9 fractional digits (wire/file format)."""
    return f"{value:.9f}"
