import math

import numpy as np
import pytest

from haris.geo import (
    EARTH_RADIUS_M,
    GeoPoint,
    GeoReference,
    OutOfProjectionRangeError,
    compass_bearing_from_heading,
    heading_from_compass_bearing,
    resync,
    to_gps,
    to_local,
)
from haris.geometry import Pose2D, Point2D
from oracles import haversine_m

REF = GeoReference(GeoPoint(25.0, 51.0))
# 111194.9 m per degree of latitude on the 6371 km sphere
M_PER_DEG = EARTH_RADIUS_M * math.pi / 180.0


class TestToLocal:
    def test_origin_maps_to_zero(self):
        p = to_local(REF, REF.origin)
        assert (p.x, p.y) == (0.0, 0.0)

    def test_hundred_meters_north(self):
        g = GeoPoint(25.0 + 100.0 / 111194.9, 51.0)
        # oracle: haversine confirms the two geopoints are 100 m apart
        assert haversine_m(REF.origin.lat, REF.origin.lon, g.lat, g.lon) == \
            pytest.approx(100.0, abs=0.01)
        p = to_local(REF, g)
        assert p.x == pytest.approx(0.0, abs=0.1)
        assert p.y == pytest.approx(100.0, abs=0.1)

    def test_heading_offset_rotates_frame(self):
        g = GeoPoint(25.0 + 100.0 / 111194.9, 51.0)
        ref = GeoReference(GeoPoint(25.0, 51.0), heading_offset=math.pi / 2)
        p = to_local(ref, g)
        # rotation oracle: north must land on the +x axis
        assert p.x == pytest.approx(100.0, abs=0.1)
        assert p.y == pytest.approx(0.0, abs=0.1)

    def test_out_of_range_rejected(self):
        far = GeoPoint(26.0, 51.0)  # ~111 km north
        with pytest.raises(OutOfProjectionRangeError):
            to_local(REF, far)


class TestToGps:
    def test_zero_maps_to_origin(self):
        g = to_gps(REF, Point2D(0.0, 0.0))
        assert g == REF.origin

    def test_forward_projection(self):
        g = to_gps(REF, Point2D(0.0, 111.1949))
        assert g.lat == pytest.approx(25.001, abs=1e-6)
        assert g.lon == pytest.approx(51.0, abs=1e-6)

    def test_round_trip_2km(self):
        g = GeoPoint(25.01, 51.01)
        back = to_gps(REF, to_local(REF, g))
        assert back.lat == pytest.approx(g.lat, abs=1e-9)
        assert back.lon == pytest.approx(g.lon, abs=1e-9)


class TestInvariants:
    def test_round_trip_identity_random(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            ref = GeoReference(
                GeoPoint(float(rng.uniform(-60, 60)), float(rng.uniform(-179, 179))),
                heading_offset=float(rng.uniform(-math.pi, math.pi)),
            )
            for _ in range(100):
                d = rng.uniform(0, 2000)
                ang = rng.uniform(0, 2 * math.pi)
                g = GeoPoint(
                    ref.origin.lat + d * math.sin(ang) / M_PER_DEG,
                    ref.origin.lon + d * math.cos(ang)
                    / (M_PER_DEG * math.cos(math.radians(ref.origin.lat))),
                )
                back = to_gps(ref, to_local(ref, g))
                assert abs(back.lat - g.lat) < 1e-9
                assert abs(back.lon - g.lon) < 1e-9

    def test_distance_preserving_vs_haversine(self):
        rng = np.random.default_rng(11)
        ref = GeoReference(GeoPoint(25.3, 51.4), heading_offset=0.4)
        for _ in range(200):
            pts = []
            for _ in range(2):
                d = rng.uniform(0, 2000)
                ang = rng.uniform(0, 2 * math.pi)
                pts.append(GeoPoint(
                    ref.origin.lat + d * math.sin(ang) / M_PER_DEG,
                    ref.origin.lon + d * math.cos(ang)
                    / (M_PER_DEG * math.cos(math.radians(ref.origin.lat))),
                ))
            a, b = (to_local(ref, g) for g in pts)
            local_d = math.hypot(a.x - b.x, a.y - b.y)
            true_d = haversine_m(pts[0].lat, pts[0].lon, pts[1].lat, pts[1].lon)
            if true_d > 1.0:
                assert local_d == pytest.approx(true_d, rel=1e-3)


class TestResync:
    STATION = GeoPoint(25.2871, 51.5340)

    def test_no_drift_is_identity(self):
        ref = GeoReference(self.STATION, heading_offset=0.3)
        out = resync(ref, self.STATION, station_heading=0.3,
                     measured_pose=Pose2D(0, 0, 0))
        assert out.origin.lat == pytest.approx(ref.origin.lat, abs=1e-12)
        assert out.origin.lon == pytest.approx(ref.origin.lon, abs=1e-12)
        assert out.heading_offset == pytest.approx(ref.heading_offset, abs=1e-12)

    def test_drift_corrected_exactly(self):
        ref = GeoReference(self.STATION, heading_offset=0.0)
        # robot believes it is 0.5 m east of the dock when physically docked
        measured = Pose2D(0.5, 0.0, 0.0)
        new_ref = resync(ref, self.STATION, 0.0, measured)
        reported = to_gps(new_ref, measured.position)
        assert abs(reported.lat - self.STATION.lat) < 1e-12
        assert abs(reported.lon - self.STATION.lon) < 1e-12

    def test_translation_and_heading_drift(self):
        ref = GeoReference(self.STATION, heading_offset=0.2)
        measured = Pose2D(0.5, -0.1, 0.2 + 0.1)  # 0.5 m east-ish + 0.1 rad drift
        station_heading = 0.2
        new_ref = resync(ref, self.STATION, station_heading, measured)
        reported = to_gps(new_ref, measured.position)
        assert abs(reported.lat - self.STATION.lat) < 1e-12
        assert abs(reported.lon - self.STATION.lon) < 1e-12
        # compose-and-invert oracle: the heading correction must absorb the
        # drift so the measured heading maps to the station heading
        assert new_ref.heading_offset == pytest.approx(
            station_heading - measured.theta, abs=1e-12)

    def test_idempotent(self):
        ref = GeoReference(self.STATION, heading_offset=0.7)
        measured = Pose2D(1.2, -0.4, 0.9)
        r1 = resync(ref, self.STATION, 0.7, measured)
        r2 = resync(r1, self.STATION, 0.7, measured)
        assert r1 == r2


class TestCompassConversion:
    def test_north_bearing_is_east_heading_quarter_turn(self):
        # bearing 0 (north) -> world x-axis points north -> heading pi/2
        assert heading_from_compass_bearing(0.0) == pytest.approx(math.pi / 2)
        assert heading_from_compass_bearing(math.pi / 2) == pytest.approx(0.0)

    def test_round_trip(self):
        for b in np.linspace(-3, 3, 13):
            h = heading_from_compass_bearing(b)
            assert compass_bearing_from_heading(h) == pytest.approx(b, abs=1e-12)
