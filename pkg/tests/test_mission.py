import math

import numpy as np
import pytest

from oracles import haversine_m

from haris.geo import GeoPoint, GeoReference, to_gps, to_local
from haris.geometry import Point2D, Pose2D
from haris.mission import (ALPR_SPEED_GATE, Aborted, Completed, Docking, Idle,
                           Mission, MissionError, MissionExecutor,
                           MissionState, ModuleGates, Navigating)
from haris.slam import LocalizationEstimate

REF = GeoReference(GeoPoint(25.0, 51.0), 0.0)
STATION = Pose2D(0.0, 0.0, 0.0)


def est(x, y, theta=0.0):
    return LocalizationEstimate(Pose2D(x, y, theta), 0.01)


def mission(*waypoints, tol=0.3):
    return Mission("m-1", tuple(waypoints), arrival_tolerance=tol)


class TestLoadMission:
    def test_waypoint_at_origin_maps_to_zero(self):
        ex = MissionExecutor(STATION)
        goals = ex.load_mission(mission(REF.origin), REF)
        assert goals[0].x == pytest.approx(0.0, abs=1e-12)
        assert goals[0].y == pytest.approx(0.0, abs=1e-12)
        assert ex.state.phase == Navigating(0)

    def test_north_waypoints_map_to_y(self):
        # two waypoints 100 m apart to the north -> 100 m apart in +y
        a = GeoPoint(25.0005, 51.0)
        b = to_gps(REF, Point2D(0.0, to_local(REF, a).y + 100.0))
        ex = MissionExecutor(STATION)
        ga, gb = ex.load_mission(mission(a, b), REF)
        assert gb.x == pytest.approx(ga.x, abs=1e-9)
        assert gb.y - ga.y == pytest.approx(100.0, abs=1e-6)
        assert haversine_m(a.lat, a.lon, b.lat, b.lon) == pytest.approx(100.0,
                                                                        rel=1e-4)

    def test_load_while_navigating_rejected(self):
        ex = MissionExecutor(STATION)
        ex.load_mission(mission(REF.origin), REF)
        with pytest.raises(MissionError, match="mission in progress"):
            ex.load_mission(mission(REF.origin), REF)

    def test_empty_mission_rejected(self):
        with pytest.raises(ValueError):
            MissionExecutor(STATION).load_mission(mission(), REF)

    def test_out_of_range_waypoint_aborts(self):
        ex = MissionExecutor(STATION)
        far = GeoPoint(26.0, 51.0)       # ~111 km north
        with pytest.raises(MissionError):
            ex.load_mission(mission(far), REF)
        assert isinstance(ex.state.phase, Aborted)


class TestTick:
    def test_idle_is_inert(self):
        ex = MissionExecutor(STATION)
        state, goal, gates = ex.tick(est(0, 0), speed=1.0)
        assert isinstance(state.phase, Idle)
        assert goal is None
        assert not gates.alpr_active

    def test_arrival_advances_waypoint(self):
        ex = MissionExecutor(STATION)
        a = to_gps(REF, Point2D(5.0, 0.0))
        b = to_gps(REF, Point2D(10.0, 0.0))
        ex.load_mission(mission(a, b), REF)
        state, goal, _ = ex.tick(est(4.8, 0.0), speed=0.5, now=1.0)
        assert state.phase == Navigating(1)
        assert goal.x == pytest.approx(10.0, abs=1e-6)
        assert ex.arrivals[0].waypoint_index == 0

    def test_last_waypoint_leads_to_docking(self):
        ex = MissionExecutor(STATION)
        a = to_gps(REF, Point2D(5.0, 0.0))
        ex.load_mission(mission(a), REF)
        state, goal, gates = ex.tick(est(5.1, 0.0), speed=0.5, now=2.0)
        assert isinstance(state.phase, Docking)
        assert (goal.x, goal.y) == (0.0, 0.0)
        assert not gates.alpr_active       # docking: camera off

    def test_waypoints_visited_strictly_in_order(self):
        ex = MissionExecutor(STATION)
        wps = [to_gps(REF, Point2D(x, 0.0)) for x in (3.0, 6.0, 9.0)]
        ex.load_mission(mission(*wps), REF)
        rng = np.random.default_rng(4)
        indices = []
        x = 0.0
        t = 0.0
        while isinstance(ex.state.phase, Navigating) and t < 200:
            x += rng.uniform(0.0, 0.2)
            t += 0.1
            state, goal, _ = ex.tick(est(x, 0.0), speed=0.5, now=t)
            if isinstance(state.phase, Navigating):
                indices.append(state.phase.waypoint_index)
        assert indices == sorted(indices)
        assert [a.waypoint_index for a in ex.arrivals] == [0, 1, 2]
        assert isinstance(ex.state.phase, Docking)
        # each recorded arrival is inside the tolerance radius of its goal
        for a in ex.arrivals:
            g = ex.goals[a.waypoint_index]
            assert math.hypot(a.x - g.x, a.y - g.y) <= 0.3 + 1e-9

    def test_blocked_aborts_after_ten_seconds(self):
        ex = MissionExecutor(STATION)
        ex.load_mission(mission(to_gps(REF, Point2D(5.0, 0.0))), REF)
        state, _, _ = ex.tick(est(1, 0), speed=0.0, blocked=True, now=0.0)
        assert isinstance(state.phase, Navigating)
        state, _, _ = ex.tick(est(1, 0), speed=0.0, blocked=True, now=9.9)
        assert isinstance(state.phase, Navigating)
        state, goal, gates = ex.tick(est(1, 0), speed=0.0, blocked=True, now=10.1)
        assert state.phase == Aborted("unreachable")
        assert goal is None and not gates.alpr_active

    def test_blocked_timer_resets_when_clear(self):
        ex = MissionExecutor(STATION)
        ex.load_mission(mission(to_gps(REF, Point2D(5.0, 0.0))), REF)
        ex.tick(est(1, 0), blocked=True, now=0.0)
        ex.tick(est(1, 0), blocked=False, now=9.0)
        state, _, _ = ex.tick(est(1, 0), blocked=True, now=12.0)
        assert isinstance(state.phase, Navigating)

    def test_alpr_gating(self):
        ex = MissionExecutor(STATION)
        ex.load_mission(mission(to_gps(REF, Point2D(50.0, 0.0))), REF)
        _, _, gates = ex.tick(est(1, 0), speed=0.5)
        assert gates.alpr_active
        _, _, gates = ex.tick(est(1, 0), speed=ALPR_SPEED_GATE)
        assert not gates.alpr_active      # boundary: gate is strict
        _, _, gates = ex.tick(est(1, 0), speed=0.0)
        assert not gates.alpr_active


class TestOnDocked:
    def docked_executor(self):
        ex = MissionExecutor(STATION)
        ex.load_mission(mission(to_gps(REF, Point2D(2.0, 0.0))), REF)
        ex.tick(est(2.0, 0.0), speed=0.5, now=1.0)       # -> Docking
        return ex

    def test_zero_drift_keeps_reference(self):
        ex = self.docked_executor()
        new_ref = ex.on_docked(REF, REF.origin, 0.0, est(0.0, 0.0, 0.0))
        assert new_ref.origin.lat == pytest.approx(REF.origin.lat, abs=1e-12)
        assert new_ref.origin.lon == pytest.approx(REF.origin.lon, abs=1e-12)
        assert new_ref.heading_offset == pytest.approx(0.0, abs=1e-12)
        assert isinstance(ex.state.phase, Completed)

    def test_injected_drift_cancelled(self):
        ex = self.docked_executor()
        drifted = est(0.2, -0.1, 0.05)
        new_ref = ex.on_docked(REF, REF.origin, 0.0, drifted)
        reported = to_gps(new_ref, Point2D(drifted.pose.x, drifted.pose.y))
        assert reported.lat == pytest.approx(REF.origin.lat, abs=1e-12)
        assert reported.lon == pytest.approx(REF.origin.lon, abs=1e-12)

    def test_outside_docking_rejected(self):
        ex = MissionExecutor(STATION)
        with pytest.raises(MissionError, match="not docking"):
            ex.on_docked(REF, REF.origin, 0.0, est(0, 0))

    def test_far_from_station_rejected(self):
        ex = self.docked_executor()
        with pytest.raises(MissionError, match="not at station"):
            ex.on_docked(REF, REF.origin, 0.0, est(2.0, 0.0))

    def test_reset_allows_next_mission(self):
        ex = self.docked_executor()
        ex.on_docked(REF, REF.origin, 0.0, est(0.0, 0.0))
        ex.reset()
        assert isinstance(ex.state.phase, Idle)
        ex.load_mission(mission(REF.origin), REF)
        assert ex.state.phase == Navigating(0)
