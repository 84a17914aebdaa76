"""Waypoint mission executor: GPS goals in, sequential local goals out.

The executor owns a single-phase state machine (Idle -> Navigating(i) ->
Docking -> Completed, or Aborted) and the gating flag for the plate-reading
camera, which is active only while navigating above a speed floor.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .geo import GeoPoint, GeoReference, OutOfProjectionRangeError, resync, to_local
from .geometry import Point2D, Pose2D

ALPR_SPEED_GATE = 0.05        # m/s: "on a mission and moving"
BLOCKED_ABORT_AFTER = 10.0    # seconds of continuous blockage


class MissionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Mission:
    id: str
    waypoints: tuple[GeoPoint, ...]
    arrival_tolerance: float = 0.3
    created_at: int = 0          # milliseconds since epoch

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        if self.arrival_tolerance <= 0:
            raise ValueError("arrival_tolerance must be > 0")


@dataclass(frozen=True)
class Idle:
    name = "idle"


@dataclass(frozen=True)
class Navigating:
    waypoint_index: int
    name = "navigating"


@dataclass(frozen=True)
class Docking:
    name = "docking"


@dataclass(frozen=True)
class Completed:
    name = "completed"


@dataclass(frozen=True)
class Aborted:
    reason: str
    name = "aborted"


Phase = Idle | Navigating | Docking | Completed | Aborted


@dataclass(frozen=True)
class MissionState:
    phase: Phase = field(default_factory=Idle)
    active_mission: Mission | None = None


@dataclass(frozen=True)
class ModuleGates:
    alpr_active: bool = False


@dataclass(frozen=True)
class Arrival:
    waypoint_index: int    # -1 marks the dock
    x: float
    y: float
    time: float


class MissionExecutor:
    """Single-owner mission state machine.

    tick() consumes the current estimate plus the navigation status the
    caller observed (speed, blocked) and a clock, and reports the goal the
    robot should steer to. Docking completion is acknowledged separately via
    on_docked(), which performs the charging-station resync.
    """

    def __init__(self, station_pose: Pose2D, dock_tolerance: float = 0.3):
        self.station_pose = station_pose
        self.dock_tolerance = dock_tolerance
        self.state = MissionState()
        self.goals: tuple[Point2D, ...] = ()
        self.arrivals: list[Arrival] = []
        self._blocked_since: float | None = None

    def load_mission(self, m: Mission, ref: GeoReference) -> tuple[Point2D, ...]:
        if not isinstance(self.state.phase, Idle):
            raise MissionError("mission in progress")
        if not m.waypoints:
            raise ValueError("mission has no waypoints")
        try:
            goals = tuple(to_local(ref, wp) for wp in m.waypoints)
        except OutOfProjectionRangeError as e:
            self.state = MissionState(Aborted(f"waypoint out of range: {e}"), m)
            raise MissionError(str(e)) from e
        self.goals = goals
        self.arrivals = []
        self._blocked_since = None
        self.state = MissionState(Navigating(0), m)
        return goals

    def tick(self, est, speed: float = 0.0, blocked: bool = False,
             now: float = 0.0) -> tuple[MissionState, Point2D | None, ModuleGates]:
        phase = self.state.phase
        if isinstance(phase, (Idle, Completed, Aborted)):
            return self.state, None, ModuleGates(False)

        if blocked:
            if self._blocked_since is None:
                self._blocked_since = now
            elif now - self._blocked_since > BLOCKED_ABORT_AFTER:
                self.state = MissionState(Aborted("unreachable"),
                                          self.state.active_mission)
                return self.state, None, ModuleGates(False)
        else:
            self._blocked_since = None

        if isinstance(phase, Navigating):
            i = phase.waypoint_index
            goal = self.goals[i]
            if self._arrived(est.pose, goal, self._tolerance()):
                self.arrivals.append(Arrival(i, est.pose.x, est.pose.y, now))
                if i + 1 < len(self.goals):
                    self.state = MissionState(Navigating(i + 1),
                                              self.state.active_mission)
                    goal = self.goals[i + 1]
                else:
                    self.state = MissionState(Docking(),
                                              self.state.active_mission)
                    goal = Point2D(self.station_pose.x, self.station_pose.y)
        if isinstance(self.state.phase, Docking):
            goal = Point2D(self.station_pose.x, self.station_pose.y)

        gates = ModuleGates(isinstance(self.state.phase, Navigating)
                            and abs(speed) > ALPR_SPEED_GATE)
        return self.state, goal, gates

    def at_station(self, est) -> bool:
        return self._arrived(est.pose,
                             Point2D(self.station_pose.x, self.station_pose.y),
                             self.dock_tolerance)

    def on_docked(self, ref: GeoReference, station: GeoPoint,
                  station_heading: float, est, now: float = 0.0) -> GeoReference:
        if not isinstance(self.state.phase, Docking):
            raise MissionError("not docking")
        if not self.at_station(est):
            raise MissionError("not at station")
        new_ref = resync(ref, station, station_heading, est.pose)
        self.arrivals.append(Arrival(-1, est.pose.x, est.pose.y, now))
        self.state = MissionState(Completed(), self.state.active_mission)
        return new_ref

    def reset(self) -> None:
        """Back to Idle so another mission can be loaded."""
        if isinstance(self.state.phase, (Navigating, Docking)):
            raise MissionError("mission in progress")
        self.state = MissionState()
        self.goals = ()
        self._blocked_since = None

    def _tolerance(self) -> float:
        m = self.state.active_mission
        return m.arrival_tolerance if m else 0.3

    @staticmethod
    def _arrived(pose: Pose2D, goal: Point2D, tol: float) -> bool:
        return math.hypot(pose.x - goal.x, pose.y - goal.y) <= tol


# ---------------------------------------------------------------------------
# Mission files: {"id": ..., "waypoints": [{"lat", "lon"}], "tolerance": ...}

class MissionFileError(ValueError):
    """Malformed mission file; message names the offending field."""


def mission_to_dict(m: Mission) -> dict:
    return {"id": m.id,
            "waypoints": [{"lat": wp.lat, "lon": wp.lon} for wp in m.waypoints],
            "tolerance": m.arrival_tolerance}


def mission_from_dict(doc: dict) -> Mission:
    if not isinstance(doc, dict):
        raise MissionFileError("mission: expected a JSON object")
    wps = doc.get("waypoints")
    if not isinstance(wps, list) or not wps:
        raise MissionFileError("waypoints: expected a non-empty list")
    points = []
    for i, wp in enumerate(wps):
        where = f"waypoints[{i}]"
        if not isinstance(wp, dict) or "lat" not in wp or "lon" not in wp:
            raise MissionFileError(f"{where}: missing lat or lon")
        try:
            points.append(GeoPoint(float(wp["lat"]), float(wp["lon"])))
        except (TypeError, ValueError) as e:
            raise MissionFileError(f"{where}: {e}") from e
    try:
        return Mission(id=str(doc.get("id", "mission")),
                       waypoints=tuple(points),
                       arrival_tolerance=float(doc.get("tolerance", 0.3)))
    except (TypeError, ValueError) as e:
        raise MissionFileError(f"tolerance: {e}") from e


def load_mission_file(path) -> Mission:
    with open(str(path)) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise MissionFileError(f"invalid JSON in mission file: {e}") from e
    return mission_from_dict(doc)


def save_mission_file(m: Mission, path) -> None:
    with open(str(path), "w") as f:
        json.dump(mission_to_dict(m), f, indent=2, sort_keys=True)
        f.write("\n")
