"""Deterministic seeded simulation of the parking lot, robot and sensors.

The robot is a unicycle (differential drive) integrated in closed form, so
trajectories are exact and testable against geometry. Each sensor draws
from its own RNG stream derived from the master seed by a fixed label,
which keeps streams independent of one another.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geo import GeoPoint, GeoReference, resync, to_gps
from .geometry import LaserScan, Point2D, Pose2D, ScanSpec, Twist, relative_pose

VEHICLE_CLASSES = ("car", "truck", "bus", "motorbike")

# granularity of the collision sweep along one integration step
COLLISION_SUBSTEP_M = 0.005


def subsystem_rng(master_seed: int, label: str) -> np.random.Generator:
    """Independent RNG stream for one subsystem, stable across runs."""
    tag = int.from_bytes(hashlib.blake2s(label.encode(), digest_size=8).digest(), "big")
    return np.random.default_rng(np.random.SeedSequence([master_seed & (2**63 - 1), tag]))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class RobotProfile:
    """Kinematic limits and footprint of the simulated robot."""

    v_max: float = 1.0
    omega_max: float = 1.5
    radius: float = 0.3

    def clamp(self, cmd: Twist) -> Twist:
        return Twist(
            max(-self.v_max, min(self.v_max, cmd.v)),
            max(-self.omega_max, min(self.omega_max, cmd.omega)),
        )


@dataclass(frozen=True)
class NoiseProfile:
    """Sensor noise magnitudes; all standard deviations, all >= 0."""

    odom_trans_std: float = 0.02   # fraction of distance traveled
    odom_rot_std: float = 0.05     # rad per rad turned
    odom_rot_inflation: float = 1.0  # multiplier reproducing rotation-blind odometry
    lidar_range_std: float = 0.01  # meters
    gps_std: float = 10.0          # meters per axis
    compass_std: float = 0.02      # radians

    def __post_init__(self):
        for name in ("odom_trans_std", "odom_rot_std", "odom_rot_inflation",
                     "lidar_range_std", "gps_std", "compass_std"):
            if getattr(self, name) < 0:
                raise ValueError(f"noise field {name} must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseProfile":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(d) - known
        if bad:
            raise ValueError(f"unknown noise field(s): {sorted(bad)}")
        return cls(**d)


@dataclass(frozen=True)
class ParkedCar:
    plate: str
    pose: Pose2D          # footprint center and orientation
    length: float = 4.5
    width: float = 1.8
    cls: str = "car"

    def __post_init__(self):
        if not self.plate:
            raise ValueError("car plate must be non-empty")
        if self.cls not in VEHICLE_CLASSES:
            raise ValueError(f"unknown vehicle class {self.cls!r}")
        if self.length <= 0 or self.width <= 0:
            raise ValueError("car footprint dimensions must be > 0")

    def corners(self) -> np.ndarray:
        """4x2 footprint corner coordinates, counter-clockwise."""
        c, s = math.cos(self.pose.theta), math.sin(self.pose.theta)
        hl, hw = self.length / 2.0, self.width / 2.0
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array([self.pose.x, self.pose.y])

    def edges(self) -> np.ndarray:
        """4x4 array of footprint edge segments (x1, y1, x2, y2)."""
        cs = self.corners()
        nxt = np.roll(cs, -1, axis=0)
        return np.hstack([cs, nxt])


def _rect_axes(car: ParkedCar) -> np.ndarray:
    c, s = math.cos(car.pose.theta), math.sin(car.pose.theta)
    return np.array([[c, s], [-s, c]])


def rectangles_overlap(a: ParkedCar, b: ParkedCar) -> bool:
    """Separating-axis test for two oriented rectangles."""
    ca, cb = a.corners(), b.corners()
    for axes in (_rect_axes(a), _rect_axes(b)):
        for axis in axes:
            pa = ca @ axis
            pb = cb @ axis
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True


@dataclass
class WorldModel:
    """Static parking-lot scene: bounds, wall segments, cars and the dock."""

    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    walls: list[tuple[float, float, float, float]] = field(default_factory=list)
    parked_cars: list[ParkedCar] = field(default_factory=list)
    station_pose: Pose2D = field(default_factory=Pose2D)
    station_anchor: GeoPoint = field(default_factory=lambda: GeoPoint(25.0, 51.0))
    noise: NoiseProfile = field(default_factory=NoiseProfile)
    seed: int = 0

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise ValueError("bounds: degenerate rectangle")
        if not self.contains(Point2D(self.station_pose.x, self.station_pose.y)):
            raise ValueError("station: pose outside bounds")
        for i, car in enumerate(self.parked_cars):
            if not all(self.contains(Point2D(x, y)) for x, y in car.corners()):
                raise ValueError(f"cars[{i}]: footprint outside bounds")
        for i in range(len(self.parked_cars)):
            for j in range(i + 1, len(self.parked_cars)):
                if rectangles_overlap(self.parked_cars[i], self.parked_cars[j]):
                    raise ValueError(f"cars[{i}]/cars[{j}]: footprints overlap")
        self._segments_cache: np.ndarray | None = None

    def contains(self, p: Point2D) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= p.x <= xmax and ymin <= p.y <= ymax

    def segments(self) -> np.ndarray:
        """All physical segments (walls + car footprint edges), shape (S, 4)."""
        if self._segments_cache is None:
            parts = [np.array(self.walls, dtype=np.float64).reshape(-1, 4)]
            parts.extend(car.edges() for car in self.parked_cars)
            self._segments_cache = np.vstack(parts) if parts else np.zeros((0, 4))
        return self._segments_cache

    def geo_reference(self, world_heading_offset: float = 0.0) -> GeoReference:
        """Geo reference implied by the station anchor.

        `world_heading_offset` is the CCW angle from east to the local x axis
        (0.0: local frame is ENU-aligned).
        """
        base = GeoReference(self.station_anchor, 0.0)
        return resync(base, self.station_anchor,
                      self.station_pose.theta + world_heading_offset,
                      self.station_pose)


@dataclass(frozen=True)
class SimState:
    true_pose: Pose2D = field(default_factory=Pose2D)
    commanded: Twist = field(default_factory=Twist)
    clock: float = 0.0
    rng_seed: int = 0
    contact: bool = False


def _unicycle(pose: Pose2D, v: float, omega: float, t: float) -> Pose2D:
    """Closed-form unicycle integration over time t."""
    if abs(omega) < 1e-9:
        return Pose2D(pose.x + v * t * math.cos(pose.theta),
                      pose.y + v * t * math.sin(pose.theta),
                      pose.theta)
    th2 = pose.theta + omega * t
    r = v / omega
    return Pose2D(pose.x + r * (math.sin(th2) - math.sin(pose.theta)),
                  pose.y - r * (math.cos(th2) - math.cos(pose.theta)),
                  th2)


def _point_segment_dist(px: float, py: float, segs: np.ndarray) -> float:
    """Min distance from a point to any segment in (S, 4) array."""
    if len(segs) == 0:
        return math.inf
    ax, ay, bx, by = segs[:, 0], segs[:, 1], segs[:, 2], segs[:, 3]
    dx, dy = bx - ax, by - ay
    ln2 = dx * dx + dy * dy
    t = np.where(ln2 > 0, ((px - ax) * dx + (py - ay) * dy) / np.where(ln2 > 0, ln2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    cx, cy = ax + t * dx, ay + t * dy
    return float(np.min(np.hypot(px - cx, py - cy)))


def step_dynamics(s: SimState, cmd: Twist, dt: float,
                  world: WorldModel | None = None,
                  profile: RobotProfile = RobotProfile()) -> SimState:
    """Advance the robot by dt under cmd, clamping at wall/car contact."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    cmd = profile.clamp(cmd)
    target = _unicycle(s.true_pose, cmd.v, cmd.omega, dt)

    contact = False
    pose = target
    if world is not None and len(world.segments()) > 0:
        segs = world.segments()
        arc_len = abs(cmd.v) * dt + abs(cmd.omega) * dt * profile.radius
        n_sub = max(1, int(math.ceil(arc_len / COLLISION_SUBSTEP_M)))
        prev = s.true_pose
        pose = s.true_pose
        for k in range(1, n_sub + 1):
            cand = _unicycle(s.true_pose, cmd.v, cmd.omega, dt * k / n_sub)
            if _point_segment_dist(cand.x, cand.y, segs) < profile.radius:
                contact = True
                pose = prev
                break
            prev = cand
            pose = cand

    return SimState(true_pose=pose,
                    commanded=cmd if not contact else Twist(0.0, 0.0),
                    clock=s.clock + dt,
                    rng_seed=s.rng_seed,
                    contact=contact)


def ray_cast(segments: np.ndarray, origin: tuple[float, float],
             angles: np.ndarray) -> np.ndarray:
    """Nearest ray-segment intersection distance per angle (inf if none)."""
    n = len(angles)
    if len(segments) == 0:
        return np.full(n, np.inf)
    ox, oy = origin
    dx, dy = np.cos(angles), np.sin(angles)                      # (B,)
    ax, ay = segments[:, 0], segments[:, 1]                      # (S,)
    sx, sy = segments[:, 2] - ax, segments[:, 3] - ay

    # solve o + t*d = a + u*s for each (beam, segment) pair
    denom = dx[:, None] * sy[None, :] - dy[:, None] * sx[None, :]   # (B, S)
    pax, pay = ax[None, :] - ox, ay[None, :] - oy
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (pax * sy[None, :] - pay * sx[None, :]) / denom
        u = (pax * dy[:, None] - pay * dx[:, None]) / denom
    valid = (np.abs(denom) > 1e-12) & (t >= 0.0) & (u >= 0.0) & (u <= 1.0)
    t = np.where(valid, t, np.inf)
    return t.min(axis=1)


def sim_lidar(world: WorldModel, pose: Pose2D, scan_spec: ScanSpec,
              noise: NoiseProfile, rng) -> LaserScan:
    """Simulate one range scan from `pose` (beam 0 along robot heading + angle_min)."""
    if not world.contains(Point2D(pose.x, pose.y)):
        raise ValueError("lidar pose outside world bounds")
    rng = _as_rng(rng)
    beam_angles = scan_spec.angles() + pose.theta
    dists = ray_cast(world.segments(), (pose.x, pose.y), beam_angles)
    # fixed-size draw keeps the stream independent of scene content
    dists = dists + rng.normal(0.0, noise.lidar_range_std, size=len(dists)) \
        if noise.lidar_range_std > 0 else dists + np.zeros(len(dists))
    no_return = scan_spec.range_max + 1.0
    ranges = np.where(np.isfinite(dists) & (dists <= scan_spec.range_max),
                      np.maximum(dists, 0.0), no_return)
    return LaserScan(scan_spec.angle_min, scan_spec.angle_max,
                     scan_spec.angle_increment, scan_spec.range_max, ranges)


def sim_odometry(prev: Pose2D, curr: Pose2D, noise: NoiseProfile, rng) -> Pose2D:
    """Odometry delta (curr in prev's frame) corrupted by the noise profile.

    Translation noise scales with distance traveled, rotation noise with the
    amount turned times the rotation-inflation factor, so zero motion reports
    an exact identity delta.
    """
    rng = _as_rng(rng)
    true_delta = relative_pose(prev, curr)
    dist = math.hypot(true_delta.x, true_delta.y)
    rot = abs(true_delta.theta)
    z = rng.standard_normal(3)
    trans_std = noise.odom_trans_std * dist
    rot_std = noise.odom_rot_std * rot * noise.odom_rot_inflation
    return Pose2D(true_delta.x + z[0] * trans_std,
                  true_delta.y + z[1] * trans_std,
                  true_delta.theta + z[2] * rot_std)


def sim_gps(true_pose: Pose2D, ref: GeoReference, noise: NoiseProfile, rng) -> GeoPoint:
    """GPS fix: true position plus 2D gaussian error, reported as a geopoint."""
    rng = _as_rng(rng)
    z = rng.standard_normal(2)
    p = Point2D(true_pose.x + z[0] * noise.gps_std,
                true_pose.y + z[1] * noise.gps_std)
    return to_gps(ref, p)


def sim_compass(true_pose: Pose2D, ref: GeoReference, noise: NoiseProfile, rng) -> float:
    """Compass bearing of the robot heading (clockwise from true north) with noise."""
    rng = _as_rng(rng)
    enu_heading = true_pose.theta + ref.heading_offset
    bearing = math.pi / 2.0 - enu_heading
    return float(bearing + rng.standard_normal() * noise.compass_std)


# ---------------------------------------------------------------------------
# Scenario (world) file handling

def world_to_dict(world: WorldModel) -> dict:
    return {
        "bounds": list(world.bounds),
        "walls": [list(w) for w in world.walls],
        "cars": [
            {"plate": c.plate, "x": c.pose.x, "y": c.pose.y, "theta": c.pose.theta,
             "length": c.length, "width": c.width, "class": c.cls}
            for c in world.parked_cars
        ],
        "station": {"x": world.station_pose.x, "y": world.station_pose.y,
                    "theta": world.station_pose.theta,
                    "lat": world.station_anchor.lat, "lon": world.station_anchor.lon},
        "noise": {
            "odom_trans_std": world.noise.odom_trans_std,
            "odom_rot_std": world.noise.odom_rot_std,
            "odom_rot_inflation": world.noise.odom_rot_inflation,
            "lidar_range_std": world.noise.lidar_range_std,
            "gps_std": world.noise.gps_std,
            "compass_std": world.noise.compass_std,
        },
        "seed": world.seed,
    }


class WorldFileError(ValueError):
    """Malformed scenario file; message names the offending field."""


def world_from_dict(doc: dict) -> WorldModel:
    def need(obj, key, where):
        if key not in obj:
            raise WorldFileError(f"{where}: missing field {key!r}")
        return obj[key]

    try:
        bounds = tuple(float(v) for v in need(doc, "bounds", "world"))
        if len(bounds) != 4:
            raise WorldFileError("bounds: expected [xmin, ymin, xmax, ymax]")
        walls = [tuple(float(v) for v in w) for w in doc.get("walls", [])]
        for i, w in enumerate(walls):
            if len(w) != 4:
                raise WorldFileError(f"walls[{i}]: expected [x1, y1, x2, y2]")
        cars = []
        for i, c in enumerate(doc.get("cars", [])):
            where = f"cars[{i}]"
            cars.append(ParkedCar(
                plate=str(need(c, "plate", where)),
                pose=Pose2D(float(need(c, "x", where)), float(need(c, "y", where)),
                            float(need(c, "theta", where))),
                length=float(c.get("length", 4.5)),
                width=float(c.get("width", 1.8)),
                cls=str(c.get("class", "car")),
            ))
        st = need(doc, "station", "world")
        station_pose = Pose2D(float(need(st, "x", "station")),
                              float(need(st, "y", "station")),
                              float(need(st, "theta", "station")))
        anchor = GeoPoint(float(need(st, "lat", "station")),
                          float(need(st, "lon", "station")))
        noise = NoiseProfile.from_dict(doc.get("noise", {}))
        seed = int(doc.get("seed", 0))
        return WorldModel(bounds=bounds, walls=walls, parked_cars=cars,
                          station_pose=station_pose, station_anchor=anchor,
                          noise=noise, seed=seed)
    except WorldFileError:
        raise
    except (TypeError, ValueError) as e:
        raise WorldFileError(str(e)) from e


def load_world(path) -> WorldModel:
    with open(str(path)) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise WorldFileError(f"invalid JSON in world file: {e}") from e
    return world_from_dict(doc)


def save_world(world: WorldModel, path) -> None:
    with open(str(path), "w") as f:
        json.dump(world_to_dict(world), f, indent=2, sort_keys=True)
        f.write("\n")
