"""Planar poses, occupancy grids, laser scans and the coordinate-frame tree.

Conventions used throughout the package: x forward, counter-clockwise
positive angles, headings normalized to (-pi, pi].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TAU = 2.0 * math.pi


class FrameNotFoundError(KeyError):
    """Raised when a frame name is not present in a FrameTree."""


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    r = math.remainder(theta, TAU)
    if r <= -math.pi:
        r += TAU
    return r


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")


@dataclass(frozen=True)
class Pose2D:
    """Planar rigid pose: translation in meters, heading in radians."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @property
    def position(self) -> Point2D:
        return Point2D(self.x, self.y)


IDENTITY = Pose2D(0.0, 0.0, 0.0)


def compose(a: Pose2D, b: Pose2D) -> Pose2D:
    """Rigid-motion composition a*b (b expressed in a's frame)."""
    c, s = math.cos(a.theta), math.sin(a.theta)
    return Pose2D(
        a.x + c * b.x - s * b.y,
        a.y + s * b.x + c * b.y,
        a.theta + b.theta,
    )


def inverse(p: Pose2D) -> Pose2D:
    c, s = math.cos(p.theta), math.sin(p.theta)
    return Pose2D(-(c * p.x + s * p.y), -(-s * p.x + c * p.y), -p.theta)


def relative_pose(a: Pose2D, b: Pose2D) -> Pose2D:
    """Pose of b expressed in a's frame: inverse(a)*b."""
    return compose(inverse(a), b)


def transform_point(pose: Pose2D, p: Point2D) -> Point2D:
    """Map a point given in `pose`'s frame into the parent frame."""
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    return Point2D(pose.x + c * p.x - s * p.y, pose.y + s * p.x + c * p.y)


@dataclass(frozen=True)
class Twist:
    """Velocity command: forward m/s, counter-clockwise rad/s."""

    v: float = 0.0
    omega: float = 0.0


@dataclass
class GridMap:
    """Log-odds occupancy grid. Cell value 0.0 means unknown.

    `origin` is the world position of the outer corner of cell (0, 0);
    cells are stored row-major as cells[row, col].
    """

    resolution: float
    width: int
    height: int
    origin: Point2D = field(default_factory=lambda: Point2D(0.0, 0.0))
    cells: np.ndarray | None = None

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be > 0")
        if self.cells is None:
            self.cells = np.zeros((self.height, self.width), dtype=np.float64)
        elif self.cells.shape != (self.height, self.width):
            raise ValueError("cells shape does not match width/height")

    def world_to_grid(self, p: Point2D) -> tuple[int, int] | None:
        """Cell index (col, row) containing p, or None when out of bounds.

        A point exactly on a cell boundary belongs to the higher-index cell.
        """
        col = math.floor((p.x - self.origin.x) / self.resolution)
        row = math.floor((p.y - self.origin.y) / self.resolution)
        if 0 <= col < self.width and 0 <= row < self.height:
            return (col, row)
        return None

    def grid_to_world(self, col: int, row: int) -> Point2D:
        """World coordinates of the center of cell (col, row)."""
        return Point2D(
            self.origin.x + (col + 0.5) * self.resolution,
            self.origin.y + (row + 0.5) * self.resolution,
        )

    def copy(self) -> "GridMap":
        return GridMap(self.resolution, self.width, self.height, self.origin,
                       self.cells.copy())

    def occupancy_probabilities(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.cells))


@dataclass(frozen=True)
class ScanSpec:
    """Beam layout of a 2D laser scanner."""

    angle_min: float = -math.pi
    angle_max: float = math.pi - TAU / 360.0
    angle_increment: float = TAU / 360.0
    range_max: float = 12.0

    @property
    def beam_count(self) -> int:
        return int(math.floor((self.angle_max - self.angle_min)
                              / self.angle_increment + 1e-9)) + 1

    def angles(self) -> np.ndarray:
        return self.angle_min + self.angle_increment * np.arange(self.beam_count)


@dataclass
class LaserScan:
    """One 2D range scan. A range > range_max encodes "no return"."""

    angle_min: float
    angle_max: float
    angle_increment: float
    range_max: float
    ranges: np.ndarray

    def __post_init__(self):
        self.ranges = np.asarray(self.ranges, dtype=np.float64)
        expected = int(math.floor((self.angle_max - self.angle_min)
                                  / self.angle_increment + 1e-9)) + 1
        if len(self.ranges) != expected:
            raise ValueError(
                f"scan has {len(self.ranges)} ranges, spec implies {expected}")
        if np.any(self.ranges < 0):
            raise ValueError("negative range in scan")

    @property
    def no_return_value(self) -> float:
        return self.range_max + 1.0

    def angles(self) -> np.ndarray:
        return self.angle_min + self.angle_increment * np.arange(len(self.ranges))

    def hit_mask(self) -> np.ndarray:
        return self.ranges <= self.range_max


class FrameTree:
    """Named coordinate frames linked parent->child by Pose2D transforms.

    Restricted to a tree (each non-root frame has exactly one parent), the
    common map->odom->base->sensor chain.
    """

    def __init__(self, root: str = "map"):
        self.root = root
        self._parent: dict[str, tuple[str, Pose2D]] = {}

    def frames(self) -> set[str]:
        return {self.root, *self._parent.keys()}

    def add_frame(self, name: str, parent: str, transform: Pose2D) -> None:
        """Attach `name` under `parent`; `transform` is the child pose in the parent frame."""
        if name == self.root or name in self._parent:
            raise ValueError(f"frame {name!r} already exists")
        if parent != self.root and parent not in self._parent:
            raise FrameNotFoundError(parent)
        self._parent[name] = (parent, transform)

    def set_transform(self, name: str, transform: Pose2D) -> None:
        if name not in self._parent:
            raise FrameNotFoundError(name)
        parent, _ = self._parent[name]
        self._parent[name] = (parent, transform)

    def pose_in_root(self, name: str) -> Pose2D:
        if name == self.root:
            return IDENTITY
        if name not in self._parent:
            raise FrameNotFoundError(name)
        chain: list[Pose2D] = []
        cur = name
        while cur != self.root:
            parent, tf = self._parent[cur]
            chain.append(tf)
            cur = parent
        pose = IDENTITY
        for tf in reversed(chain):
            pose = compose(pose, tf)
        return pose

    def transform(self, from_frame: str, to_frame: str) -> Pose2D:
        """Pose expressing `from_frame` coordinates in `to_frame` coordinates."""
        return compose(inverse(self.pose_in_root(to_frame)),
                       self.pose_in_root(from_frame))


# PGM occupancy codes and thresholds (de facto map interchange format)
PGM_OCCUPIED = 0
PGM_FREE = 254
PGM_UNKNOWN = 205
OCCUPIED_PROB_THRESHOLD = 0.65
FREE_PROB_THRESHOLD = 0.25


def save_pgm(grid: GridMap, pgm_path, image_name: str | None = None) -> None:
    """Write the map as binary PGM (P5) plus a metadata sidecar.

    Image rows run top-down, so file row 0 is the highest map row. The
    sidecar `<pgm_path>.yaml` records resolution, origin and thresholds.
    """
    probs = grid.occupancy_probabilities()
    img = np.full(probs.shape, PGM_UNKNOWN, dtype=np.uint8)
    img[probs > OCCUPIED_PROB_THRESHOLD] = PGM_OCCUPIED
    img[probs < FREE_PROB_THRESHOLD] = PGM_FREE
    img = img[::-1, :]  # top row = max y

    pgm_path = str(pgm_path)
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    with open(pgm_path, "wb") as f:
        f.write(header)
        f.write(img.tobytes())

    if image_name is None:
        image_name = pgm_path.rsplit("/", 1)[-1]
    meta = (
        f"image: {image_name}\n"
        f"resolution: {grid.resolution:.9f}\n"
        f"origin: [{grid.origin.x:.9f}, {grid.origin.y:.9f}, 0.0]\n"
        f"occupied_thresh: {OCCUPIED_PROB_THRESHOLD}\n"
        f"free_thresh: {FREE_PROB_THRESHOLD}\n"
        "negate: 0\n"
    )
    with open(pgm_path + ".yaml", "w") as f:
        f.write(meta)


def load_pgm(pgm_path) -> tuple[np.ndarray, dict]:
    """Read a P5 PGM and its sidecar back; returns (uint8 image in map row order, metadata)."""
    with open(str(pgm_path), "rb") as f:
        magic = f.readline().strip()
        if magic != b"P5":
            raise ValueError("not a binary PGM (P5) file")
        dims = f.readline().split()
        width, height = int(dims[0]), int(dims[1])
        f.readline()  # maxval
        img = np.frombuffer(f.read(width * height), dtype=np.uint8)
    img = img.reshape((height, width))[::-1, :]
    meta: dict = {}
    try:
        with open(str(pgm_path) + ".yaml") as f:
            for line in f:
                key, _, val = line.partition(":")
                meta[key.strip()] = val.strip()
    except FileNotFoundError:
        pass
    return img, meta
