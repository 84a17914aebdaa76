"""Parking-lot world generator and lawnmower mission builder.

Lots are row-major grids of perpendicular bays separated by driving aisles,
wrapped in a perimeter wall. The mission builder emits boustrophedon aisle
passes ordered so the right-mounted camera sweeps every row exactly once.
"""
from __future__ import annotations

import math

import numpy as np

from .geo import GeoPoint, to_gps
from .geometry import Point2D, Pose2D
from .sim import NoiseProfile, ParkedCar, WorldModel

# class label -> (length, width), desk-scale footprints that fit one bay
VEHICLE_DIMS = {
    "car": (4.5, 1.8),
    "truck": (5.5, 2.1),
    "bus": (6.0, 2.3),
    "motorbike": (2.0, 0.8),
}
CLASS_ORDER = ("car", "truck", "bus", "motorbike")
CLASS_WEIGHTS = (0.80, 0.12, 0.06, 0.02)

MARGIN = 2.0          # clear strip inside the perimeter wall
BAY_DEPTH = 6.5       # fits the longest vehicle with slack
AISLE_WIDTH = 4.0     # driving corridor above each row
LANE_CLEARANCE = 1.3  # lane offset past the row's longest half-footprint
MIN_SPACING = 2.8     # widest footprint (2.3) plus clearance


def random_plate(rng: np.random.Generator) -> str:
    n = 5 + int(rng.integers(0, 2))
    return "".join(str(d) for d in rng.integers(0, 10, size=n))


def generate_lot(rows: int, cols: int, spacing: float = 3.0, seed: int = 0,
                 anchor: GeoPoint = GeoPoint(25.0, 51.0),
                 noise: NoiseProfile | None = None) -> WorldModel:
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    if spacing < MIN_SPACING:
        raise ValueError(f"spacing must be >= {MIN_SPACING}")
    rng = np.random.default_rng(seed)

    width = 2 * MARGIN + cols * spacing
    height = 2 * MARGIN + rows * (BAY_DEPTH + AISLE_WIDTH)
    bounds = (0.0, 0.0, width, height)
    walls = [
        (0.0, 0.0, width, 0.0),
        (width, 0.0, width, height),
        (width, height, 0.0, height),
        (0.0, height, 0.0, 0.0),
    ]

    n = rows * cols
    class_idx = rng.choice(len(CLASS_ORDER), size=n, p=CLASS_WEIGHTS)
    plates: list[str] = []
    seen: set[str] = set()
    while len(plates) < n:
        p = random_plate(rng)
        if p not in seen:
            seen.add(p)
            plates.append(p)

    cars = []
    for k in range(n):
        r, c = divmod(k, cols)
        cls = CLASS_ORDER[class_idx[k]]
        length, car_width = VEHICLE_DIMS[cls]
        cars.append(ParkedCar(
            plate=plates[k],
            pose=Pose2D(MARGIN + spacing * (c + 0.5),
                        MARGIN + BAY_DEPTH / 2.0 + r * (BAY_DEPTH + AISLE_WIDTH),
                        math.pi / 2.0),
            length=length, width=car_width, cls=cls))

    return WorldModel(
        bounds=bounds, walls=walls, parked_cars=cars,
        station_pose=Pose2D(1.2, 1.2, 0.0), station_anchor=anchor,
        noise=noise if noise is not None else NoiseProfile(),
        seed=seed)


def corridor_world(length: float = 30.0, width: float = 12.0,
                   anchor: GeoPoint = GeoPoint(25.0, 51.0),
                   noise: NoiseProfile | None = None,
                   start_x: float = 2.0) -> WorldModel:
    """Empty walled box for straight-line path-error experiments."""
    walls = [
        (0.0, 0.0, length, 0.0),
        (length, 0.0, length, width),
        (length, width, 0.0, width),
        (0.0, width, 0.0, 0.0),
    ]
    return WorldModel(
        bounds=(0.0, 0.0, length, width), walls=walls, parked_cars=[],
        station_pose=Pose2D(start_x, width / 2.0, 0.0), station_anchor=anchor,
        noise=noise if noise is not None else NoiseProfile())


def _group_rows(world: WorldModel) -> list[list[ParkedCar]]:
    """Cluster parked cars into rows by their y centers (0.5 m bins)."""
    bins: dict[int, list[ParkedCar]] = {}
    for car in world.parked_cars:
        bins.setdefault(round(car.pose.y * 2), []).append(car)
    return [bins[k] for k in sorted(bins)]


def boustrophedon_mission(world: WorldModel,
                          lane_clearance: float = LANE_CLEARANCE,
                          overshoot: float = 2.0) -> list[GeoPoint]:
    """Aisle-pass waypoints covering every row with the right-side camera.

    Even rows are swept west→east with the row to the south (robot's right);
    odd rows east→west with the row to the north. Consecutive passes share
    an aisle, so the turnaround is a short lateral hop.
    """
    rows = _group_rows(world)
    if not rows:
        raise ValueError("world has no parked cars")
    xmin, _, xmax, _ = world.bounds
    x_lo = min(c.pose.x for row in rows for c in row)
    x_hi = max(c.pose.x for row in rows for c in row)
    x_w = max(xmin + 1.0, x_lo - overshoot)
    x_e = min(xmax - 1.0, x_hi + overshoot)

    points = []
    for r, row in enumerate(rows):
        y_row = sum(c.pose.y for c in row) / len(row)
        half = max(c.length / 2.0 for c in row)
        if r % 2 == 0:
            lane = y_row + half + lane_clearance
            points += [(x_w, lane), (x_e, lane)]
        else:
            lane = y_row - half - lane_clearance
            points += [(x_e, lane), (x_w, lane)]

    ref = world.geo_reference()
    return [to_gps(ref, Point2D(x, y)) for x, y in points]
