"""Parametric plate-sighting model standing in for the camera + OCR stack.

A side-facing camera sees parked cars inside a range-limited field-of-view
wedge; detection succeeds with a distance- and light-dependent probability
and the read plate suffers independent per-character substitution noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geo import GeoPoint, to_gps
from .geometry import Pose2D, Point2D, compose, normalize_angle
from .mission import ModuleGates
from .sim import WorldModel, _as_rng

DIGITS = "0123456789"


@dataclass(frozen=True)
class CameraModel:
    """Side-mounted plate camera; probabilities are per-frame."""

    mount: Pose2D = field(default_factory=lambda: Pose2D(0.0, 0.0, -math.pi / 2))
    fov: float = 1.2
    max_range: float = 6.0
    p_detect: tuple = ((0.0, 0.98), (3.0, 0.90), (6.0, 0.45))
    ocr_char_error_rate: float = 0.02
    light_level: float = 1.0

    def __post_init__(self):
        if self.max_range <= 0:
            raise ValueError("max_range must be > 0")
        if not 0.0 < self.light_level <= 1.0:
            raise ValueError("light_level must be in (0, 1]")
        if not 0.0 <= self.ocr_char_error_rate <= 1.0:
            raise ValueError("ocr_char_error_rate must be in [0, 1]")
        ds = [d for d, _ in self.p_detect]
        ps = [p for _, p in self.p_detect]
        if ds != sorted(ds):
            raise ValueError("p_detect knots must be sorted by distance")
        if any(not 0.0 <= p <= 1.0 for p in ps):
            raise ValueError("p_detect probabilities must be in [0, 1]")

    def detection_probability(self, distance: float) -> float:
        ds = np.array([d for d, _ in self.p_detect])
        ps = np.array([p for _, p in self.p_detect])
        return float(np.interp(distance, ds, ps)) * self.light_level


@dataclass(frozen=True)
class Sighting:
    plate_read: str
    true_plate: str
    confidence: float
    robot_pose: Pose2D
    car_position: GeoPoint
    timestamp: int = 0       # milliseconds

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")


def _read_plate(plate: str, error_rate: float, rng) -> str:
    """Substitution noise: each digit flips to one of the nine others."""
    if error_rate <= 0.0:
        return plate
    chars = list(plate)
    flips = rng.uniform(size=len(chars)) < error_rate
    for i in np.flatnonzero(flips):
        if chars[i] in DIGITS:
            others = DIGITS.replace(chars[i], "")
            chars[i] = others[int(rng.integers(len(others)))]
    return "".join(chars)


def observe(world: WorldModel, pose: Pose2D, cam: CameraModel,
            gates: ModuleGates, rng, now_ms: int = 0) -> list[Sighting]:
    """All plate sightings for one frame; empty while the camera is gated off.

    Detection coin flips are drawn for every candidate before any OCR noise,
    so under a fixed seed raising light_level only ever adds sightings.
    """
    if not gates.alpr_active:
        return []
    rng = _as_rng(rng)
    cam_pose = compose(pose, cam.mount)

    candidates = []
    for car in world.parked_cars:
        dx = car.pose.x - cam_pose.x
        dy = car.pose.y - cam_pose.y
        d = math.hypot(dx, dy)
        if d > cam.max_range:
            continue
        bearing = normalize_angle(math.atan2(dy, dx) - cam_pose.theta)
        if abs(bearing) > cam.fov / 2.0:
            continue
        candidates.append((car, cam.detection_probability(d)))

    if not candidates:
        return []
    coins = rng.uniform(size=len(candidates))
    ref = world.geo_reference()
    sightings = []
    for (car, p), coin in zip(candidates, coins):
        if coin >= p:
            continue
        sightings.append(Sighting(
            plate_read=_read_plate(car.plate, cam.ocr_char_error_rate, rng),
            true_plate=car.plate,
            confidence=p,
            robot_pose=pose,
            car_position=to_gps(ref, Point2D(car.pose.x, car.pose.y)),
            timestamp=now_ms))
    return sightings
