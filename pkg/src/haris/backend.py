"""Plate→location record store backing the car-finder service.

Keeps the newest known position per plate (last-write-wins on sighting
timestamp, so bus delivery order does not matter) and journals accepted
sightings as JSON lines so a restart reproduces the exact store state.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

from .alpr import Sighting
from .geo import GeoPoint, GeoReference, to_local
from .geometry import Point2D, Pose2D

log = logging.getLogger("haris.backend")


def canonical_plate(plate: str) -> str:
    canon = "".join(plate.split()).upper()
    if not canon:
        raise ValueError("empty plate string")
    return canon


@dataclass(frozen=True)
class PlateLocationRecord:
    plate: str
    position: GeoPoint
    local_pose: Point2D
    last_seen: int           # milliseconds
    confidence: float
    sighting_count: int


def _freshness(s: Sighting) -> tuple:
    # Deterministic total order so equal-timestamp sightings still yield a
    # permutation-independent winner.
    return (s.timestamp, s.confidence,
            s.car_position.lat, s.car_position.lon)


def sighting_to_dict(s: Sighting) -> dict:
    return {
        "plate_read": s.plate_read,
        "true_plate": s.true_plate,
        "confidence": s.confidence,
        "robot_pose": {"x": s.robot_pose.x, "y": s.robot_pose.y,
                       "theta": s.robot_pose.theta},
        "car_position": {"lat": s.car_position.lat,
                         "lon": s.car_position.lon},
        "timestamp": s.timestamp,
    }


def sighting_from_dict(d: dict) -> Sighting:
    return Sighting(
        plate_read=d["plate_read"],
        true_plate=d["true_plate"],
        confidence=float(d["confidence"]),
        robot_pose=Pose2D(d["robot_pose"]["x"], d["robot_pose"]["y"],
                          d["robot_pose"]["theta"]),
        car_position=GeoPoint(d["car_position"]["lat"],
                              d["car_position"]["lon"]),
        timestamp=int(d["timestamp"]),
    )


class PlateStore:
    """In-memory plate records plus an optional append-only journal."""

    def __init__(self, reference: GeoReference,
                 journal_path: str | Path | None = None):
        self.reference = reference
        self._records: dict[str, PlateLocationRecord] = {}
        self._best: dict[str, tuple] = {}
        self._journal_path = Path(journal_path) if journal_path else None

    def __len__(self) -> int:
        return len(self._records)

    def upsert_sighting(self, s: Sighting) -> PlateLocationRecord:
        if not 0.0 <= s.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")
        plate = canonical_plate(s.plate_read)
        self._journal(s)
        return self._apply(plate, s)

    def _apply(self, plate: str, s: Sighting) -> PlateLocationRecord:
        freshness = _freshness(s)
        rec = self._records.get(plate)
        if rec is None:
            rec = PlateLocationRecord(
                plate=plate,
                position=s.car_position,
                local_pose=to_local(self.reference, s.car_position),
                last_seen=s.timestamp,
                confidence=s.confidence,
                sighting_count=1,
            )
            self._best[plate] = freshness
        elif freshness >= self._best[plate]:
            rec = replace(
                rec,
                position=s.car_position,
                local_pose=to_local(self.reference, s.car_position),
                last_seen=s.timestamp,
                confidence=s.confidence,
                sighting_count=rec.sighting_count + 1,
            )
            self._best[plate] = freshness
        else:                   # stale: counted, nothing else changes
            rec = replace(rec, sighting_count=rec.sighting_count + 1)
        self._records[plate] = rec
        return rec

    def lookup(self, plate: str) -> PlateLocationRecord | None:
        try:
            return self._records.get(canonical_plate(plate))
        except ValueError:
            return None

    def records(self) -> list[PlateLocationRecord]:
        return sorted(self._records.values(), key=lambda r: r.plate)

    # -- journal ------------------------------------------------------------

    def _journal(self, s: Sighting) -> None:
        if self._journal_path is None:
            return
        with self._journal_path.open("a", encoding="utf-8") as f:
            f.write(json.dumps(sighting_to_dict(s),
                               separators=(",", ":"), sort_keys=True) + "\n")

    @classmethod
    def restore(cls, reference: GeoReference,
                journal_path: str | Path) -> "PlateStore":
        """Replay a journal; a torn trailing line is skipped with a warning."""
        store = cls(reference, journal_path=None)
        path = Path(journal_path)
        if path.exists():
            raw = path.read_bytes()
            complete = raw.rfind(b"\n") + 1     # bytes of terminated lines
            text = raw[:complete].decode("utf-8", errors="replace")
            for lineno, line in enumerate(text.splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    s = sighting_from_dict(json.loads(line))
                    store._apply(canonical_plate(s.plate_read), s)
                except (ValueError, KeyError, TypeError) as e:
                    log.warning("journal %s line %d unreadable, skipped: %s",
                                path, lineno, e)
            if complete < len(raw):
                log.warning("journal %s: torn trailing line dropped", path)
                with path.open("r+b") as f:
                    f.truncate(complete)
        store._journal_path = path
        return store
