"""Record the control-ui test fixture from a real simulator run.

Drives one mission end to end on a small parking lot: the three waypoint
"clicks" are converted exactly the way the console converts them
(pixel -> local -> GPS), POSTed through the real HTTP app, executed by the
real scenario runner on a shared bus, and every frame a WebSocket bridge
client would have received is captured verbatim (same codec, same seqs).
The HTTP exchanges for mission fetch-back and plate search are recorded
alongside, so the TypeScript tests replay genuine backend behavior without
a live simulator.

Run from frontend/:  python3 fixtures/record_fixture.py
"""
from __future__ import annotations

import base64
import json
import math
import sys
from pathlib import Path
from urllib.parse import quote

import numpy as np
from fastapi.testclient import TestClient

from haris.api import create_app
from haris.backend import PlateStore, canonical_plate
from haris.bus import MessageBus, encode_envelope
from haris.geo import to_gps
from haris.geometry import (
    FREE_PROB_THRESHOLD,
    OCCUPIED_PROB_THRESHOLD,
    PGM_FREE,
    PGM_OCCUPIED,
    PGM_UNKNOWN,
    Point2D,
)
from haris.mission import Mission
from haris.runner import ScenarioConfig, ScenarioRunner
from haris.worldgen import generate_lot

OUT_PATH = Path(__file__).parent / "stream.json"

SEED = 33
LOT_ROWS, LOT_COLS = 1, 3
SPEED = 0.5
DT = 0.05
DURATION = 180.0
TOLERANCE = 0.5

# Console viewport the clicks are made in (must match the test's MapView).
VIEW = {"widthPx": 800, "heightPx": 600, "pxPerMeter": 20,
        "center": {"x": 6.5, "y": 7.25}}
CLICKS_PX = [[300, 254], [500, 254], [330, 215]]

# Topics the console subscribes to, in the same order it subscribes.
TOPICS = [
    "robot/pose", "robot/gps", "mission/state", "mission/command",
    "plan/path", "alpr/sighting", "geo/resync", "map/snapshot", "map/update",
]

SNAPSHOT_TICKS = 200          # first full raster 10 s in
UPDATE_TICKS = 200            # then a patch (or re-snapshot) every 10 s
UPDATE_CELL_CAP = 2500        # beyond this a fresh snapshot is smaller


def pixel_to_local(view: dict, px: float, py: float) -> tuple[float, float]:
    """Same viewport math as the console's pixelToLocal."""
    x = view["center"]["x"] + (px - view["widthPx"] / 2) / view["pxPerMeter"]
    y = view["center"]["y"] - (py - view["heightPx"] / 2) / view["pxPerMeter"]
    return x, y


def occ8_image(grid) -> np.ndarray:
    """Trinary occupancy bytes, same codes and thresholds as the PGM artifact."""
    p = grid.occupancy_probabilities()
    img = np.full(p.shape, PGM_UNKNOWN, dtype=np.uint8)
    img[p > OCCUPIED_PROB_THRESHOLD] = PGM_OCCUPIED
    img[p < FREE_PROB_THRESHOLD] = PGM_FREE
    return img


def snapshot_payload(grid, img: np.ndarray) -> dict:
    return {
        "resolution": grid.resolution,
        "width": grid.width,
        "height": grid.height,
        "origin": {"x": grid.origin.x, "y": grid.origin.y},
        "encoding": "occ8",
        "data": base64.b64encode(img.tobytes()).decode("ascii"),
    }


def main() -> None:
    world = generate_lot(LOT_ROWS, LOT_COLS, seed=SEED)
    ref = world.geo_reference()
    store = PlateStore(ref)
    bus = MessageBus()
    app = create_app(store, bus)
    client = TestClient(app)

    taps = [bus.subscribe(t) for t in TOPICS]
    frames: list[str] = []

    def drain() -> None:
        for tap in taps:
            for env in tap.pop_all():
                frames.append(encode_envelope(env))

    state_initial = client.get("/api/robot/state").json()

    # -- author the mission exactly like the console does -------------------
    wps_local = [pixel_to_local(VIEW, px, py) for px, py in CLICKS_PX]
    wps_geo = [to_gps(ref, Point2D(x, y)) for x, y in wps_local]
    post_body = {
        "waypoints": [{"lat": g.lat, "lon": g.lon} for g in wps_geo],
        "tolerance": TOLERANCE,
    }
    post_resp = client.post("/api/missions", json=post_body)
    assert post_resp.status_code == 202, post_resp.text
    mission_id = post_resp.json()["mission_id"]
    missions_after_post = client.get("/api/missions").json()
    mission_by_id = client.get(f"/api/missions/{mission_id}").json()

    # -- execute it on the shared bus ----------------------------------------
    mission = Mission(id=str(mission_id), waypoints=tuple(wps_geo),
                      arrival_tolerance=TOLERANCE)
    cfg = ScenarioConfig(seed=SEED, duration=DURATION, dt=DT, mode="fused",
                         speed=SPEED, dock=True)
    runner = ScenarioRunner(world, cfg, mission, bus=bus, store=store)
    drain()                                   # mission/command envelope

    last_img: np.ndarray | None = None
    ticks = int(round(DURATION / DT))
    for tick in range(1, ticks + 1):
        runner.step()
        now_ms = int(tick * DT * 1000)
        if tick % SNAPSHOT_TICKS == 0 and last_img is None:
            last_img = occ8_image(runner.grid)
            bus.publish("map/snapshot", snapshot_payload(runner.grid, last_img),
                        timestamp=now_ms)
        elif last_img is not None and tick % UPDATE_TICKS == 0:
            img = occ8_image(runner.grid)
            changed = np.argwhere(img != last_img)
            if len(changed) > UPDATE_CELL_CAP:
                bus.publish("map/snapshot", snapshot_payload(runner.grid, img),
                            timestamp=now_ms)
            elif len(changed) > 0:
                cells = [[int(c), int(r), int(img[r, c])] for r, c in changed]
                bus.publish("map/update", {"cells": cells}, timestamp=now_ms)
            last_img = img
        drain()
        if runner.executor.state.phase.name in ("completed", "aborted"):
            break

    phase = runner.executor.state.phase.name
    assert phase == "completed", f"fixture run ended {phase!r}"
    final_img = occ8_image(runner.grid)
    bus.publish("map/snapshot", snapshot_payload(runner.grid, final_img),
                timestamp=int((tick + 1) * DT * 1000))
    drain()

    state_final = client.get("/api/robot/state").json()

    # -- plate search exchanges ----------------------------------------------
    records = store.records()
    assert records, "run produced no plate records"
    hit = max(records, key=lambda r: r.sighting_count)
    spaced = f" {hit.plate[:2]} {hit.plate[2:]} "      # stray-spaces query form
    assert canonical_plate(spaced) == hit.plate
    hit_resp = client.get(f"/api/cars/{hit.plate}")
    hit_resp_raw = client.get(f"/api/cars/{quote(spaced, safe='')}")
    assert hit_resp.status_code == 200 and hit_resp_raw.status_code == 200
    assert hit_resp.json() == hit_resp_raw.json()

    known = {r.plate for r in records}
    miss_plate = next(str(n) for n in range(100000, 1000000)
                      if str(n) not in known)
    miss_resp = client.get(f"/api/cars/{miss_plate}")
    assert miss_resp.status_code == 404

    # -- recorder self-checks -------------------------------------------------
    mission_phases = [json.loads(f)["payload"]["phase"] for f in frames
                      if json.loads(f)["topic"] == "mission/state"]
    assert "navigating" in mission_phases and "completed" in mission_phases, \
        mission_phases
    fetched = missions_after_post[0]["waypoints"]
    for drawn, got in zip(wps_geo, fetched):
        assert abs(drawn.lat - got["lat"]) < 1e-6
        assert abs(drawn.lon - got["lon"]) < 1e-6
    n_snapshots = sum(1 for f in frames
                      if json.loads(f)["topic"] == "map/snapshot")
    n_sightings = sum(1 for f in frames
                      if json.loads(f)["topic"] == "alpr/sighting")
    assert n_snapshots >= 2 and n_sightings >= 10

    fixture = {
        "generated_by": f"fixtures/record_fixture.py seed={SEED}",
        "view": VIEW,
        "clicks_px": CLICKS_PX,
        "tolerance": TOLERANCE,
        "backend": {
            "robot_state_initial": state_initial,
            "robot_state_final": state_final,
            "mission_post": {"request": post_body, "status": 202,
                             "response": post_resp.json()},
            "missions_after_post": missions_after_post,
            "mission_get_by_id": mission_by_id,
            "car_hit": {
                "query_spaced": spaced,
                "plate_canonical": hit.plate,
                "status": 200,
                "response": hit_resp.json(),
                "response_spaced_query": hit_resp_raw.json(),
            },
            "car_miss": {
                "query": miss_plate,
                "status": 404,
                "response": miss_resp.json(),
            },
        },
        "frames": frames,
    }
    OUT_PATH.write_text(json.dumps(fixture, separators=(",", ":"),
                                   sort_keys=True) + "\n", encoding="utf-8")
    size_kb = OUT_PATH.stat().st_size / 1024
    print(f"wrote {OUT_PATH} ({size_kb:.0f} KiB, {len(frames)} frames, "
          f"{len(records)} plates, final phase {phase})")


if __name__ == "__main__":
    sys.exit(main())
