"""HTTP + WebSocket service: car finder, mission intake, live stream.

The app is a thin shell over a PlateStore and a MessageBus. Robot state is
whatever was last seen on the "robot/pose" and "mission/state" topics; the
WebSocket endpoint bridges raw bus envelopes to JSON frames.
"""
from __future__ import annotations

import asyncio
import itertools
import json

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .backend import PlateLocationRecord, PlateStore
from .bus import (
    InvalidTopicError,
    MessageBus,
    Subscription,
    decode_client_frame,
    encode_envelope,
)

STATE_CACHE_DEPTH = 64


def record_to_dict(rec: PlateLocationRecord) -> dict:
    return {
        "plate": rec.plate,
        "position": {"lat": rec.position.lat, "lon": rec.position.lon},
        "local_pose": {"x": rec.local_pose.x, "y": rec.local_pose.y},
        "last_seen": rec.last_seen,
        "confidence": rec.confidence,
        "sighting_count": rec.sighting_count,
    }


def _bad_request(detail: str) -> JSONResponse:
    return JSONResponse({"detail": detail}, status_code=400)


def _parse_mission_body(body) -> tuple[list[dict], float] | str:
    """Returns (waypoints, tolerance) or an error string."""
    if not isinstance(body, dict):
        return "body must be a JSON object"
    waypoints = body.get("waypoints")
    if not isinstance(waypoints, list) or not waypoints:
        return "waypoints must be a non-empty list"
    parsed = []
    for i, wp in enumerate(waypoints):
        if (not isinstance(wp, dict)
                or not isinstance(wp.get("lat"), (int, float))
                or not isinstance(wp.get("lon"), (int, float))):
            return f"waypoint {i} needs numeric lat and lon"
        parsed.append({"lat": float(wp["lat"]), "lon": float(wp["lon"])})
    tolerance = body.get("tolerance", 0.3)
    if not isinstance(tolerance, (int, float)) or tolerance <= 0:
        return "tolerance must be a positive number"
    return parsed, float(tolerance)


def create_app(store: PlateStore, bus: MessageBus) -> FastAPI:
    app = FastAPI(title="haris backend")
    pose_sub = bus.subscribe("robot/pose", capacity=STATE_CACHE_DEPTH)
    mission_sub = bus.subscribe("mission/state", capacity=STATE_CACHE_DEPTH)
    latest = {"pose": None, "mission": {"phase": "idle"}}
    missions: dict[int, dict] = {}
    mission_ids = itertools.count(1)

    def _refresh():
        for sub, key in ((pose_sub, "pose"), (mission_sub, "mission")):
            for env in sub.pop_all():
                latest[key] = env.payload

    @app.get("/api/cars")
    def all_cars():
        return [record_to_dict(r) for r in store.records()]

    @app.get("/api/cars/{plate}")
    def car_by_plate(plate: str):
        rec = store.lookup(plate)
        if rec is None:
            return JSONResponse({"detail": f"plate {plate!r} not found"},
                                status_code=404)
        return record_to_dict(rec)

    @app.post("/api/missions")
    async def post_mission(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _bad_request("body is not valid JSON")
        parsed = _parse_mission_body(body)
        if isinstance(parsed, str):
            return _bad_request(parsed)
        waypoints, tolerance = parsed
        mission_id = next(mission_ids)
        command = {"mission_id": mission_id, "waypoints": waypoints,
                   "tolerance": tolerance}
        missions[mission_id] = command
        bus.publish("mission/command", command)
        return JSONResponse({"mission_id": mission_id}, status_code=202)

    @app.get("/api/missions")
    def all_missions():
        return list(missions.values())

    @app.get("/api/missions/{mission_id}")
    def mission_by_id(mission_id: int):
        if mission_id not in missions:
            return JSONResponse({"detail": f"mission {mission_id} not found"},
                                status_code=404)
        return missions[mission_id]

    @app.get("/api/robot/state")
    def robot_state():
        _refresh()
        ref = store.reference
        return {
            "pose": latest["pose"],
            "mission": latest["mission"],
            "geo_reference": {"lat": ref.origin.lat, "lon": ref.origin.lon,
                              "heading_offset": ref.heading_offset},
        }

    @app.websocket("/api/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        subs: list[Subscription] = []
        recv = asyncio.ensure_future(ws.receive_text())
        try:
            while True:
                done, _ = await asyncio.wait({recv}, timeout=0.01)
                if recv in done:
                    try:
                        frame = recv.result()
                    except (WebSocketDisconnect, RuntimeError):
                        break
                    await _handle_client_frame(ws, bus, subs, frame)
                    recv = asyncio.ensure_future(ws.receive_text())
                for sub in subs:
                    for env in sub.pop_all():
                        await ws.send_text(encode_envelope(env))
        finally:
            recv.cancel()
            for sub in subs:
                bus.unsubscribe(sub)

    return app


async def _handle_client_frame(ws: WebSocket, bus: MessageBus,
                               subs: list[Subscription], frame: str) -> None:
    try:
        verb, arg = decode_client_frame(frame)
        if verb == "subscribe":
            subs.append(bus.subscribe(arg))
        else:
            topic, payload = arg
            bus.publish(topic, payload)
    except (ValueError, InvalidTopicError) as e:
        await ws.send_text(json.dumps({"error": str(e)}))
