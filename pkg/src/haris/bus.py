"""In-process publish-subscribe bus with MQTT-flavored topics.

Carries every inter-module stream (poses, scans, mission state, sightings).
Delivery never blocks a publisher: each subscription owns a bounded FIFO
that drops its oldest entry on overflow and counts the drops. A
line-delimited JSON codec at the bottom backs the WebSocket bridge.
"""
from __future__ import annotations

import json
import re
import threading
import time
import uuid
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable

TOPIC_RE = re.compile(r"^[a-z0-9_/]+$")
DEFAULT_CAPACITY = 256


class InvalidTopicError(ValueError):
    pass


class BusTimeoutError(TimeoutError):
    pass


_SEGMENT_RE = re.compile(r"^[a-z0-9_]+$")


def validate_topic(topic: str) -> None:
    if not isinstance(topic, str) or not TOPIC_RE.match(topic or ""):
        raise InvalidTopicError(f"invalid topic {topic!r}")
    if not all(_SEGMENT_RE.match(seg) for seg in topic.split("/")):
        raise InvalidTopicError(f"invalid topic {topic!r}")


def validate_pattern(pattern: str) -> None:
    if not isinstance(pattern, str) or not pattern:
        raise InvalidTopicError(f"invalid pattern {pattern!r}")
    segments = pattern.split("/")
    if not all(seg == "+" or _SEGMENT_RE.match(seg) for seg in segments):
        raise InvalidTopicError(f"invalid pattern {pattern!r}")


def topic_matches(pattern: str, topic: str) -> bool:
    """Exact match with "+" standing for exactly one topic segment."""
    ps = pattern.split("/")
    ts = topic.split("/")
    return len(ps) == len(ts) and all(p in ("+", t) for p, t in zip(ps, ts))


@dataclass(frozen=True)
class Envelope:
    topic: str
    seq: int
    timestamp: int          # milliseconds
    payload: Any


@dataclass
class Subscription:
    pattern: str
    capacity: int = DEFAULT_CAPACITY
    queue: deque = field(default_factory=deque)
    received: int = 0       # matching publishes routed here
    dropped: int = 0        # evicted unread to make room

    @property
    def delivered(self) -> int:
        """Messages that reached (or still await) the consumer."""
        return self.received - self.dropped

    def _push(self, env: Envelope) -> None:
        if len(self.queue) >= self.capacity:
            self.queue.popleft()
            self.dropped += 1
        self.queue.append(env)
        self.received += 1

    def pop(self) -> Envelope | None:
        return self.queue.popleft() if self.queue else None

    def pop_all(self) -> list[Envelope]:
        out = list(self.queue)
        self.queue.clear()
        return out

    def __len__(self) -> int:
        return len(self.queue)


class MessageBus:
    """Topic fabric; safe to publish from any thread."""

    def __init__(self, clock: Callable[[], int] | None = None):
        self._clock = clock or (lambda: 0)
        self._seq: dict[str, int] = {}
        self._subs: list[Subscription] = []
        self._responders: dict[str, Callable[[Any], Any]] = {}
        self._lock = threading.Lock()

    def publish(self, topic: str, payload: Any,
                timestamp: int | None = None) -> int:
        validate_topic(topic)
        with self._lock:
            seq = self._seq.get(topic, 0) + 1
            self._seq[topic] = seq
            env = Envelope(topic, seq,
                           self._clock() if timestamp is None else timestamp,
                           payload)
            for sub in self._subs:
                if topic_matches(sub.pattern, topic):
                    sub._push(env)
            responder = self._responders.get(topic)
        if responder is not None and isinstance(payload, dict) \
                and "reply_to" in payload:
            reply = responder(payload.get("body"))
            self.publish(payload["reply_to"],
                         {"correlation_id": payload.get("correlation_id"),
                          "body": reply})
        return seq

    def subscribe(self, pattern: str,
                  capacity: int = DEFAULT_CAPACITY) -> Subscription:
        validate_pattern(pattern)
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        sub = Subscription(pattern, capacity)
        with self._lock:
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    def respond(self, service_topic: str,
                handler: Callable[[Any], Any]) -> None:
        """Register the (single) synchronous responder for a service topic."""
        validate_topic(service_topic)
        with self._lock:
            self._responders[service_topic] = handler

    def request(self, service_topic: str, payload: Any,
                timeout_ms: int = 1000) -> Any:
        corr = uuid.uuid4().hex
        reply_topic = f"{service_topic}/reply/{corr}"
        sub = self.subscribe(reply_topic, capacity=1)
        try:
            self.publish(service_topic, {"correlation_id": corr,
                                         "reply_to": reply_topic,
                                         "body": payload})
            deadline = time.monotonic() + timeout_ms / 1000.0
            while True:
                env = sub.pop()
                if env is not None:
                    if env.payload.get("correlation_id") != corr:
                        raise BusTimeoutError("correlation id mismatch")
                    return env.payload.get("body")
                if time.monotonic() >= deadline:
                    raise BusTimeoutError(
                        f"no reply on {service_topic} within {timeout_ms} ms")
                time.sleep(0.001)
        finally:
            self.unsubscribe(sub)

    def topics_seen(self) -> list[str]:
        with self._lock:
            return sorted(self._seq)

    def subscriptions(self) -> list[Subscription]:
        with self._lock:
            return list(self._subs)


# ---------------------------------------------------------------------------
# WebSocket bridge codec: one JSON object per frame

def encode_envelope(env: Envelope) -> str:
    return json.dumps({"topic": env.topic, "seq": env.seq,
                       "timestamp": env.timestamp, "payload": env.payload},
                      separators=(",", ":"), sort_keys=True)


def decode_client_frame(text: str) -> tuple[str, Any]:
    """Parse {subscribe: pattern} or {publish: {topic, payload}} frames."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(f"malformed frame: {e}") from e
    if not isinstance(obj, dict):
        raise ValueError("malformed frame: not an object")
    if "subscribe" in obj:
        pattern = obj["subscribe"]
        validate_pattern(pattern if isinstance(pattern, str) else "")
        return "subscribe", pattern
    if "publish" in obj:
        body = obj["publish"]
        if not isinstance(body, dict) or "topic" not in body:
            raise ValueError("malformed frame: publish needs topic")
        validate_topic(body["topic"])
        return "publish", (body["topic"], body.get("payload"))
    raise ValueError("malformed frame: unknown verb")
