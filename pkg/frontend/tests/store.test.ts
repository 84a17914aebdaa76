/**
 * ViewStore stream-handling rules: monotone per-topic sequence numbers,
 * stale-frame discard, gap signalling with raster invalidation, and
 * bounded trail / sighting buffers.
 */
import { describe, expect, it } from "vitest";

import type { EnvelopeMsg } from "../src/protocol.js";
import { badgeFromPhase, BadgePhase, FEED_LENGTH, TRAIL_LENGTH, ViewStore } from "../src/store.js";
import { fixture, fixtureEnvelopes } from "./fixture.js";

function poseEnv(seq: number, t: number, x: number, y: number): EnvelopeMsg {
  return {
    topic: "robot/pose",
    seq,
    timestamp: t,
    payload: { t, x, y, theta: 0 },
  };
}

describe("ViewStore", () => {
  it("drops stale frames (seq not above the last seen)", () => {
    const store = new ViewStore();
    expect(store.apply(poseEnv(5, 100, 1, 1))).toBe(true);
    expect(store.apply(poseEnv(5, 150, 2, 2))).toBe(false); // duplicate seq
    expect(store.apply(poseEnv(3, 200, 3, 3))).toBe(false); // older seq
    expect(store.droppedStaleFrames).toBe(2);
    // pose still reflects the first, non-stale frame
    expect(store.state.pose?.x).toBe(1);
    expect(store.state.pose?.t).toBe(100);
  });

  it("signals gaps and invalidates the raster on a map/update gap", () => {
    const envs = fixtureEnvelopes();
    const store = new ViewStore();
    const snapshot = envs.find((e) => e.topic === "map/snapshot");
    const update = envs.find((e) => e.topic === "map/update");
    expect(snapshot).toBeDefined();
    expect(update).toBeDefined();
    if (!snapshot || !update) return;

    const gaps: string[] = [];
    store.onGap = (topic) => gaps.push(topic);

    store.apply(snapshot);
    expect(store.state.raster).not.toBeNull();

    store.apply(update); // first frame on a topic is never a gap
    expect(gaps).toEqual([]);

    const skipped: EnvelopeMsg = { ...update, seq: update.seq + 7 };
    store.apply(skipped);
    expect(gaps).toEqual(["map/update"]);
    expect(store.state.raster).toBeNull(); // stale raster discarded
  });

  it("keeps the pose trail bounded for the green overlay", () => {
    const store = new ViewStore();
    for (let i = 1; i <= TRAIL_LENGTH + 25; i += 1) {
      store.apply(poseEnv(i, i * 50, i * 0.1, 0));
    }
    expect(store.state.trail.length).toBe(TRAIL_LENGTH);
    // oldest entries were evicted, newest kept
    expect(store.state.trail[store.state.trail.length - 1].x).toBeCloseTo((TRAIL_LENGTH + 25) * 0.1, 9);
  });

  it("keeps the sighting feed bounded", () => {
    const store = new ViewStore();
    for (let i = 1; i <= FEED_LENGTH + 10; i += 1) {
      store.apply({
        topic: "alpr/sighting",
        seq: i,
        timestamp: i,
        payload: {
          plate_read: String(100000 + i),
          true_plate: String(100000 + i),
          confidence: 0.9,
          robot_pose: { x: 0, y: 0, theta: 0 },
          car_position: { lat: 25.0, lon: 51.0 },
          timestamp: i,
        },
      });
    }
    expect(store.state.sightings.length).toBe(FEED_LENGTH);
    expect(store.state.sightings[0].plate_read).toBe(String(100000 + FEED_LENGTH + 10));
  });

  it("geo/resync replaces the reference used for click conversion", () => {
    const envs = fixtureEnvelopes();
    const store = new ViewStore();
    store.applyRobotState(fixture.backend.robot_state_initial);
    const before = store.state.reference;
    expect(before).not.toBeNull();
    const resync = envs.find((e) => e.topic === "geo/resync");
    expect(resync).toBeDefined();
    if (!resync) return;
    store.apply(resync);
    const after = store.state.reference;
    expect(after).not.toBeNull();
    expect(after).not.toBe(before); // new object installed
    const payload = resync.payload as { lat: number; lon: number; heading_offset: number };
    expect(after?.lat).toBe(payload.lat);
    expect(after?.lon).toBe(payload.lon);
    expect(after?.heading_offset).toBe(payload.heading_offset);
  });

  it("maps executor phase names onto badge labels", () => {
    expect(badgeFromPhase("idle")).toBe(BadgePhase.Idle);
    expect(badgeFromPhase("navigating")).toBe(BadgePhase.Navigating);
    expect(badgeFromPhase("docking")).toBe(BadgePhase.Docking);
    expect(badgeFromPhase("completed")).toBe(BadgePhase.Completed);
    expect(badgeFromPhase("aborted")).toBe(BadgePhase.Aborted);
  });
});
