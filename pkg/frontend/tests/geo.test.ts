/**
 * Coordinate plumbing: the local-tangent transform must agree with the
 * robot's own implementation to well under the 1e-6-degree mission
 * tolerance, and click conversion must invert exactly.
 */
import { describe, expect, it } from "vitest";

import {
  isValidHeading,
  isValidLatitude,
  isValidLongitude,
  localToPixel,
  pixelToLocal,
  toGps,
  toLocal,
  type MapView,
} from "../src/geo.js";
import { canonicalPlate } from "../src/protocol.js";
import { fixture } from "./fixture.js";

const ref = fixture.backend.robot_state_initial.geo_reference;
if (ref === null) throw new Error("fixture missing geo reference");

const view: MapView = fixture.view;

describe("geo transform", () => {
  it("toGps/toLocal round-trips local points to sub-micro-degree error", () => {
    const pts = [
      { x: 0, y: 0 },
      { x: 6.5, y: 7.25 },
      { x: 12.3, y: 0.4 },
      { x: -2.0, y: 14.5 },
    ];
    for (const p of pts) {
      const gps = toGps(ref, p);
      const back = toLocal(ref, gps);
      expect(Math.abs(back.x - p.x)).toBeLessThan(1e-9);
      expect(Math.abs(back.y - p.y)).toBeLessThan(1e-9);
    }
  });

  it("agrees with the recorded backend conversion of the clicked points", () => {
    // the recorded POST body was produced by the robot-side transform from
    // the very same local points the clicks map to
    const recordedWps = fixture.backend.mission_post.request.waypoints;
    for (let i = 0; i < fixture.clicks_px.length; i += 1) {
      const [px, py] = fixture.clicks_px[i];
      const local = pixelToLocal(view, px, py);
      const gps = toGps(ref, local);
      expect(Math.abs(gps.lat - recordedWps[i].lat)).toBeLessThan(1e-9);
      expect(Math.abs(gps.lon - recordedWps[i].lon)).toBeLessThan(1e-9);
    }
  });

  it("heading offset rotates the frame consistently", () => {
    const rotated = { ...ref, heading_offset: Math.PI / 4 };
    const gps = toGps(rotated, { x: 3.0, y: 4.0 });
    const back = toLocal(rotated, gps);
    expect(Math.abs(back.x - 3.0)).toBeLessThan(1e-9);
    expect(Math.abs(back.y - 4.0)).toBeLessThan(1e-9);
  });
});

describe("pixel mapping", () => {
  it("pixelToLocal and localToPixel are exact inverses on the click grid", () => {
    for (const [px, py] of fixture.clicks_px) {
      const local = pixelToLocal(view, px, py);
      const pixel = localToPixel(view, local);
      expect(pixel.px).toBe(px);
      expect(pixel.py).toBe(py);
    }
  });

  it("maps the canvas centre onto the view centre", () => {
    const centre = pixelToLocal(view, view.widthPx / 2, view.heightPx / 2);
    expect(centre.x).toBe(view.center.x);
    expect(centre.y).toBe(view.center.y);
  });

  it("screen y grows downward while map y grows upward", () => {
    const above = pixelToLocal(view, 400, 100);
    const below = pixelToLocal(view, 400, 500);
    expect(above.y).toBeGreaterThan(below.y);
  });
});

describe("input validation", () => {
  it("rejects out-of-range coordinates before any request is made", () => {
    expect(isValidLatitude(95)).toBe(false);
    expect(isValidLatitude(-90.0001)).toBe(false);
    expect(isValidLatitude(90)).toBe(true);
    expect(isValidLatitude(-90)).toBe(true);
    expect(isValidLatitude(Number.NaN)).toBe(false);
    expect(isValidLongitude(180.5)).toBe(false);
    expect(isValidLongitude(-180)).toBe(false);
    expect(isValidLongitude(180)).toBe(true);
    expect(isValidLongitude(51)).toBe(true);
    expect(isValidHeading(Number.POSITIVE_INFINITY)).toBe(false);
    expect(isValidHeading(0)).toBe(true);
  });
});

describe("plate canonicalization", () => {
  it("matches the backend rule: strip whitespace, uppercase", () => {
    expect(canonicalPlate(" 78 5326 ")).toBe("785326");
    expect(canonicalPlate("ab 12 cd")).toBe("AB12CD");
    expect(canonicalPlate("\t 9 8 ")).toBe("98");
    expect(canonicalPlate("785326")).toBe("785326");
  });
});
