/**
 * Overlay and panel rendering rules, checked through a recording 2D-context
 * stub: the global plan is always red, the local motion trail always green,
 * and panel templates escape user-visible text.
 */
import { describe, expect, it } from "vitest";

import { localToPixel, type MapView } from "../src/geo.js";
import {
  badgeHtml,
  bannerHtml,
  drawOverlay,
  escapeHtml,
  GLOBAL_PATH_COLOR,
  HIGHLIGHT_COLOR,
  LOCAL_PATH_COLOR,
  ROBOT_COLOR,
  sightingsHtml,
  waypointListHtml,
  WAYPOINT_COLOR,
  type OverlayCtx,
} from "../src/render.js";
import { BadgePhase, ViewStore } from "../src/store.js";
import { fixture, fixtureEnvelopes } from "./fixture.js";

interface StrokeOp {
  style: string;
  width: number;
  points: { x: number; y: number }[];
  arcs: { x: number; y: number; r: number }[];
}

interface FillOp {
  style: string;
  arcs: { x: number; y: number; r: number }[];
}

class RecordingCtx implements OverlayCtx {
  strokeStyle: string | CanvasGradient | CanvasPattern = "";
  fillStyle: string | CanvasGradient | CanvasPattern = "";
  lineWidth = 1;
  strokes: StrokeOp[] = [];
  fills: FillOp[] = [];
  private path: { x: number; y: number }[] = [];
  private arcs: { x: number; y: number; r: number }[] = [];

  beginPath(): void {
    this.path = [];
    this.arcs = [];
  }
  moveTo(x: number, y: number): void {
    this.path.push({ x, y });
  }
  lineTo(x: number, y: number): void {
    this.path.push({ x, y });
  }
  arc(x: number, y: number, r: number): void {
    this.arcs.push({ x, y, r });
  }
  stroke(): void {
    this.strokes.push({
      style: String(this.strokeStyle),
      width: this.lineWidth,
      points: [...this.path],
      arcs: [...this.arcs],
    });
  }
  fill(): void {
    this.fills.push({ style: String(this.fillStyle), arcs: [...this.arcs] });
  }
  closePath(): void {}
}

function replayedStore(): ViewStore {
  const store = new ViewStore();
  store.applyRobotState(fixture.backend.robot_state_initial);
  for (const env of fixtureEnvelopes()) store.apply(env);
  return store;
}

const view: MapView = fixture.view;

describe("drawOverlay", () => {
  it("keeps the colour legend: red global path, green local trail", () => {
    const store = replayedStore();
    expect(store.state.plan.length).toBeGreaterThan(1);
    expect(store.state.trail.length).toBeGreaterThan(1);

    const ctx = new RecordingCtx();
    drawOverlay(ctx, view, store.state, [], null);

    const redStrokes = ctx.strokes.filter((s) => s.style === GLOBAL_PATH_COLOR);
    const greenStrokes = ctx.strokes.filter((s) => s.style === LOCAL_PATH_COLOR);
    expect(redStrokes.length).toBe(1);
    expect(greenStrokes.length).toBe(1);

    // the red polyline is exactly the published plan in pixel space
    const expected = store.state.plan.map(([x, y]) => localToPixel(view, { x, y }));
    expect(redStrokes[0].points).toEqual(expected.map((p) => ({ x: p.px, y: p.py })));

    // the green polyline is the recent pose trail
    expect(greenStrokes[0].points.length).toBe(store.state.trail.length);

    // nothing else borrows the legend colours
    expect(ctx.fills.some((f) => f.style === GLOBAL_PATH_COLOR)).toBe(false);
    expect(ctx.fills.some((f) => f.style === LOCAL_PATH_COLOR)).toBe(false);
  });

  it("draws pending waypoints, the robot marker, and the car highlight", () => {
    const store = replayedStore();
    const pending = [{ x: 1.5, y: 9.55 }];
    const car = fixture.backend.car_hit.response;

    const ctx = new RecordingCtx();
    drawOverlay(ctx, view, store.state, pending, car);

    const wpFill = ctx.fills.find((f) => f.style === WAYPOINT_COLOR);
    expect(wpFill).toBeDefined();
    const wpPx = localToPixel(view, pending[0]);
    expect(wpFill?.arcs[0].x).toBeCloseTo(wpPx.px, 9);
    expect(wpFill?.arcs[0].y).toBeCloseTo(wpPx.py, 9);

    const highlight = ctx.strokes.find((s) => s.style === HIGHLIGHT_COLOR);
    expect(highlight).toBeDefined();
    const carPx = localToPixel(view, car.local_pose);
    expect(highlight?.arcs[0].x).toBeCloseTo(carPx.px, 9);
    expect(highlight?.arcs[0].y).toBeCloseTo(carPx.py, 9);

    expect(ctx.fills.some((f) => f.style === ROBOT_COLOR)).toBe(true);
  });

  it("draws no path strokes before any data arrives", () => {
    const store = new ViewStore();
    const ctx = new RecordingCtx();
    drawOverlay(ctx, view, store.state, [], null);
    expect(ctx.strokes.filter((s) => s.style === GLOBAL_PATH_COLOR)).toEqual([]);
    expect(ctx.strokes.filter((s) => s.style === LOCAL_PATH_COLOR)).toEqual([]);
  });
});

describe("panel templates", () => {
  it("renders the phase badge with its css class and waypoint index", () => {
    const store = replayedStore();
    expect(store.state.badge).toBe(BadgePhase.Completed);
    expect(badgeHtml(store.state)).toContain("badge-done");
    expect(badgeHtml(store.state)).toContain("Completed");

    const navigating = {
      ...store.state,
      badge: BadgePhase.Navigating,
      waypointIndex: 1,
    };
    expect(badgeHtml(navigating)).toContain("badge-active");
    expect(badgeHtml(navigating)).toContain("wp 1");

    const aborted = {
      ...store.state,
      badge: BadgePhase.Aborted,
      abortReason: "no path to <goal>",
    };
    expect(badgeHtml(aborted)).toContain("badge-error");
    expect(badgeHtml(aborted)).toContain("&lt;goal&gt;");
  });

  it("renders banners only when a message is present, escaped", () => {
    expect(bannerHtml(null)).toBe("");
    const html = bannerHtml(`backend unreachable: <fetch failed> & retried "never"`);
    expect(html).toContain("banner");
    expect(html).toContain("&lt;fetch failed&gt;");
    expect(html).toContain("&amp;");
    expect(html).toContain("&quot;never&quot;");
  });

  it("renders the sighting feed from recorded sightings", () => {
    const store = replayedStore();
    expect(store.state.sightings.length).toBeGreaterThan(0);
    const html = sightingsHtml(store.state.sightings);
    expect(html).toContain(`<code>${store.state.sightings[0].plate_read}</code>`);
    expect(html).toContain("%");
    expect(sightingsHtml([])).toContain("no plates read yet");
  });

  it("lists pending waypoints to six decimals, in click order", () => {
    const wps = fixture.backend.mission_post.request.waypoints;
    const html = waypointListHtml(wps);
    const first = wps[0];
    expect(html).toContain(`1. ${first.lat.toFixed(6)}, ${first.lon.toFixed(6)}`);
    expect(html.indexOf("<li>1. ")).toBeGreaterThanOrEqual(0);
    expect(html.indexOf("<li>1. ")).toBeLessThan(html.indexOf("<li>2. "));
    expect(waypointListHtml([])).toContain("click the map");
  });

  it("escapes markup-significant characters", () => {
    expect(escapeHtml(`<b a="c">&x</b>`)).toBe("&lt;b a=&quot;c&quot;&gt;&amp;x&lt;/b&gt;");
  });
});
