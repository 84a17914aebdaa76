/**
 * Rendering helpers kept free of globals: vector overlays draw through a
 * minimal 2D-context interface and the side panel renders to HTML strings,
 * so every visual rule here is testable without a browser.
 */
import { localToPixel, type MapView } from "./geo.js";
import type { CarRecordMsg, SightingMsg } from "./protocol.js";
import type { ViewState } from "./store.js";
import { BadgePhase } from "./store.js";

// Fixed legend: the global plan is red, local motion is green.
export const GLOBAL_PATH_COLOR = "#d62728";
export const LOCAL_PATH_COLOR = "#2ca02c";
export const ROBOT_COLOR = "#1f77b4";
export const WAYPOINT_COLOR = "#ff7f0e";
export const HIGHLIGHT_COLOR = "#9467bd";

/** The slice of CanvasRenderingContext2D the overlay actually uses. */
export interface OverlayCtx {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  closePath(): void;
}

function strokePolyline(
  ctx: OverlayCtx,
  view: MapView,
  points: { x: number; y: number }[],
  color: string,
  width: number,
): void {
  if (points.length < 2) return;
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  const first = localToPixel(view, points[0]);
  ctx.moveTo(first.px, first.py);
  for (let i = 1; i < points.length; i++) {
    const p = localToPixel(view, points[i]);
    ctx.lineTo(p.px, p.py);
  }
  ctx.stroke();
}

function fillCircle(
  ctx: OverlayCtx,
  view: MapView,
  p: { x: number; y: number },
  radiusPx: number,
  color: string,
): void {
  const q = localToPixel(view, p);
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(q.px, q.py, radiusPx, 0, 2 * Math.PI);
  ctx.fill();
}

/**
 * Draw everything above the raster: red global path, green local trail,
 * robot pose marker, pending waypoints, and the car-finder highlight.
 */
export function drawOverlay(
  ctx: OverlayCtx,
  view: MapView,
  state: ViewState,
  pendingWaypoints: { x: number; y: number }[],
  highlight: CarRecordMsg | null,
): void {
  strokePolyline(
    ctx,
    view,
    state.plan.map(([x, y]) => ({ x, y })),
    GLOBAL_PATH_COLOR,
    2,
  );
  strokePolyline(ctx, view, state.trail, LOCAL_PATH_COLOR, 2);

  for (const wp of pendingWaypoints) {
    fillCircle(ctx, view, wp, 4, WAYPOINT_COLOR);
  }

  if (highlight !== null) {
    const q = localToPixel(view, highlight.local_pose);
    ctx.strokeStyle = HIGHLIGHT_COLOR;
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.arc(q.px, q.py, 14, 0, 2 * Math.PI);
    ctx.stroke();
  }

  if (state.pose !== null) {
    const { pose } = state;
    fillCircle(ctx, view, pose, 5, ROBOT_COLOR);
    // heading tick
    const tip = {
      x: pose.x + 0.6 * Math.cos(pose.theta),
      y: pose.y + 0.6 * Math.sin(pose.theta),
    };
    strokePolyline(ctx, view, [pose, tip], ROBOT_COLOR, 2);
  }
}

// ---------------------------------------------------------------------------
// Side-panel templates

const BADGE_CLASS: Record<BadgePhase, string> = {
  [BadgePhase.Idle]: "badge-idle",
  [BadgePhase.Navigating]: "badge-active",
  [BadgePhase.Docking]: "badge-active",
  [BadgePhase.Completed]: "badge-done",
  [BadgePhase.Aborted]: "badge-error",
};

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function badgeHtml(state: ViewState): string {
  const extra =
    state.badge === BadgePhase.Navigating && state.waypointIndex !== null
      ? ` &rarr; wp ${state.waypointIndex}`
      : state.badge === BadgePhase.Aborted && state.abortReason !== null
        ? `: ${escapeHtml(state.abortReason)}`
        : "";
  return `<span class="badge ${BADGE_CLASS[state.badge]}">${state.badge}${extra}</span>`;
}

export function bannerHtml(message: string | null): string {
  return message === null
    ? ""
    : `<div class="banner">${escapeHtml(message)}</div>`;
}

export function sightingsHtml(sightings: SightingMsg[]): string {
  if (sightings.length === 0) {
    return `<li class="empty">no plates read yet</li>`;
  }
  return sightings
    .map(
      (s) =>
        `<li><code>${escapeHtml(s.plate_read)}</code>` +
        ` ${(100 * s.confidence).toFixed(0)}%` +
        ` <small>t=${(s.timestamp / 1000).toFixed(1)}s</small></li>`,
    )
    .join("");
}

export function carPanelHtml(result: {
  record: CarRecordMsg | null;
  message: string | null;
}): string {
  if (result.record !== null) {
    const r = result.record;
    return (
      `<div class="car-hit"><strong>${escapeHtml(r.plate)}</strong>` +
      ` at (${r.local_pose.x.toFixed(2)}, ${r.local_pose.y.toFixed(2)}) m<br>` +
      `last seen t=${(r.last_seen / 1000).toFixed(1)}s,` +
      ` confidence ${(100 * r.confidence).toFixed(0)}%,` +
      ` ${r.sighting_count} sightings</div>`
    );
  }
  if (result.message !== null) {
    return `<div class="car-miss">${escapeHtml(result.message)}</div>`;
  }
  return "";
}

export function waypointListHtml(
  waypoints: { lat: number; lon: number }[],
): string {
  if (waypoints.length === 0) {
    return `<li class="empty">click the map to add waypoints</li>`;
  }
  return waypoints
    .map(
      (wp, i) =>
        `<li>${i + 1}. ${wp.lat.toFixed(6)}, ${wp.lon.toFixed(6)}</li>`,
    )
    .join("");
}
