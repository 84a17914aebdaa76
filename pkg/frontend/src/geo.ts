/**
 * Coordinate plumbing: geodetic <-> robot-local <-> canvas pixels.
 *
 * The geodetic side is the same equirectangular local-tangent projection the
 * robot uses (spherical earth, reference anchored at the charging station),
 * so a waypoint drawn here lands where the robot thinks it is to well under
 * a centimetre over a parking lot.
 */
import type { GeoPointMsg, GeoReferenceMsg } from "./protocol.js";

export const EARTH_RADIUS_M = 6_371_000.0;
const DEG_TO_RAD = Math.PI / 180.0;
const RAD_TO_DEG = 180.0 / Math.PI;

export interface LocalPoint {
  x: number;
  y: number;
}

export function toLocal(ref: GeoReferenceMsg, g: GeoPointMsg): LocalPoint {
  const lat0 = ref.lat * DEG_TO_RAD;
  const east = (g.lon - ref.lon) * DEG_TO_RAD * EARTH_RADIUS_M * Math.cos(lat0);
  const north = (g.lat - ref.lat) * DEG_TO_RAD * EARTH_RADIUS_M;
  const c = Math.cos(ref.heading_offset);
  const s = Math.sin(ref.heading_offset);
  return { x: c * east + s * north, y: -s * east + c * north };
}

export function toGps(ref: GeoReferenceMsg, p: LocalPoint): GeoPointMsg {
  const c = Math.cos(ref.heading_offset);
  const s = Math.sin(ref.heading_offset);
  const east = c * p.x - s * p.y;
  const north = s * p.x + c * p.y;
  const lat0 = ref.lat * DEG_TO_RAD;
  return {
    lat: ref.lat + (north / EARTH_RADIUS_M) * RAD_TO_DEG,
    lon: ref.lon + (east / (EARTH_RADIUS_M * Math.cos(lat0))) * RAD_TO_DEG,
  };
}

/**
 * The canvas viewport: a metric window centred on `center`, y up in world
 * coordinates, y down in pixels.
 */
export interface MapView {
  widthPx: number;
  heightPx: number;
  pxPerMeter: number;
  center: LocalPoint;
}

export function pixelToLocal(view: MapView, px: number, py: number): LocalPoint {
  return {
    x: view.center.x + (px - view.widthPx / 2) / view.pxPerMeter,
    y: view.center.y - (py - view.heightPx / 2) / view.pxPerMeter,
  };
}

export function localToPixel(view: MapView, p: LocalPoint): { px: number; py: number } {
  return {
    px: view.widthPx / 2 + (p.x - view.center.x) * view.pxPerMeter,
    py: view.heightPx / 2 - (p.y - view.center.y) * view.pxPerMeter,
  };
}

/** Clicked pixel -> GeoPoint under the current reference, one hop. */
export function pixelToGps(
  view: MapView,
  ref: GeoReferenceMsg,
  px: number,
  py: number,
): GeoPointMsg {
  return toGps(ref, pixelToLocal(view, px, py));
}

export function isValidLatitude(lat: number): boolean {
  return Number.isFinite(lat) && lat >= -90.0 && lat <= 90.0;
}

export function isValidLongitude(lon: number): boolean {
  return Number.isFinite(lon) && lon > -180.0 && lon <= 180.0;
}

export function isValidHeading(heading: number): boolean {
  return Number.isFinite(heading);
}
