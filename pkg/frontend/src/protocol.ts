/**
 * Wire types for the backend's public surface: the four HTTP endpoints and
 * the WebSocket bus bridge. Everything here mirrors what the server emits;
 * nothing is invented client-side except the parse helpers at the bottom.
 */

export interface GeoPointMsg {
  lat: number;
  lon: number;
}

export interface GeoReferenceMsg {
  lat: number;
  lon: number;
  heading_offset: number;
}

export interface PoseMsg {
  t: number; // milliseconds of sim time
  x: number;
  y: number;
  theta: number;
}

export interface MissionStateMsg {
  phase: string; // idle | navigating | docking | completed | aborted
  t: number;
  waypoint_index?: number;
  reason?: string;
  mission_id?: string;
}

export interface MissionCommandMsg {
  mission_id: number;
  waypoints: GeoPointMsg[];
  tolerance: number;
}

export interface PlanPathMsg {
  frame: string;
  points: [number, number][]; // local-frame metres
}

export interface SightingMsg {
  plate_read: string;
  true_plate: string;
  confidence: number;
  robot_pose: { x: number; y: number; theta: number };
  car_position: GeoPointMsg;
  timestamp: number; // milliseconds
}

export interface MapSnapshotMsg {
  resolution: number; // metres per cell
  width: number;
  height: number;
  origin: { x: number; y: number }; // world position of cell (0, 0)'s corner
  encoding: "occ8"; // one byte per cell: 0 occupied, 254 free, 205 unknown
  data: string; // base64, row-major, row 0 = lowest y
}

export interface MapUpdateMsg {
  cells: [number, number, number][]; // [col, row, occ8 value]
}

export interface RobotStateResponse {
  pose: PoseMsg | null;
  mission: { phase: string; [key: string]: unknown };
  geo_reference: GeoReferenceMsg;
}

export interface CarRecordMsg {
  plate: string;
  position: GeoPointMsg;
  local_pose: { x: number; y: number };
  last_seen: number; // milliseconds
  confidence: number;
  sighting_count: number;
}

/** One frame of the WS bridge: a bus envelope serialized as JSON. */
export interface EnvelopeMsg {
  topic: string;
  seq: number;
  timestamp: number;
  payload: unknown;
}

/** Bus topics this console consumes. The bridge has no multi-level
 *  wildcard, so each is subscribed explicitly on connect. */
export const STREAM_TOPICS = [
  "robot/pose",
  "robot/gps",
  "mission/state",
  "mission/command",
  "plan/path",
  "alpr/sighting",
  "geo/resync",
  "map/snapshot",
  "map/update",
] as const;

/** Topic a map publisher listens on to re-send a full snapshot. */
export const MAP_REQUEST_TOPIC = "map/request";
/** Topic carrying the operator's initial-reference command to the robot. */
export const GEO_INIT_TOPIC = "geo/init";

/**
 * Same canonical form the backend applies before storing or looking up a
 * plate: strip all whitespace, uppercase. Keeping the client in lockstep
 * means " 12 345 " and "12345" hit the same record.
 */
export function canonicalPlate(plate: string): string {
  return plate.replace(/\s+/g, "").toUpperCase();
}

export function parseEnvelope(frame: string): EnvelopeMsg | null {
  let obj: unknown;
  try {
    obj = JSON.parse(frame);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const env = obj as Record<string, unknown>;
  if (typeof env.topic !== "string" || typeof env.seq !== "number") return null;
  return {
    topic: env.topic,
    seq: env.seq,
    timestamp: typeof env.timestamp === "number" ? env.timestamp : 0,
    payload: env.payload,
  };
}
