/**
 * Single view-state store fed by the one WebSocket consumer.
 *
 * Envelope ingestion is seq-monotone per topic: a frame whose seq is not
 * greater than the last applied one is stale and dropped. A jump past
 * last+1 means the bridge (or our bounded queue) lost frames; absolute
 * payloads just carry on, but incremental map patches are no longer sound,
 * so the raster is invalidated and the gap reported for a full re-fetch.
 */
import type {
  EnvelopeMsg,
  GeoReferenceMsg,
  MapSnapshotMsg,
  MapUpdateMsg,
  MissionCommandMsg,
  MissionStateMsg,
  PlanPathMsg,
  PoseMsg,
  RobotStateResponse,
  SightingMsg,
} from "./protocol.js";
import { MapRaster } from "./raster.js";

export const TRAIL_LENGTH = 48; // recent poses kept for the local-motion arc
export const FEED_LENGTH = 30; // sightings kept in the side panel

export enum BadgePhase {
  Idle = "Idle",
  Navigating = "Navigating",
  Docking = "Docking",
  Completed = "Completed",
  Aborted = "Aborted",
}

export function badgeFromPhase(phase: string): BadgePhase {
  switch (phase) {
    case "navigating":
      return BadgePhase.Navigating;
    case "docking":
      return BadgePhase.Docking;
    case "completed":
      return BadgePhase.Completed;
    case "aborted":
      return BadgePhase.Aborted;
    default:
      return BadgePhase.Idle;
  }
}

export interface ViewState {
  reference: GeoReferenceMsg | null;
  pose: PoseMsg | null;
  trail: PoseMsg[]; // newest last; the green local-motion polyline
  gpsFix: { lat: number; lon: number } | null;
  badge: BadgePhase;
  missionId: string | null;
  waypointIndex: number | null;
  abortReason: string | null;
  lastCommand: MissionCommandMsg | null;
  plan: [number, number][]; // the red global-path polyline
  sightings: SightingMsg[]; // newest first
  raster: MapRaster | null;
}

export type GapHandler = (topic: string, fromSeq: number, toSeq: number) => void;

export class ViewStore {
  readonly state: ViewState = {
    reference: null,
    pose: null,
    trail: [],
    gpsFix: null,
    badge: BadgePhase.Idle,
    missionId: null,
    waypointIndex: null,
    abortReason: null,
    lastCommand: null,
    plan: [],
    sightings: [],
    raster: null,
  };

  onGap: GapHandler | null = null;

  private lastSeq = new Map<string, number>();
  private staleDropped = 0;

  get droppedStaleFrames(): number {
    return this.staleDropped;
  }

  /** Seed pose/phase/reference from a GET /api/robot/state response. */
  applyRobotState(res: RobotStateResponse): void {
    this.state.reference = res.geo_reference;
    if (res.pose !== null) this.setPose(res.pose);
    this.applyMissionState(res.mission as unknown as MissionStateMsg);
  }

  /** Route one bus envelope into the state; returns false for stale/unknown. */
  apply(env: EnvelopeMsg): boolean {
    const last = this.lastSeq.get(env.topic) ?? 0;
    if (env.seq <= last) {
      this.staleDropped++;
      return false;
    }
    if (last > 0 && env.seq > last + 1) {
      this.handleGap(env.topic, last, env.seq);
    }
    this.lastSeq.set(env.topic, env.seq);

    switch (env.topic) {
      case "robot/pose":
        this.setPose(env.payload as PoseMsg);
        return true;
      case "robot/gps":
        this.state.gpsFix = env.payload as { lat: number; lon: number };
        return true;
      case "mission/state":
        this.applyMissionState(env.payload as MissionStateMsg);
        return true;
      case "mission/command":
        this.state.lastCommand = env.payload as MissionCommandMsg;
        return true;
      case "plan/path":
        this.state.plan = (env.payload as PlanPathMsg).points;
        return true;
      case "alpr/sighting":
        this.state.sightings.unshift(env.payload as SightingMsg);
        if (this.state.sightings.length > FEED_LENGTH) {
          this.state.sightings.length = FEED_LENGTH;
        }
        return true;
      case "geo/resync":
        this.state.reference = env.payload as GeoReferenceMsg;
        return true;
      case "map/snapshot":
        this.state.raster = MapRaster.fromSnapshot(env.payload as MapSnapshotMsg);
        return true;
      case "map/update":
        if (this.state.raster !== null) {
          this.state.raster.applyUpdate(env.payload as MapUpdateMsg);
        }
        return true;
      default:
        return false;
    }
  }

  private setPose(pose: PoseMsg): void {
    this.state.pose = pose;
    this.state.trail.push(pose);
    if (this.state.trail.length > TRAIL_LENGTH) this.state.trail.shift();
  }

  private applyMissionState(msg: MissionStateMsg): void {
    this.state.badge = badgeFromPhase(msg.phase);
    this.state.missionId = msg.mission_id ?? this.state.missionId;
    this.state.waypointIndex =
      msg.waypoint_index !== undefined ? msg.waypoint_index : null;
    this.state.abortReason = msg.reason ?? null;
  }

  private handleGap(topic: string, fromSeq: number, toSeq: number): void {
    if (topic === "map/update") {
      // patches were lost: the raster can no longer be trusted
      this.state.raster = null;
    }
    if (this.onGap !== null) this.onGap(topic, fromSeq, toSeq);
  }
}
