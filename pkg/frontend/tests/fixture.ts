/** Shared access to the recorded-stream fixture (fixtures/record_fixture.py). */
import { readFileSync } from "node:fs";

import type {
  CarRecordMsg,
  EnvelopeMsg,
  GeoPointMsg,
  MissionCommandMsg,
  RobotStateResponse,
} from "../src/protocol.js";
import { parseEnvelope } from "../src/protocol.js";
import type { MapView } from "../src/geo.js";

export interface Fixture {
  generated_by: string;
  view: MapView;
  clicks_px: [number, number][];
  tolerance: number;
  backend: {
    robot_state_initial: RobotStateResponse;
    robot_state_final: RobotStateResponse;
    mission_post: {
      request: { waypoints: GeoPointMsg[]; tolerance: number };
      status: number;
      response: { mission_id: number };
    };
    missions_after_post: MissionCommandMsg[];
    mission_get_by_id: MissionCommandMsg;
    car_hit: {
      query_spaced: string;
      plate_canonical: string;
      status: number;
      response: CarRecordMsg;
      response_spaced_query: CarRecordMsg;
    };
    car_miss: { query: string; status: number; response: { detail: string } };
  };
  frames: string[];
}

export const fixture: Fixture = JSON.parse(
  readFileSync(new URL("../fixtures/stream.json", import.meta.url), "utf-8"),
) as Fixture;

export function fixtureEnvelopes(): EnvelopeMsg[] {
  return fixture.frames.map((frame) => {
    const env = parseEnvelope(frame);
    if (env === null) throw new Error(`unparseable fixture frame: ${frame}`);
    return env;
  });
}

/** Minimal fetch stub: route table keyed by "METHOD path". */
export type Route = (init?: RequestInit) => { status: number; body: unknown };

export function makeFetch(routes: Record<string, Route>): {
  fetchFn: (url: string, init?: RequestInit) => Promise<Response>;
  requests: { method: string; path: string; body?: unknown }[];
} {
  const requests: { method: string; path: string; body?: unknown }[] = [];
  const fetchFn = async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    requests.push({
      method,
      path,
      body: init?.body !== undefined ? JSON.parse(String(init.body)) : undefined,
    });
    const route = routes[`${method} ${path}`];
    if (route === undefined) {
      return new Response(JSON.stringify({ detail: `no route ${method} ${path}` }), {
        status: 404,
        headers: { "content-type": "application/json" },
      });
    }
    const { status, body } = route(init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  };
  return { fetchFn, requests };
}
