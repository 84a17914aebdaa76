/**
 * Thin clients for the backend's public surface. The console talks to the
 * robot exclusively through these: four HTTP endpoints and the WS bridge.
 * `fetch` and the WebSocket constructor are injectable so tests can run
 * against a recorded fixture instead of a live simulator.
 */
import { canonicalPlate, parseEnvelope, STREAM_TOPICS } from "./protocol.js";
import type {
  CarRecordMsg,
  EnvelopeMsg,
  GeoPointMsg,
  MissionCommandMsg,
  RobotStateResponse,
} from "./protocol.js";

export type FetchFn = (url: string, init?: RequestInit) => Promise<Response>;

export class HttpError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.status = status;
  }
}

export type CarSearchResult =
  | { kind: "hit"; record: CarRecordMsg }
  | { kind: "miss"; detail: string };

async function errorDetail(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { detail?: string };
    if (typeof body.detail === "string") return body.detail;
  } catch {
    // fall through to the generic message
  }
  return res.statusText || "request failed";
}

export class BackendClient {
  readonly baseUrl: string;
  private readonly fetchFn: FetchFn;

  constructor(baseUrl: string, fetchFn?: FetchFn) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  async getRobotState(): Promise<RobotStateResponse> {
    const res = await this.fetchFn(`${this.baseUrl}/api/robot/state`);
    if (!res.ok) throw new HttpError(res.status, await errorDetail(res));
    return (await res.json()) as RobotStateResponse;
  }

  async getMissions(): Promise<MissionCommandMsg[]> {
    const res = await this.fetchFn(`${this.baseUrl}/api/missions`);
    if (!res.ok) throw new HttpError(res.status, await errorDetail(res));
    return (await res.json()) as MissionCommandMsg[];
  }

  /** Submit drawn waypoints; resolves to the assigned mission id. */
  async postMission(
    waypoints: GeoPointMsg[],
    tolerance: number,
  ): Promise<number> {
    const res = await this.fetchFn(`${this.baseUrl}/api/missions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ waypoints, tolerance }),
    });
    if (res.status !== 202) throw new HttpError(res.status, await errorDetail(res));
    const body = (await res.json()) as { mission_id: number };
    return body.mission_id;
  }

  /**
   * Car finder. The query is canonicalized exactly like the backend does
   * (whitespace stripped, uppercased), so " 12 345 " finds plate "12345".
   * A 404 is a result, not an error.
   */
  async searchCar(query: string): Promise<CarSearchResult> {
    const plate = canonicalPlate(query);
    const res = await this.fetchFn(
      `${this.baseUrl}/api/cars/${encodeURIComponent(plate)}`,
    );
    if (res.status === 404) return { kind: "miss", detail: await errorDetail(res) };
    if (!res.ok) throw new HttpError(res.status, await errorDetail(res));
    return { kind: "hit", record: (await res.json()) as CarRecordMsg };
  }
}

// ---------------------------------------------------------------------------

export interface StreamSocketCallbacks {
  onEnvelope: (env: EnvelopeMsg) => void;
  onOpen?: () => void;
  onClose?: () => void;
  onBridgeError?: (message: string) => void;
}

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

const RECONNECT_BASE_MS = 500;
const RECONNECT_MAX_MS = 8000;

/**
 * The single stream consumer. Subscribes to every console topic on open,
 * hands envelopes to one callback, and reconnects with capped backoff when
 * the bridge drops; close() stops the loop for good.
 */
export class StreamSocket {
  private readonly url: string;
  private readonly callbacks: StreamSocketCallbacks;
  private readonly factory: SocketFactory;
  private socket: SocketLike | null = null;
  private open = false;
  private closed = false;
  private attempts = 0;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(url: string, callbacks: StreamSocketCallbacks, factory?: SocketFactory) {
    this.url = url;
    this.callbacks = callbacks;
    this.factory =
      factory ?? ((u) => new WebSocket(u) as unknown as SocketLike);
  }

  get isOpen(): boolean {
    return this.open;
  }

  connect(): void {
    this.closed = false;
    const sock = this.factory(this.url);
    this.socket = sock;
    sock.onopen = () => {
      console.log("[ws] connected", this.url);
      this.open = true;
      this.attempts = 0;
      for (const topic of STREAM_TOPICS) {
        sock.send(JSON.stringify({ subscribe: topic }));
      }
      this.callbacks.onOpen?.();
    };
    sock.onmessage = (ev) => this.handleFrame(String(ev.data));
    sock.onclose = () => {
      this.open = false;
      this.callbacks.onClose?.();
      this.scheduleReconnect();
    };
  }

  /** Send a command onto the bus; false when the bridge is not connected. */
  publish(topic: string, payload: unknown): boolean {
    if (!this.open || this.socket === null) return false;
    this.socket.send(JSON.stringify({ publish: { topic, payload } }));
    return true;
  }

  close(): void {
    this.closed = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.socket?.close();
    this.socket = null;
    this.open = false;
  }

  private handleFrame(data: string): void {
    const env = parseEnvelope(data);
    if (env !== null) {
      this.callbacks.onEnvelope(env);
      return;
    }
    try {
      const obj = JSON.parse(data) as { error?: string };
      if (typeof obj.error === "string") {
        console.warn("[ws] bridge error:", obj.error);
        this.callbacks.onBridgeError?.(obj.error);
        return;
      }
    } catch {
      // not JSON at all
    }
    console.warn("[ws] unrecognized frame dropped");
  }

  private scheduleReconnect(): void {
    if (this.closed) return;
    const delay = Math.min(
      RECONNECT_MAX_MS,
      RECONNECT_BASE_MS * 2 ** this.attempts,
    );
    this.attempts++;
    console.log(`[ws] disconnected, retrying in ${delay} ms`);
    this.reconnectTimer = setTimeout(() => this.connect(), delay);
  }
}
