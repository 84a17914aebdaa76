/**
 * The operator console itself: one canvas, one side panel, one store.
 *
 * A single StreamSocket consumer feeds the ViewStore; the render loop reads
 * store snapshots; every user action goes out through the documented HTTP
 * endpoints or a WS command publish — the console never touches simulation
 * state any other way.
 */
import { BackendClient, StreamSocket, type FetchFn, type SocketFactory } from "./client.js";
import {
  isValidHeading,
  isValidLatitude,
  isValidLongitude,
  localToPixel,
  pixelToGps,
  pixelToLocal,
  type MapView,
} from "./geo.js";
import { GEO_INIT_TOPIC, MAP_REQUEST_TOPIC } from "./protocol.js";
import type { CarRecordMsg, GeoPointMsg } from "./protocol.js";
import type { MapRaster } from "./raster.js";
import {
  badgeHtml,
  bannerHtml,
  carPanelHtml,
  drawOverlay,
  sightingsHtml,
  waypointListHtml,
} from "./render.js";
import { ViewStore } from "./store.js";

const DEFAULT_PX_PER_METER = 20;
const DEFAULT_TOLERANCE_M = 0.5;

export interface AppOptions {
  fetchFn?: FetchFn;
  socketFactory?: SocketFactory;
}

export class ControlApp {
  readonly store = new ViewStore();
  readonly client: BackendClient;
  readonly socket: StreamSocket;
  readonly view: MapView;

  private readonly doc: Document;
  private pendingLocal: { x: number; y: number }[] = [];
  private pendingGeo: GeoPointMsg[] = [];
  private carHighlight: CarRecordMsg | null = null;
  private carMessage: string | null = null;
  private banner: string | null = null;
  private followRobot = true;
  private rasterCache: { src: MapRaster; canvas: HTMLCanvasElement } | null = null;

  /** Current error banner, null when clear. */
  get bannerText(): string | null {
    return this.banner;
  }

  constructor(doc: Document, httpBase: string, wsUrl: string, opts: AppOptions = {}) {
    this.doc = doc;
    this.client = new BackendClient(httpBase, opts.fetchFn);
    this.socket = new StreamSocket(
      wsUrl,
      {
        onEnvelope: (env) => this.store.apply(env),
        onOpen: () => this.setConnected(true),
        onClose: () => this.setConnected(false),
        onBridgeError: (msg) => this.showBanner(`stream error: ${msg}`),
      },
      opts.socketFactory,
    );
    const canvas = this.canvas();
    this.view = {
      widthPx: canvas.width,
      heightPx: canvas.height,
      pxPerMeter: DEFAULT_PX_PER_METER,
      center: { x: 0, y: 0 },
    };
    this.store.onGap = (topic) => {
      if (topic === "map/update" || topic === "map/snapshot") {
        console.warn(`[store] seq gap on ${topic}, requesting a fresh snapshot`);
        this.socket.publish(MAP_REQUEST_TOPIC, {});
      }
    };
  }

  async bootstrap(): Promise<void> {
    this.bindEvents();
    try {
      const state = await this.client.getRobotState();
      this.store.applyRobotState(state);
      if (state.pose !== null) {
        this.view.center = { x: state.pose.x, y: state.pose.y };
      }
      this.banner = null;
    } catch (err) {
      this.showBanner(`backend unreachable: ${describe(err)}`);
    }
    this.socket.connect();
    const tick = () => {
      this.render();
      requestAnimationFrame(tick);
    };
    requestAnimationFrame(tick);
  }

  // -- user actions ---------------------------------------------------------

  /** Map click: pixel -> local -> GeoPoint under the current reference. */
  addWaypointAt(px: number, py: number): void {
    const ref = this.store.state.reference;
    if (ref === null) {
      this.showBanner("no geo reference yet: is the backend up?");
      return;
    }
    this.pendingLocal.push(pixelToLocal(this.view, px, py));
    this.pendingGeo.push(pixelToGps(this.view, ref, px, py));
  }

  clearWaypoints(): void {
    this.pendingLocal = [];
    this.pendingGeo = [];
  }

  async submitMission(): Promise<void> {
    if (this.pendingGeo.length === 0) {
      this.showBanner("draw at least one waypoint first");
      return;
    }
    const tolerance = this.toleranceInput();
    try {
      const id = await this.client.postMission(this.pendingGeo, tolerance);
      console.log(`[mission] accepted as #${id}`);
      this.clearWaypoints();
      this.banner = null;
    } catch (err) {
      this.showBanner(`mission rejected: ${describe(err)}`);
    }
  }

  /**
   * Operator-supplied initial location. Validated client-side, then sent as
   * a command publish over the stream; the acknowledged reference is read
   * back from GET /api/robot/state rather than assumed.
   */
  async initLocation(lat: number, lon: number, heading: number): Promise<void> {
    if (!isValidLatitude(lat)) {
      this.showBanner(`latitude ${lat} out of [-90, 90], not sent`);
      return;
    }
    if (!isValidLongitude(lon)) {
      this.showBanner(`longitude ${lon} out of (-180, 180], not sent`);
      return;
    }
    if (!isValidHeading(heading)) {
      this.showBanner("heading must be a number, not sent");
      return;
    }
    if (!this.socket.publish(GEO_INIT_TOPIC, { lat, lon, heading })) {
      this.showBanner("backend unreachable: stream is down, command not sent");
      return;
    }
    try {
      const state = await this.client.getRobotState();
      this.store.applyRobotState(state);
      this.banner = null;
    } catch (err) {
      this.showBanner(`backend unreachable: ${describe(err)}`);
    }
  }

  async searchPlate(query: string): Promise<void> {
    if (query.trim() === "") return;
    try {
      const result = await this.client.searchCar(query);
      if (result.kind === "hit") {
        this.carHighlight = result.record;
        this.carMessage = null;
        this.followRobot = false;
        this.view.center = { ...result.record.local_pose }; // pan to the bay
      } else {
        // not found: message only, the map stays put
        this.carMessage = result.detail;
      }
      this.banner = null;
    } catch (err) {
      this.showBanner(`car lookup failed: ${describe(err)}`);
    }
  }

  // -- wiring ----------------------------------------------------------------

  private bindEvents(): void {
    this.canvas().addEventListener("click", (ev) => {
      const rect = this.canvas().getBoundingClientRect();
      this.addWaypointAt(ev.clientX - rect.left, ev.clientY - rect.top);
    });
    this.button("submit-mission").addEventListener("click", () => {
      void this.submitMission();
    });
    this.button("clear-mission").addEventListener("click", () => {
      this.clearWaypoints();
    });
    this.button("plate-search").addEventListener("click", () => {
      void this.searchPlate(this.input("plate-input").value);
    });
    this.input("plate-input").addEventListener("keydown", (ev) => {
      if (ev.key === "Enter") void this.searchPlate(this.input("plate-input").value);
    });
    this.button("init-send").addEventListener("click", () => {
      void this.initLocation(
        parseFloat(this.input("init-lat").value),
        parseFloat(this.input("init-lon").value),
        parseFloat(this.input("init-heading").value),
      );
    });
    this.button("zoom-in").addEventListener("click", () => {
      this.view.pxPerMeter = Math.min(80, this.view.pxPerMeter * 1.25);
    });
    this.button("zoom-out").addEventListener("click", () => {
      this.view.pxPerMeter = Math.max(4, this.view.pxPerMeter / 1.25);
    });
    this.button("follow-robot").addEventListener("click", () => {
      this.followRobot = !this.followRobot;
    });
  }

  private render(): void {
    const state = this.store.state;
    if (this.followRobot && state.pose !== null) {
      this.view.center = { x: state.pose.x, y: state.pose.y };
    }
    const canvas = this.canvas();
    const ctx = canvas.getContext("2d");
    if (ctx === null) return;
    ctx.fillStyle = "#f5f6f7";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    if (state.raster !== null) this.drawRaster(ctx, state.raster);
    drawOverlay(ctx, this.view, state, this.pendingLocal, this.carHighlight);

    this.panel("badge").innerHTML = badgeHtml(state);
    this.panel("banner").innerHTML = bannerHtml(this.banner);
    this.panel("sightings").innerHTML = sightingsHtml(state.sightings);
    this.panel("waypoints").innerHTML = waypointListHtml(this.pendingGeo);
    this.panel("car-panel").innerHTML = carPanelHtml({
      record: this.carHighlight,
      message: this.carMessage,
    });
  }

  private drawRaster(ctx: CanvasRenderingContext2D, raster: MapRaster): void {
    if (this.rasterCache === null || this.rasterCache.src !== raster) {
      const img = raster.toImageRgba();
      const off = this.doc.createElement("canvas");
      off.width = img.width;
      off.height = img.height;
      off.getContext("2d")?.putImageData(
        new ImageData(img.data, img.width, img.height),
        0,
        0,
      );
      this.rasterCache = { src: raster, canvas: off };
    }
    const topLeft = localToPixel(this.view, {
      x: raster.origin.x,
      y: raster.origin.y + raster.height * raster.resolution,
    });
    const scale = this.view.pxPerMeter * raster.resolution;
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(
      this.rasterCache.canvas,
      topLeft.px,
      topLeft.py,
      raster.width * scale,
      raster.height * scale,
    );
  }

  private showBanner(message: string): void {
    console.warn("[app]", message);
    this.banner = message;
  }

  private setConnected(up: boolean): void {
    const el = this.doc.getElementById("conn-status");
    if (el !== null) {
      el.textContent = up ? "stream: live" : "stream: reconnecting";
      el.className = up ? "conn-up" : "conn-down";
    }
  }

  private toleranceInput(): number {
    const raw = parseFloat(this.input("tolerance-input").value);
    return Number.isFinite(raw) && raw > 0 ? raw : DEFAULT_TOLERANCE_M;
  }

  private canvas(): HTMLCanvasElement {
    return this.doc.getElementById("map-canvas") as HTMLCanvasElement;
  }

  private button(id: string): HTMLButtonElement {
    return this.doc.getElementById(id) as HTMLButtonElement;
  }

  private input(id: string): HTMLInputElement {
    return this.doc.getElementById(id) as HTMLInputElement;
  }

  private panel(id: string): HTMLElement {
    return this.doc.getElementById(id) as HTMLElement;
  }
}

function describe(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}
