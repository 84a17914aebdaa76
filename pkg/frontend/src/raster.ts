/**
 * The occupancy raster behind the map canvas.
 *
 * Two sources, one in-memory form: a full `map/snapshot` bus message (base64
 * occ8 cells) or a PGM artifact saved by the robot, plus incremental
 * `map/update` cell patches. Cells are kept row-major with row 0 at the
 * lowest y, matching the robot's grid; the screen flip happens only when
 * rasterising to RGBA.
 */
import type { MapSnapshotMsg, MapUpdateMsg } from "./protocol.js";

export const OCC_OCCUPIED = 0;
export const OCC_FREE = 254;
export const OCC_UNKNOWN = 205;

// RGB per occ8 code; anything else renders as unknown.
const COLOR_OCCUPIED: [number, number, number] = [40, 44, 52];
const COLOR_FREE: [number, number, number] = [236, 239, 241];
const COLOR_UNKNOWN: [number, number, number] = [176, 182, 188];

export class MapRaster {
  readonly resolution: number;
  readonly width: number;
  readonly height: number;
  readonly origin: { x: number; y: number };
  readonly cells: Uint8Array;

  constructor(
    resolution: number,
    width: number,
    height: number,
    origin: { x: number; y: number },
    cells: Uint8Array,
  ) {
    if (cells.length !== width * height) {
      throw new Error(`raster needs ${width * height} cells, got ${cells.length}`);
    }
    this.resolution = resolution;
    this.width = width;
    this.height = height;
    this.origin = origin;
    this.cells = cells;
  }

  static fromSnapshot(msg: MapSnapshotMsg): MapRaster {
    if (msg.encoding !== "occ8") {
      throw new Error(`unsupported map encoding ${msg.encoding}`);
    }
    const raw = atob(msg.data);
    const cells = new Uint8Array(raw.length);
    for (let i = 0; i < raw.length; i++) cells[i] = raw.charCodeAt(i);
    return new MapRaster(msg.resolution, msg.width, msg.height, msg.origin, cells);
  }

  cellAt(col: number, row: number): number {
    if (col < 0 || col >= this.width || row < 0 || row >= this.height) {
      return OCC_UNKNOWN;
    }
    return this.cells[row * this.width + col];
  }

  /** In-place cell patch from a `map/update` message. */
  applyUpdate(msg: MapUpdateMsg): void {
    for (const [col, row, value] of msg.cells) {
      if (col >= 0 && col < this.width && row >= 0 && row < this.height) {
        this.cells[row * this.width + col] = value;
      }
    }
  }

  /** RGBA image in screen orientation (top row = highest y), 1 px per cell. */
  toImageRgba(): {
    width: number;
    height: number;
    data: Uint8ClampedArray<ArrayBuffer>;
  } {
    const data = new Uint8ClampedArray(new ArrayBuffer(this.width * this.height * 4));
    for (let row = 0; row < this.height; row++) {
      const screenRow = this.height - 1 - row;
      for (let col = 0; col < this.width; col++) {
        const v = this.cells[row * this.width + col];
        const rgb =
          v === OCC_OCCUPIED ? COLOR_OCCUPIED
          : v === OCC_FREE ? COLOR_FREE
          : COLOR_UNKNOWN;
        const o = (screenRow * this.width + col) * 4;
        data[o] = rgb[0];
        data[o + 1] = rgb[1];
        data[o + 2] = rgb[2];
        data[o + 3] = 255;
      }
    }
    return { width: this.width, height: this.height, data };
  }
}

/**
 * Parse a binary PGM (P5) map artifact. File rows run top-down (file row 0
 * is the highest map row), so rows are flipped into map order here.
 */
export function parsePgm(
  bytes: Uint8Array,
  resolution: number,
  origin: { x: number; y: number },
): MapRaster {
  let pos = 0;
  const readToken = (): string => {
    // skip whitespace and "#" comment lines between header tokens
    for (;;) {
      while (pos < bytes.length && isSpace(bytes[pos])) pos++;
      if (bytes[pos] === 0x23) {
        while (pos < bytes.length && bytes[pos] !== 0x0a) pos++;
      } else {
        break;
      }
    }
    const start = pos;
    while (pos < bytes.length && !isSpace(bytes[pos])) pos++;
    return String.fromCharCode(...bytes.subarray(start, pos));
  };

  if (readToken() !== "P5") throw new Error("not a binary PGM (P5) file");
  const width = parseInt(readToken(), 10);
  const height = parseInt(readToken(), 10);
  const maxval = parseInt(readToken(), 10);
  if (!(width > 0) || !(height > 0) || !(maxval > 0) || maxval > 255) {
    throw new Error("malformed PGM header");
  }
  pos++; // single whitespace byte after maxval, then raster data
  if (bytes.length - pos < width * height) {
    throw new Error("PGM truncated");
  }
  const cells = new Uint8Array(width * height);
  for (let fileRow = 0; fileRow < height; fileRow++) {
    const mapRow = height - 1 - fileRow;
    cells.set(
      bytes.subarray(pos + fileRow * width, pos + (fileRow + 1) * width),
      mapRow * width,
    );
  }
  return new MapRaster(resolution, width, height, origin, cells);
}

/** Pull resolution and origin out of the PGM's YAML sidecar. */
export function parseMapYaml(text: string): {
  resolution: number;
  origin: { x: number; y: number };
} {
  let resolution = NaN;
  let origin = { x: NaN, y: NaN };
  for (const line of text.split("\n")) {
    const res = line.match(/^resolution:\s*([-\d.eE+]+)/);
    if (res) resolution = parseFloat(res[1]);
    const org = line.match(/^origin:\s*\[\s*([-\d.eE+]+)\s*,\s*([-\d.eE+]+)/);
    if (org) origin = { x: parseFloat(org[1]), y: parseFloat(org[2]) };
  }
  if (!Number.isFinite(resolution) || !Number.isFinite(origin.x)) {
    throw new Error("map yaml is missing resolution or origin");
  }
  return { resolution, origin };
}

function isSpace(b: number): boolean {
  return b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d;
}
