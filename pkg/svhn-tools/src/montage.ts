/**
 * Grayscale montage rendering for the luma-map dumps the rank-energy
 * command produces: a (k, H, W) f64 record rendered as a tiled PNG grid.
 */

import * as zlib from "zlib";

import { decodeContainer, FormatError } from "./container";

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(...parts: Buffer[]): number {
  let c = 0xffffffff;
  for (const part of parts) {
    for (const byte of part) {
      c = CRC_TABLE[(c ^ byte) & 0xff] ^ (c >>> 8);
    }
  }
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, data: Buffer): Buffer {
  const head = Buffer.alloc(4);
  head.writeUInt32BE(data.length, 0);
  const typeBuf = Buffer.from(type, "ascii");
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(typeBuf, data), 0);
  return Buffer.concat([head, typeBuf, data, crc]);
}

/** Encode 8-bit grayscale pixels (row-major) as a PNG. */
export function encodeGrayPng(pixels: Uint8Array, width: number,
                              height: number): Buffer {
  if (pixels.length !== width * height) {
    throw new Error(`expected ${width * height} pixels, got ${pixels.length}`);
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 0;   // grayscale
  const raw = Buffer.alloc(height * (width + 1));
  for (let y = 0; y < height; y++) {
    raw[y * (width + 1)] = 0; // filter: none
    raw.set(pixels.subarray(y * width, (y + 1) * width), y * (width + 1) + 1);
  }
  return Buffer.concat([
    Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk("IHDR", ihdr),
    chunk("IDAT", zlib.deflateSync(raw)),
    chunk("IEND", Buffer.alloc(0)),
  ]);
}

export type Montage = {
  png: Buffer;
  tiles: number;
  cols: number;
  rows: number;
};

const GAP = 2;

/** Tile a (k, H, W) f64 record into a near-square grid, each map
 * normalized to its own min/max range. */
export function renderMontage(containerBytes: Buffer): Montage {
  const records = decodeContainer(containerBytes);
  if (records.length !== 1 || records[0].dtype !== "f64"
      || records[0].dims.length !== 3) {
    throw new FormatError("expected a single 3-d f64 record of luma maps");
  }
  const [k, h, w] = records[0].dims;
  const values = records[0].data as Float64Array;

  const cols = Math.max(1, Math.ceil(Math.sqrt(k)));
  const rows = Math.ceil(k / cols);
  const width = cols * w + (cols + 1) * GAP;
  const height = rows * h + (rows + 1) * GAP;
  const pixels = new Uint8Array(width * height).fill(32);

  for (let t = 0; t < k; t++) {
    const tile = values.subarray(t * h * w, (t + 1) * h * w);
    let lo = Infinity;
    let hi = -Infinity;
    for (const v of tile) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
    const span = hi - lo || 1;
    const ox = GAP + (t % cols) * (w + GAP);
    const oy = GAP + Math.floor(t / cols) * (h + GAP);
    for (let y = 0; y < h; y++) {
      for (let x = 0; x < w; x++) {
        const v = (tile[y * w + x] - lo) / span;
        pixels[(oy + y) * width + ox + x] = Math.round(v * 255);
      }
    }
  }
  return { png: encodeGrayPng(pixels, width, height), tiles: k, cols, rows };
}
