/**
 * Binary dataset container shared with the training pipeline.
 *
 * Layout (little-endian throughout):
 *   magic   4 bytes "CND1"
 *   version u32 (1)
 *   records: dtype u32 (0=u8, 1=f32, 2=f64) | ndim u32 | dims u32 each
 *            | payload, prod(dims) * itemsize bytes, row-major
 *
 * A dataset file holds exactly two records: images (N, 3, 32, 32) and
 * labels (N,) u8 in [0, 9].
 */

export const MAGIC = "CND1";
export const VERSION = 1;

export type Record = {
  dtype: "u8" | "f32" | "f64";
  dims: number[];
  data: Uint8Array | Float32Array | Float64Array;
};

const DTYPE_CODES = { u8: 0, f32: 1, f64: 2 } as const;
const ITEM_SIZES = { u8: 1, f32: 4, f64: 8 } as const;

export class FormatError extends Error {}

class Cursor {
  constructor(public buf: Buffer, public pos = 0) {}

  u32(what: string): number {
    if (this.pos + 4 > this.buf.length) {
      throw new FormatError(
        `truncated file reading ${what} at byte ${this.pos}`);
    }
    const v = this.buf.readUInt32LE(this.pos);
    this.pos += 4;
    return v;
  }

  bytes(n: number, what: string): Buffer {
    if (this.pos + n > this.buf.length) {
      throw new FormatError(
        `truncated file reading ${what} at byte ${this.pos}: expected ` +
        `${n} bytes, got ${this.buf.length - this.pos}`);
    }
    const v = this.buf.subarray(this.pos, this.pos + n);
    this.pos += n;
    return v;
  }
}

export function product(dims: number[]): number {
  return dims.reduce((a, b) => a * b, 1);
}

export function encodeRecord(rec: Record): Buffer {
  const count = product(rec.dims);
  if (count !== rec.data.length) {
    throw new Error(`dims ${rec.dims} do not match ${rec.data.length} values`);
  }
  const header = Buffer.alloc(8 + 4 * rec.dims.length);
  header.writeUInt32LE(DTYPE_CODES[rec.dtype], 0);
  header.writeUInt32LE(rec.dims.length, 4);
  rec.dims.forEach((d, i) => header.writeUInt32LE(d, 8 + 4 * i));
  const payload = Buffer.from(rec.data.buffer, rec.data.byteOffset,
                              count * ITEM_SIZES[rec.dtype]);
  return Buffer.concat([header, payload]);
}

export function decodeRecord(cur: Cursor): Record {
  const at = cur.pos;
  const code = cur.u32("record dtype");
  const ndim = cur.u32("record ndim");
  if (ndim === 0 || ndim > 8) {
    throw new FormatError(`implausible ndim ${ndim} at byte ${at}`);
  }
  const dims: number[] = [];
  for (let i = 0; i < ndim; i++) dims.push(cur.u32("record dims"));
  if (dims.some((d) => d === 0)) {
    throw new FormatError(`zero extent in dims [${dims}] at byte ${at}`);
  }
  const count = product(dims);
  if (code === DTYPE_CODES.u8) {
    const raw = cur.bytes(count, `payload for dims [${dims}]`);
    return { dtype: "u8", dims, data: new Uint8Array(raw) };
  }
  if (code === DTYPE_CODES.f32) {
    const raw = cur.bytes(count * 4, `payload for dims [${dims}]`);
    return { dtype: "f32", dims, data: new Float32Array(copyAligned(raw).buffer) };
  }
  if (code === DTYPE_CODES.f64) {
    const raw = cur.bytes(count * 8, `payload for dims [${dims}]`);
    return { dtype: "f64", dims, data: new Float64Array(copyAligned(raw).buffer) };
  }
  throw new FormatError(`unknown dtype code ${code} at byte ${at}`);
}

function copyAligned(raw: Buffer): Uint8Array {
  // Typed-array views need aligned offsets; a fresh copy guarantees it.
  return new Uint8Array(raw);
}

export function encodeContainer(records: Record[]): Buffer {
  const head = Buffer.alloc(8);
  head.write(MAGIC, 0, "ascii");
  head.writeUInt32LE(VERSION, 4);
  return Buffer.concat([head, ...records.map(encodeRecord)]);
}

export function decodeContainer(buf: Buffer): Record[] {
  const cur = new Cursor(buf);
  const magic = cur.bytes(4, "magic").toString("ascii");
  if (magic !== MAGIC) {
    throw new FormatError(`bad magic "${magic}" at byte 0, expected "${MAGIC}"`);
  }
  const version = cur.u32("version");
  if (version !== VERSION) {
    throw new FormatError(`unsupported container version ${version} at byte 4`);
  }
  const records: Record[] = [];
  while (cur.pos < buf.length) {
    records.push(decodeRecord(cur));
  }
  return records;
}

/** Encode an images+labels dataset file the training pipeline accepts. */
export function encodeDataset(images: Uint8Array, n: number,
                              labels: Uint8Array): Buffer {
  if (images.length !== n * 3 * 32 * 32) {
    throw new Error(`expected ${n * 3 * 32 * 32} pixels, got ${images.length}`);
  }
  if (labels.length !== n) {
    throw new Error(`expected ${n} labels, got ${labels.length}`);
  }
  for (const label of labels) {
    if (label > 9) throw new Error(`label ${label} outside [0, 9]`);
  }
  return encodeContainer([
    { dtype: "u8", dims: [n, 3, 32, 32], data: images },
    { dtype: "u8", dims: [n], data: labels },
  ]);
}
