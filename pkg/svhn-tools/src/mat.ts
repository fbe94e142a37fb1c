/**
 * Minimal MATLAB level-5 MAT-file reader, covering what the cropped-digit
 * distribution actually uses: little-endian numeric arrays (uint8 pixels,
 * uint8/double labels), optionally zlib-compressed elements.
 */

import * as zlib from "zlib";

export class MatFormatError extends Error {}

// Data-element type codes.
const MI_INT8 = 1;
const MI_UINT8 = 2;
const MI_INT16 = 3;
const MI_UINT16 = 4;
const MI_INT32 = 5;
const MI_UINT32 = 6;
const MI_SINGLE = 7;
const MI_DOUBLE = 9;
const MI_MATRIX = 14;
const MI_COMPRESSED = 15;
const MI_UTF8 = 16;

export type MatArray = {
  name: string;
  /** MATLAB dimension order (column-major). */
  dims: number[];
  /** Values flattened in MATLAB's column-major order. */
  values: Float64Array;
  /** Class name of the stored array, e.g. "uint8" or "double". */
  klass: string;
};

const CLASS_NAMES: Record<number, string> = {
  6: "double", 7: "single", 8: "int8", 9: "uint8", 10: "int16",
  11: "uint16", 12: "int32", 13: "uint32",
};

type Element = { type: number; data: Buffer };

function readElement(buf: Buffer, pos: number): { el: Element; next: number } {
  if (pos + 8 > buf.length) {
    throw new MatFormatError(`truncated element tag at byte ${pos}`);
  }
  const word = buf.readUInt32LE(pos);
  const small = word >>> 16;
  if (small !== 0) {
    // Small data element: size and data packed into the 8-byte tag.
    const type = word & 0xffff;
    const size = small;
    const data = buf.subarray(pos + 4, pos + 4 + size);
    return { el: { type, data: Buffer.from(data) }, next: pos + 8 };
  }
  const type = word;
  const size = buf.readUInt32LE(pos + 4);
  if (pos + 8 + size > buf.length) {
    throw new MatFormatError(
      `element at byte ${pos} declares ${size} bytes but only ` +
      `${buf.length - pos - 8} remain`);
  }
  const data = Buffer.from(buf.subarray(pos + 8, pos + 8 + size));
  // Elements are padded to 8-byte boundaries.
  const next = pos + 8 + Math.ceil(size / 8) * 8;
  return { el: { type, data }, next };
}

function numericValues(type: number, data: Buffer): Float64Array {
  const out = () => new Float64Array(count);
  let count: number;
  switch (type) {
    case MI_INT8: {
      count = data.length;
      const v = out();
      for (let i = 0; i < count; i++) v[i] = data.readInt8(i);
      return v;
    }
    case MI_UINT8:
    case MI_UTF8: {
      count = data.length;
      const v = out();
      for (let i = 0; i < count; i++) v[i] = data[i];
      return v;
    }
    case MI_INT16: {
      count = data.length >> 1;
      const v = out();
      for (let i = 0; i < count; i++) v[i] = data.readInt16LE(2 * i);
      return v;
    }
    case MI_UINT16: {
      count = data.length >> 1;
      const v = out();
      for (let i = 0; i < count; i++) v[i] = data.readUInt16LE(2 * i);
      return v;
    }
    case MI_INT32: {
      count = data.length >> 2;
      const v = out();
      for (let i = 0; i < count; i++) v[i] = data.readInt32LE(4 * i);
      return v;
    }
    case MI_UINT32: {
      count = data.length >> 2;
      const v = out();
      for (let i = 0; i < count; i++) v[i] = data.readUInt32LE(4 * i);
      return v;
    }
    case MI_SINGLE: {
      count = data.length >> 2;
      const v = out();
      for (let i = 0; i < count; i++) v[i] = data.readFloatLE(4 * i);
      return v;
    }
    case MI_DOUBLE: {
      count = data.length >> 3;
      const v = out();
      for (let i = 0; i < count; i++) v[i] = data.readDoubleLE(8 * i);
      return v;
    }
    default:
      throw new MatFormatError(`unsupported numeric element type ${type}`);
  }
}

function parseMatrix(data: Buffer): MatArray {
  let pos = 0;
  const flags = readElement(data, pos);
  if (flags.el.type !== MI_UINT32 || flags.el.data.length < 8) {
    throw new MatFormatError("matrix is missing its array-flags element");
  }
  const klassCode = flags.el.data.readUInt32LE(0) & 0xff;
  const klass = CLASS_NAMES[klassCode];
  if (!klass) {
    throw new MatFormatError(
      `unsupported array class ${klassCode} (only plain numeric arrays)`);
  }
  pos = flags.next;

  const dimsEl = readElement(data, pos);
  if (dimsEl.el.type !== MI_INT32) {
    throw new MatFormatError("matrix is missing its dimensions element");
  }
  const dims: number[] = [];
  for (let i = 0; i + 4 <= dimsEl.el.data.length; i += 4) {
    dims.push(dimsEl.el.data.readInt32LE(i));
  }
  pos = dimsEl.next;

  const nameEl = readElement(data, pos);
  const name = nameEl.el.data.toString("ascii");
  pos = nameEl.next;

  const realEl = readElement(data, pos);
  const values = numericValues(realEl.el.type, realEl.el.data);
  const expected = dims.reduce((a, b) => a * b, 1);
  if (values.length !== expected) {
    throw new MatFormatError(
      `array "${name}" declares dims [${dims}] (${expected} values) but ` +
      `stores ${values.length}`);
  }
  return { name, dims, values, klass };
}

/** Parse every top-level numeric array of a level-5 MAT file. */
export function parseMat(buf: Buffer): MatArray[] {
  if (buf.length < 128) {
    throw new MatFormatError(`file too short for a MAT header: ${buf.length} bytes`);
  }
  const version = buf.readUInt16LE(124);
  const endian = buf.toString("ascii", 126, 128);
  if (endian === "MI") {
    throw new MatFormatError("big-endian MAT files are not supported");
  }
  if (endian !== "IM" || version !== 0x0100) {
    throw new MatFormatError(
      `not a level-5 MAT file (version 0x${version.toString(16)}, ` +
      `endian "${endian}")`);
  }
  const arrays: MatArray[] = [];
  let pos = 128;
  while (pos < buf.length) {
    const { el, next } = readElement(buf, pos);
    pos = next;
    if (el.type === MI_COMPRESSED) {
      const inflated = zlib.inflateSync(el.data);
      const inner = readElement(inflated, 0);
      if (inner.el.type === MI_MATRIX) {
        arrays.push(parseMatrix(inner.el.data));
      }
    } else if (el.type === MI_MATRIX) {
      arrays.push(parseMatrix(el.data));
    }
    // Other top-level element types carry no array data; skip them.
  }
  return arrays;
}
