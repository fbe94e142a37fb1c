/** Test fixture builders: a minimal level-5 MAT writer and sample data. */

import * as zlib from "zlib";

const MI_INT8 = 1;
const MI_UINT8 = 2;
const MI_INT32 = 5;
const MI_UINT32 = 6;
const MI_DOUBLE = 9;
const MI_MATRIX = 14;
const MI_COMPRESSED = 15;

const CLASS_CODES: Record<string, number> = { uint8: 9, double: 6 };
const DATA_TYPES: Record<string, number> = { uint8: MI_UINT8, double: MI_DOUBLE };

export type FixtureVar = {
  name: string;
  dims: number[];
  /** Column-major values, MATLAB layout. */
  values: number[] | Uint8Array | Float64Array;
  klass: "uint8" | "double";
};

function padTo8(buf: Buffer): Buffer {
  const rem = buf.length % 8;
  return rem === 0 ? buf : Buffer.concat([buf, Buffer.alloc(8 - rem)]);
}

function element(type: number, data: Buffer): Buffer {
  const tag = Buffer.alloc(8);
  tag.writeUInt32LE(type, 0);
  tag.writeUInt32LE(data.length, 4);
  return Buffer.concat([tag, padTo8(data)]);
}

function matrixElement(v: FixtureVar): Buffer {
  const flags = Buffer.alloc(8);
  flags.writeUInt32LE(CLASS_CODES[v.klass], 0);
  const dims = Buffer.alloc(4 * v.dims.length);
  v.dims.forEach((d, i) => dims.writeInt32LE(d, 4 * i));
  const name = Buffer.from(v.name, "ascii");

  let payload: Buffer;
  if (v.klass === "uint8") {
    payload = Buffer.from(Uint8Array.from(v.values as ArrayLike<number>));
  } else {
    const f = Float64Array.from(v.values as ArrayLike<number>);
    payload = Buffer.from(f.buffer, f.byteOffset, f.byteLength);
  }
  const body = Buffer.concat([
    element(MI_UINT32, flags),
    element(MI_INT32, dims),
    element(MI_INT8, name),
    element(DATA_TYPES[v.klass], payload),
  ]);
  return element(MI_MATRIX, body);
}

export function writeMat(vars: FixtureVar[], compressed = false): Buffer {
  const header = Buffer.alloc(128, 0x20);
  header.write("MATLAB 5.0 MAT-file, svhn-tools test fixture", 0, "ascii");
  header.writeUInt16LE(0x0100, 124);
  header.write("IM", 126, "ascii");
  const elements = vars.map((v) => {
    const el = matrixElement(v);
    if (!compressed) {
      return el;
    }
    return element(MI_COMPRESSED, zlib.deflateSync(el));
  });
  return Buffer.concat([header, ...elements]);
}

/** Deterministic pseudo-random cropped-digit fixture in MATLAB layout. */
export function digitFixture(n: number, seed = 1234): {
  x: Uint8Array; y: Float64Array; rowMajor: Uint8Array; labels: Uint8Array;
} {
  let state = seed >>> 0;
  const next = () => {
    // xorshift32; plenty for fixture noise
    state ^= state << 13; state >>>= 0;
    state ^= state >> 17;
    state ^= state << 5; state >>>= 0;
    return state;
  };
  const x = new Uint8Array(32 * 32 * 3 * n);
  const rowMajor = new Uint8Array(n * 3 * 32 * 32);
  const y = new Float64Array(n);
  const labels = new Uint8Array(n);
  for (let s = 0; s < n; s++) {
    const raw = (s % 10) + 1; // 1..10 with 10 in place of zero
    y[s] = raw;
    labels[s] = raw === 10 ? 0 : raw;
    for (let c = 0; c < 3; c++) {
      for (let h = 0; h < 32; h++) {
        for (let w = 0; w < 32; w++) {
          const value = next() & 0xff;
          x[h + 32 * (w + 32 * (c + 3 * s))] = value;
          rowMajor[w + 32 * (h + 32 * (c + 3 * s))] = value;
        }
      }
    }
  }
  return { x, y, rowMajor, labels };
}
