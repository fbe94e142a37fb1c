/**
 * Convert the cropped-digit MAT distribution (X: 32x32x3xN uint8 pixels,
 * y: N labels with 10 standing in for digit zero) into the training
 * pipeline's dataset container.
 */

import * as fs from "fs";

import { encodeDataset } from "./container";
import { MatArray, MatFormatError, parseMat } from "./mat";

export type Converted = {
  n: number;
  images: Uint8Array; // (N, 3, 32, 32) row-major
  labels: Uint8Array;
};

function findArray(arrays: MatArray[], name: string): MatArray {
  const found = arrays.find((a) => a.name === name);
  if (!found) {
    const names = arrays.map((a) => a.name).join(", ") || "none";
    throw new MatFormatError(`missing variable "${name}" (found: ${names})`);
  }
  return found;
}

export function convertArrays(arrays: MatArray[]): Converted {
  const x = findArray(arrays, "X");
  const y = findArray(arrays, "y");
  if (x.dims.length !== 4 || x.dims[0] !== 32 || x.dims[1] !== 32
      || x.dims[2] !== 3) {
    throw new MatFormatError(`X must be 32x32x3xN, got [${x.dims}]`);
  }
  const n = x.dims[3];
  const yCount = y.dims.reduce((a, b) => a * b, 1);
  if (yCount !== n) {
    throw new MatFormatError(`X holds ${n} samples but y holds ${yCount} labels`);
  }

  // MATLAB stores column-major: X linear index = h + 32*(w + 32*(c + 3*n)).
  const images = new Uint8Array(n * 3 * 32 * 32);
  for (let s = 0; s < n; s++) {
    for (let c = 0; c < 3; c++) {
      const srcBase = 32 * 32 * (c + 3 * s);
      const dstBase = 32 * 32 * (c + 3 * s);
      for (let h = 0; h < 32; h++) {
        for (let w = 0; w < 32; w++) {
          images[dstBase + 32 * h + w] = x.values[srcBase + h + 32 * w];
        }
      }
    }
  }

  const labels = new Uint8Array(n);
  for (let i = 0; i < n; i++) {
    const raw = y.values[i];
    if (!Number.isInteger(raw) || raw < 1 || raw > 10) {
      throw new MatFormatError(
        `label ${raw} at index ${i} outside the 1..10 source convention`);
    }
    labels[i] = raw === 10 ? 0 : raw;
  }
  return { n, images, labels };
}

export function convertMat(matPath: string, outPath: string): Converted {
  const arrays = parseMat(fs.readFileSync(matPath));
  const converted = convertArrays(arrays);
  fs.writeFileSync(outPath,
                   encodeDataset(converted.images, converted.n, converted.labels));
  return converted;
}
