import { describe, expect, it } from "vitest";

import { encodeContainer } from "../src/container";
import { encodeGrayPng, renderMontage } from "../src/montage";

function lumaDump(k: number, h = 32, w = 32): Buffer {
  const data = new Float64Array(k * h * w);
  for (let i = 0; i < data.length; i++) {
    data[i] = Math.sin(i * 0.37) * 2.5;
  }
  return encodeContainer([{ dtype: "f64", dims: [k, h, w], data }]);
}

const PNG_SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

describe("encodeGrayPng", () => {
  it("emits a well-formed signature and header", () => {
    const png = encodeGrayPng(new Uint8Array(12 * 5), 12, 5);
    expect(png.subarray(0, 8).equals(PNG_SIGNATURE)).toBe(true);
    expect(png.toString("ascii", 12, 16)).toBe("IHDR");
    expect(png.readUInt32BE(16)).toBe(12);
    expect(png.readUInt32BE(20)).toBe(5);
    expect(png[24]).toBe(8);  // bit depth
    expect(png[25]).toBe(0);  // grayscale
  });

  it("rejects mismatched pixel counts", () => {
    expect(() => encodeGrayPng(new Uint8Array(10), 4, 4)).toThrow(/expected/);
  });
});

describe("renderMontage", () => {
  it("tiles k maps into a near-square grid", () => {
    const m = renderMontage(lumaDump(5));
    expect(m.tiles).toBe(5);
    expect(m.cols).toBe(3);
    expect(m.rows).toBe(2);
    expect(m.png.subarray(0, 8).equals(PNG_SIGNATURE)).toBe(true);
  });

  it("handles a single map", () => {
    const m = renderMontage(lumaDump(1, 16, 16));
    expect(m.tiles).toBe(1);
    expect(m.cols).toBe(1);
  });

  it("rejects non-luma-dump containers", () => {
    const bad = encodeContainer([
      { dtype: "u8", dims: [4], data: new Uint8Array(4) },
    ]);
    expect(() => renderMontage(bad)).toThrow(/f64/);
  });
});
