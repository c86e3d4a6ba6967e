import { describe, expect, it } from "vitest";

import { backboneNames, getBackbone, PooledRgbBackbone } from "../src/backbone.js";
import { Raster } from "../src/raster.js";

function raster224(fill: (x: number, y: number, c: number) => number): Raster {
  const pixels = new Float32Array(224 * 224 * 3);
  for (let y = 0; y < 224; y++) {
    for (let x = 0; x < 224; x++) {
      for (let c = 0; c < 3; c++) {
        pixels[(y * 224 + x) * 3 + c] = fill(x, y, c);
      }
    }
  }
  return { width: 224, height: 224, pixels };
}

/** Plain-loop block means, the oracle the fast path must match. */
function poolOracle(img: Raster): number[] {
  const out: number[] = [];
  for (let gy = 0; gy < 16; gy++) {
    for (let gx = 0; gx < 16; gx++) {
      for (let c = 0; c < 3; c++) {
        let sum = 0;
        for (let dy = 0; dy < 14; dy++) {
          for (let dx = 0; dx < 14; dx++) {
            sum += img.pixels[((gy * 14 + dy) * 224 + gx * 14 + dx) * 3 + c];
          }
        }
        out.push(sum / (14 * 14 * 255));
      }
    }
  }
  return out;
}

describe("pooled rgb backbone", () => {
  it("declares the agreed output contract", () => {
    const bb = new PooledRgbBackbone();
    expect(bb.dim).toBe(768);
    expect(bb.inputSize).toBe(224);
    expect(bb.name).toBe("pooled-rgb-16x16");
    expect(bb.version).toBe("1.0");
  });

  it("maps a constant image to a constant vector", () => {
    const out = new PooledRgbBackbone().encode(raster224(() => 51));
    expect(out.length).toBe(768);
    for (const v of out) expect(v).toBeCloseTo(51 / 255, 6);
  });

  it("matches the plain-loop pooling oracle", () => {
    // deterministic pseudo-random pixels, no RNG dependency
    const img = raster224((x, y, c) => ((x * 31 + y * 17 + c * 101) * 7919) % 256);
    const out = new PooledRgbBackbone().encode(img);
    const oracle = poolOracle(img);
    out.forEach((v, i) => expect(v).toBeCloseTo(oracle[i], 6));
  });

  it("orders the output grid-major with the channel fastest", () => {
    // light one 14x14 block of the green channel only
    const gx = 3;
    const gy = 5;
    const img = raster224((x, y, c) =>
      c === 1 && Math.floor(x / 14) === gx && Math.floor(y / 14) === gy ? 255 : 0,
    );
    const out = new PooledRgbBackbone().encode(img);
    const hot = (gy * 16 + gx) * 3 + 1;
    out.forEach((v, i) => expect(v).toBe(i === hot ? 1 : 0));
  });

  it("is deterministic across calls", () => {
    const img = raster224((x, y, c) => (x + 2 * y + 3 * c) % 256);
    const bb = new PooledRgbBackbone();
    expect([...bb.encode(img)]).toEqual([...bb.encode(img)]);
  });

  it("rejects inputs that are not 224x224", () => {
    const bad: Raster = { width: 16, height: 16, pixels: new Float32Array(16 * 16 * 3) };
    expect(() => new PooledRgbBackbone().encode(bad)).toThrow(/must be 224x224, got 16x16/);
  });
});

describe("backbone registry", () => {
  it("serves the default by name and lists what it has", () => {
    expect(backboneNames()).toContain("pooled-rgb-16x16");
    expect(getBackbone().name).toBe("pooled-rgb-16x16");
    expect(getBackbone("pooled-rgb-16x16").dim).toBe(768);
  });

  it("rejects strangers with the available list", () => {
    expect(() => getBackbone("resnet-9000")).toThrow(/unknown backbone "resnet-9000"/);
  });
});
