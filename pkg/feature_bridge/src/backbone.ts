/**
 * Image encoders the bridge can run locally.
 *
 * A backbone maps one 224x224 RGB raster to a fixed-width float vector.
 * The deployment target is a frozen pretrained vision-language encoder
 * with a 768-wide output; its weights ship separately and plug in through
 * the Backbone interface. The built-in default is a deterministic pooled
 * color encoder with the same output contract, which keeps the full
 * pipeline runnable (and byte-reproducible) without any model download.
 *
 * Backbones emit raw outputs. No normalization happens here; the
 * consumer projects and normalizes downstream.
 */
import type { Raster } from "./raster.js";

export interface Backbone {
  readonly name: string;
  readonly version: string;
  /** Square input edge the extractor resizes to before encoding. */
  readonly inputSize: number;
  readonly dim: number;
  encode(img: Raster): Float32Array;
}

/**
 * Mean-pools the image onto a GRID x GRID lattice per RGB channel.
 *
 * Output layout is grid-major with the channel fastest:
 * out[(gy * GRID + gx) * 3 + c], values scaled to 0..1. With GRID = 16
 * the width is 16 * 16 * 3 = 768.
 */
export class PooledRgbBackbone implements Backbone {
  readonly name = "pooled-rgb-16x16";
  readonly version = "1.0";
  readonly inputSize = 224;
  readonly grid = 16;
  readonly dim = this.grid * this.grid * 3;

  encode(img: Raster): Float32Array {
    if (img.width !== this.inputSize || img.height !== this.inputSize) {
      throw new Error(
        `backbone input must be ${this.inputSize}x${this.inputSize}, ` +
          `got ${img.width}x${img.height}`,
      );
    }
    const block = this.inputSize / this.grid; // 14, exact
    const out = new Float32Array(this.dim);
    const norm = 1 / (block * block * 255);
    for (let gy = 0; gy < this.grid; gy++) {
      for (let gx = 0; gx < this.grid; gx++) {
        let r = 0;
        let g = 0;
        let b = 0;
        for (let dy = 0; dy < block; dy++) {
          const row = (gy * block + dy) * this.inputSize;
          for (let dx = 0; dx < block; dx++) {
            const p = (row + gx * block + dx) * 3;
            r += img.pixels[p];
            g += img.pixels[p + 1];
            b += img.pixels[p + 2];
          }
        }
        const base = (gy * this.grid + gx) * 3;
        out[base] = r * norm;
        out[base + 1] = g * norm;
        out[base + 2] = b * norm;
      }
    }
    return out;
  }
}

const REGISTRY: Record<string, () => Backbone> = {
  "pooled-rgb-16x16": () => new PooledRgbBackbone(),
};

export const DEFAULT_BACKBONE = "pooled-rgb-16x16";

export function backboneNames(): string[] {
  return Object.keys(REGISTRY).sort();
}

export function getBackbone(name: string = DEFAULT_BACKBONE): Backbone {
  const make = REGISTRY[name];
  if (!make) {
    throw new Error(
      `unknown backbone ${JSON.stringify(name)}, available: ${backboneNames().join(", ")}`,
    );
  }
  return make();
}
