import { mkdtempSync, writeFileSync } from "node:fs";
import os from "node:os";
import path from "node:path";
import { PNG } from "pngjs";

import { SidecarEntry } from "../src/sidecar.js";

/** P5 with the given pixel bytes, row-major. */
export function pgmBuffer(width: number, height: number, bytes: number[]): Buffer {
  return Buffer.concat([
    Buffer.from(`P5\n${width} ${height}\n255\n`, "ascii"),
    Buffer.from(bytes),
  ]);
}

/** Solid-color RGB png. */
export function pngBuffer(width: number, height: number, rgb: [number, number, number]): Buffer {
  const png = new PNG({ width, height });
  for (let i = 0; i < width * height; i++) {
    png.data[i * 4] = rgb[0];
    png.data[i * 4 + 1] = rgb[1];
    png.data[i * 4 + 2] = rgb[2];
    png.data[i * 4 + 3] = 255;
  }
  return PNG.sync.write(png);
}

export function tmpdir(prefix: string): string {
  return mkdtempSync(path.join(os.tmpdir(), prefix));
}

export interface FixtureImage {
  name: string;
  bytes: Buffer;
  sidecar?: SidecarEntry;
}

/** Write images plus their sidecar into a fresh directory. */
export function imageDir(images: FixtureImage[], sidecarName = "sidecar.json"): string {
  const dir = tmpdir("bridge-imgs-");
  const sidecar: Record<string, SidecarEntry> = {};
  for (const img of images) {
    writeFileSync(path.join(dir, img.name), img.bytes);
    if (img.sidecar) sidecar[img.name] = img.sidecar;
  }
  writeFileSync(path.join(dir, sidecarName), JSON.stringify(sidecar, null, 1));
  return dir;
}

/** Ten decodable images with well-spread capture times. */
export function tenImages(): FixtureImage[] {
  const times = [
    "00:15", "02:40", "05:05", "07:30", "09:55",
    "12:20", "14:45", "17:10", "19:35", "23:50",
  ];
  return times.map((time, i) => {
    const name = `img${String(i).padStart(2, "0")}.${i % 3 === 0 ? "png" : "pgm"}`;
    const shade = 20 + 21 * i;
    const bytes = name.endsWith(".png")
      ? pngBuffer(8, 6, [shade, (shade * 2) % 256, (shade * 3) % 256])
      : pgmBuffer(9, 7, Array.from({ length: 63 }, (_, p) => (shade + p) % 256));
    const sidecar: SidecarEntry =
      i % 2 === 0
        ? { time, lat: 40 + i / 10, lon: -74 + i, date: "2017-06-01", brightness: 10 * i }
        : { time };
    return { name, bytes, sidecar };
  });
}
