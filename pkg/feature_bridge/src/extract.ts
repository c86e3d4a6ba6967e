/**
 * The extraction pass: image directory in, feature/metadata pair out.
 *
 * Images are processed in sorted filename order so a rerun over the same
 * directory with the same backbone version produces byte-identical
 * output. Images that cannot be decoded, or that have no usable capture
 * time in the sidecar, are skipped with a logged reason and recorded in
 * the returned manifest; they never produce an output row. Clock times
 * are copied into the metadata exactly as the sidecar spells them.
 */
import { readdirSync, readFileSync } from "node:fs";
import path from "node:path";

import { DEFAULT_BACKBONE, getBackbone } from "./backbone.js";
import { MetaRecord, writeFeatureFile, writeMetaFile } from "./formats.js";
import { decodeRaster, rasterExtensions, resizeBilinear } from "./raster.js";
import { readSidecar, SIDECAR_NAME, SidecarEntry } from "./sidecar.js";

/** Raised when a run produces nothing worth writing. */
export class ExtractError extends Error {}

export interface ManifestImage {
  path: string;
  dim: number;
  /** Which metadata field supplied the local time. */
  timeSource: string;
  lat: number | null;
  lon: number | null;
}

export interface SkippedImage {
  path: string;
  reason: string;
}

export interface BridgeManifest {
  backbone: { name: string; version: string; dim: number };
  images: ManifestImage[];
  skipped: SkippedImage[];
}

export interface ExtractOptions {
  backbone?: string;
  sidecar?: string;
  log?: (message: string) => void;
}

const TIME_RE = /^(\d{1,2}):(\d{2})$/;
const TIME_SOURCE = "sidecar:time";

/** null when usable, otherwise the reason the image must be skipped. */
function timeProblem(entry: SidecarEntry | undefined): string | null {
  if (!entry || entry.time === undefined) {
    return "missing time";
  }
  const m = TIME_RE.exec(entry.time.trim());
  if (m === null) {
    return `malformed time ${JSON.stringify(entry.time)}, expected HH:MM`;
  }
  const hour = Number(m[1]);
  const minute = Number(m[2]);
  if (hour > 23) return `hour ${hour} out of range 00..23 in ${JSON.stringify(entry.time)}`;
  if (minute > 59) return `minute ${minute} out of range 00..59 in ${JSON.stringify(entry.time)}`;
  return null;
}

export function extract(
  imageDir: string,
  featuresPath: string,
  metaPath: string,
  options: ExtractOptions = {},
): BridgeManifest {
  const log = options.log ?? ((message: string) => console.error(message));
  const backbone = getBackbone(options.backbone ?? DEFAULT_BACKBONE);
  const sidecar = readSidecar(imageDir, options.sidecar ?? SIDECAR_NAME);

  const extensions = new Set(rasterExtensions());
  const names = readdirSync(imageDir)
    .filter((n) => extensions.has(path.extname(n).toLowerCase()))
    .sort();

  const rows: Float32Array[] = [];
  const records: MetaRecord[] = [];
  const manifest: BridgeManifest = {
    backbone: { name: backbone.name, version: backbone.version, dim: backbone.dim },
    images: [],
    skipped: [],
  };

  for (const name of names) {
    const imagePath = path.join(imageDir, name);
    const skip = (reason: string) => {
      manifest.skipped.push({ path: imagePath, reason });
      log(`skip ${imagePath}: ${reason}`);
    };

    const entry = sidecar.get(name);
    const problem = timeProblem(entry);
    if (problem !== null) {
      skip(problem);
      continue;
    }

    let raster;
    try {
      raster = decodeRaster(name, readFileSync(imagePath));
    } catch (e) {
      skip(`unreadable: ${(e as Error).message}`);
      continue;
    }

    const resized = resizeBilinear(raster, backbone.inputSize, backbone.inputSize);
    rows.push(backbone.encode(resized));
    records.push({
      id: name,
      time: entry!.time!,
      lat: entry!.lat ?? null,
      lon: entry!.lon ?? null,
      date: entry!.date ?? null,
      brightness: entry!.brightness ?? null,
    });
    manifest.images.push({
      path: imagePath,
      dim: backbone.dim,
      timeSource: TIME_SOURCE,
      lat: entry!.lat ?? null,
      lon: entry!.lon ?? null,
    });
  }

  if (rows.length === 0) {
    throw new ExtractError(
      `no usable images in ${imageDir} ` +
        `(${manifest.skipped.length} skipped, nothing to write)`,
    );
  }

  writeFeatureFile(featuresPath, rows, backbone.dim);
  writeMetaFile(metaPath, records);
  return manifest;
}
