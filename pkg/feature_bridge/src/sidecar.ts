/**
 * The per-directory JSON sidecar that carries capture metadata.
 *
 * One file per image directory, mapping each image filename to the
 * metadata recorded at capture time:
 *
 *   {
 *     "court_0800.png": {"time": "08:00", "date": "2017-06-01",
 *                        "lat": 40.71, "lon": -74.0, "brightness": 101.2},
 *     "court_1730.png": {"time": "17:30"}
 *   }
 *
 * Only "time" matters for inclusion; everything else is optional and
 * passes through verbatim. The bridge never fills in a missing field from
 * the image contents.
 */
import { readFileSync } from "node:fs";
import path from "node:path";

export interface SidecarEntry {
  time?: string;
  date?: string;
  lat?: number;
  lon?: number;
  brightness?: number;
}

export const SIDECAR_NAME = "sidecar.json";

const STRING_FIELDS = ["time", "date"] as const;
const NUMBER_FIELDS = ["lat", "lon", "brightness"] as const;

function checkEntry(name: string, raw: unknown): SidecarEntry {
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new Error(`sidecar entry for ${JSON.stringify(name)} must be an object`);
  }
  const obj = raw as Record<string, unknown>;
  const entry: SidecarEntry = {};
  for (const field of STRING_FIELDS) {
    const value = obj[field];
    if (value === undefined || value === null) continue;
    if (typeof value !== "string") {
      throw new Error(
        `sidecar entry for ${JSON.stringify(name)}: ${field} must be a string`,
      );
    }
    entry[field] = value;
  }
  for (const field of NUMBER_FIELDS) {
    const value = obj[field];
    if (value === undefined || value === null) continue;
    if (typeof value !== "number" || !Number.isFinite(value)) {
      throw new Error(
        `sidecar entry for ${JSON.stringify(name)}: ${field} must be a finite number`,
      );
    }
    entry[field] = value;
  }
  return entry;
}

export function parseSidecar(text: string): Map<string, SidecarEntry> {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (e) {
    throw new Error(`sidecar is not valid JSON: ${(e as Error).message}`);
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new Error("sidecar must be a JSON object mapping filenames to entries");
  }
  const out = new Map<string, SidecarEntry>();
  for (const [name, entry] of Object.entries(raw)) {
    out.set(name, checkEntry(name, entry));
  }
  return out;
}

export function readSidecar(
  imageDir: string,
  filename: string = SIDECAR_NAME,
): Map<string, SidecarEntry> {
  const sidecarPath = path.join(imageDir, filename);
  let text: string;
  try {
    text = readFileSync(sidecarPath, "utf-8");
  } catch {
    throw new Error(`missing sidecar ${sidecarPath}`);
  }
  try {
    return parseSidecar(text);
  } catch (e) {
    throw new Error(`${sidecarPath}: ${(e as Error).message}`);
  }
}
