/**
 * On-disk interchange formats, byte-compatible with the ticl toolkit.
 *
 * Two formats, both written atomically (temp file in the destination
 * directory, then rename):
 *
 *   feature file   20-byte header (magic "TICF", u32 version, u64 count,
 *                  u32 dim, all little-endian) followed by count*dim
 *                  float32 values row-major.
 *   metadata file  newline-delimited JSON, one record per line, aligned
 *                  by line order with the feature file rows.
 *
 * The reader here exists so the bridge can verify its own output and so
 * tests can round-trip without the Python side installed; it rejects
 * malformed input with errors that name the byte offset at fault.
 */
import { mkdtempSync, readFileSync, renameSync, rmSync, writeFileSync } from "node:fs";
import path from "node:path";

export const FEATURE_MAGIC = "TICF";
export const FEATURE_VERSION = 1;
export const HEADER_BYTES = 20;

export interface MetaRecord {
  id: string;
  /** "HH:MM" local clock time, copied verbatim from the sidecar. */
  time: string;
  lat: number | null;
  lon: number | null;
  /** "YYYY-MM-DD" capture date, or null when the sidecar omits it. */
  date: string | null;
  brightness: number | null;
}

/** Write so a crash never leaves a half-written file behind. */
export function atomicWriteSync(filePath: string, data: Buffer | string): void {
  const dir = path.dirname(filePath) || ".";
  const tmpDir = mkdtempSync(path.join(dir, ".tmp-"));
  const tmp = path.join(tmpDir, "out");
  try {
    writeFileSync(tmp, data);
    renameSync(tmp, filePath);
  } finally {
    rmSync(tmpDir, { recursive: true, force: true });
  }
}

export function packFeatureFile(rows: readonly Float32Array[], dim: number): Buffer {
  if (!Number.isInteger(dim) || dim <= 0) {
    throw new Error(`feature dim must be a positive integer, got ${dim}`);
  }
  const header = Buffer.alloc(HEADER_BYTES);
  header.write(FEATURE_MAGIC, 0, "ascii");
  header.writeUInt32LE(FEATURE_VERSION, 4);
  header.writeBigUInt64LE(BigInt(rows.length), 8);
  header.writeUInt32LE(dim, 16);
  const payload = Buffer.alloc(rows.length * dim * 4);
  rows.forEach((row, i) => {
    if (row.length !== dim) {
      throw new Error(`feature row ${i} has ${row.length} values, expected ${dim}`);
    }
    for (let j = 0; j < dim; j++) {
      const v = row[j];
      if (!Number.isFinite(v)) {
        throw new Error(`feature row ${i} contains non-finite values`);
      }
      payload.writeFloatLE(v, (i * dim + j) * 4);
    }
  });
  return Buffer.concat([header, payload]);
}

export function writeFeatureFile(
  filePath: string,
  rows: readonly Float32Array[],
  dim: number,
): void {
  atomicWriteSync(filePath, packFeatureFile(rows, dim));
}

export interface FeatureFile {
  dim: number;
  rows: Float32Array[];
}

export function readFeatureFile(filePath: string): FeatureFile {
  const data = readFileSync(filePath);
  if (data.length < HEADER_BYTES) {
    throw new Error(
      `${filePath}: file is ${data.length} bytes, shorter than the ` +
        `${HEADER_BYTES}-byte header`,
    );
  }
  const magic = data.toString("ascii", 0, 4);
  if (magic !== FEATURE_MAGIC) {
    throw new Error(
      `${filePath}: bad magic ${JSON.stringify(magic)} at byte 0, expected "TICF"`,
    );
  }
  const version = data.readUInt32LE(4);
  if (version !== FEATURE_VERSION) {
    throw new Error(
      `${filePath}: unsupported format version ${version}, expected ${FEATURE_VERSION}`,
    );
  }
  const count = Number(data.readBigUInt64LE(8));
  const dim = data.readUInt32LE(16);
  if (dim === 0) {
    throw new Error(`${filePath}: header declares dim 0`);
  }
  const expected = count * dim * 4;
  const actual = data.length - HEADER_BYTES;
  if (actual !== expected) {
    throw new Error(
      `${filePath}: header declares ${count} rows x ${dim} dims ` +
        `(${expected} payload bytes) but file holds ${actual}`,
    );
  }
  const rows: Float32Array[] = [];
  for (let i = 0; i < count; i++) {
    const row = new Float32Array(dim);
    for (let j = 0; j < dim; j++) {
      row[j] = data.readFloatLE(HEADER_BYTES + (i * dim + j) * 4);
    }
    rows.push(row);
  }
  return { dim, rows };
}

/** One metadata line, keys in the order the ticl writer uses. */
export function metaLine(rec: MetaRecord): string {
  return JSON.stringify({
    id: rec.id,
    time: rec.time,
    lat: rec.lat,
    lon: rec.lon,
    date: rec.date,
    brightness: rec.brightness,
  });
}

export function writeMetaFile(filePath: string, records: readonly MetaRecord[]): void {
  const lines = records.map(metaLine);
  atomicWriteSync(filePath, lines.length ? lines.join("\n") + "\n" : "");
}

export function readMetaFile(filePath: string): MetaRecord[] {
  const text = readFileSync(filePath, "utf-8");
  const out: MetaRecord[] = [];
  text.split("\n").forEach((line, idx) => {
    if (!line.trim()) return;
    let obj: unknown;
    try {
      obj = JSON.parse(line);
    } catch (e) {
      throw new Error(`${filePath}: line ${idx + 1}: invalid JSON: ${(e as Error).message}`);
    }
    const rec = obj as Record<string, unknown>;
    if (typeof rec !== "object" || rec === null || typeof rec.id !== "string" || !rec.id) {
      throw new Error(`${filePath}: line ${idx + 1}: missing or empty 'id'`);
    }
    if (typeof rec.time !== "string") {
      throw new Error(`${filePath}: line ${idx + 1}: missing 'time' string`);
    }
    out.push({
      id: rec.id,
      time: rec.time,
      lat: (rec.lat as number | null | undefined) ?? null,
      lon: (rec.lon as number | null | undefined) ?? null,
      date: (rec.date as string | null | undefined) ?? null,
      brightness: (rec.brightness as number | null | undefined) ?? null,
    });
  });
  return out;
}
