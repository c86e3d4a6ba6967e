/**
 * Raster decoding and resizing.
 *
 * Everything downstream works on one representation: interleaved RGB
 * float samples in 0..255. Grayscale sources are replicated across the
 * three channels; alpha is dropped. PGM/PPM are parsed here directly,
 * PNG and JPEG go through pngjs and jpeg-js.
 */
import jpeg from "jpeg-js";
import { PNG } from "pngjs";

export interface Raster {
  width: number;
  height: number;
  /** RGB interleaved, length width*height*3, values in 0..255. */
  pixels: Float32Array;
}

const WHITESPACE = new Set([0x20, 0x09, 0x0a, 0x0d, 0x0b, 0x0c]);

/** Read the next whitespace-delimited header token, skipping # comments. */
function nextToken(buf: Buffer, pos: number): { token: string; pos: number } {
  while (pos < buf.length) {
    if (WHITESPACE.has(buf[pos])) {
      pos++;
    } else if (buf[pos] === 0x23) {
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
    } else {
      break;
    }
  }
  const start = pos;
  while (pos < buf.length && !WHITESPACE.has(buf[pos]) && buf[pos] !== 0x23) pos++;
  if (pos === start) {
    throw new Error("truncated header");
  }
  return { token: buf.toString("ascii", start, pos), pos };
}

function parseNetpbm(buf: Buffer, magic: string, channels: number): Raster {
  let cursor = nextToken(buf, 0);
  if (cursor.token !== magic) {
    throw new Error(`bad magic ${JSON.stringify(cursor.token)}, expected ${magic}`);
  }
  const fields: number[] = [];
  for (const name of ["width", "height", "maxval"]) {
    cursor = nextToken(buf, cursor.pos);
    const value = Number(cursor.token);
    if (!Number.isInteger(value) || value <= 0) {
      throw new Error(`bad ${name} ${JSON.stringify(cursor.token)}`);
    }
    fields.push(value);
  }
  const [width, height, maxval] = fields;
  if (maxval > 255) {
    throw new Error(`maxval ${maxval} unsupported, expected <= 255`);
  }
  const start = cursor.pos + 1; // single whitespace byte ends the header
  const expected = width * height * channels;
  const actual = buf.length - start;
  if (actual < expected) {
    throw new Error(`payload holds ${Math.max(actual, 0)} bytes, expected ${expected}`);
  }
  const pixels = new Float32Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    for (let c = 0; c < 3; c++) {
      pixels[i * 3 + c] = buf[start + i * channels + (channels === 3 ? c : 0)];
    }
  }
  return { width, height, pixels };
}

export function decodePgm(buf: Buffer): Raster {
  return parseNetpbm(buf, "P5", 1);
}

export function decodePpm(buf: Buffer): Raster {
  return parseNetpbm(buf, "P6", 3);
}

function fromRgba(width: number, height: number, data: Uint8Array): Raster {
  const pixels = new Float32Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    pixels[i * 3] = data[i * 4];
    pixels[i * 3 + 1] = data[i * 4 + 1];
    pixels[i * 3 + 2] = data[i * 4 + 2];
  }
  return { width, height, pixels };
}

export function decodePng(buf: Buffer): Raster {
  const png = PNG.sync.read(buf);
  return fromRgba(png.width, png.height, png.data);
}

export function decodeJpeg(buf: Buffer): Raster {
  const img = jpeg.decode(buf, { useTArray: true, formatAsRGBA: true });
  return fromRgba(img.width, img.height, img.data);
}

const DECODERS: Record<string, (buf: Buffer) => Raster> = {
  ".pgm": decodePgm,
  ".ppm": decodePpm,
  ".png": decodePng,
  ".jpg": decodeJpeg,
  ".jpeg": decodeJpeg,
};

export function rasterExtensions(): string[] {
  return Object.keys(DECODERS).sort();
}

/** Decode by file extension; unknown extensions are the caller's problem. */
export function decodeRaster(name: string, buf: Buffer): Raster {
  const ext = name.slice(name.lastIndexOf(".")).toLowerCase();
  const decoder = DECODERS[ext];
  if (!decoder) {
    throw new Error(`no decoder for ${JSON.stringify(ext)}`);
  }
  return decoder(buf);
}

/**
 * Bilinear resample to width x height.
 *
 * Samples at pixel centers ((i + 0.5) * scale - 0.5) with edge clamping,
 * so a same-size resize is an exact copy and a constant image stays
 * constant at any size.
 */
export function resizeBilinear(img: Raster, width: number, height: number): Raster {
  if (width <= 0 || height <= 0) {
    throw new Error(`target size ${width}x${height} must be positive`);
  }
  if (img.width === width && img.height === height) {
    return { width, height, pixels: img.pixels.slice() };
  }
  const out = new Float32Array(width * height * 3);
  const sx = img.width / width;
  const sy = img.height / height;
  for (let y = 0; y < height; y++) {
    const fy = Math.min(Math.max((y + 0.5) * sy - 0.5, 0), img.height - 1);
    const y0 = Math.floor(fy);
    const y1 = Math.min(y0 + 1, img.height - 1);
    const wy = fy - y0;
    for (let x = 0; x < width; x++) {
      const fx = Math.min(Math.max((x + 0.5) * sx - 0.5, 0), img.width - 1);
      const x0 = Math.floor(fx);
      const x1 = Math.min(x0 + 1, img.width - 1);
      const wx = fx - x0;
      for (let c = 0; c < 3; c++) {
        const p00 = img.pixels[(y0 * img.width + x0) * 3 + c];
        const p01 = img.pixels[(y0 * img.width + x1) * 3 + c];
        const p10 = img.pixels[(y1 * img.width + x0) * 3 + c];
        const p11 = img.pixels[(y1 * img.width + x1) * 3 + c];
        const top = p00 + (p01 - p00) * wx;
        const bottom = p10 + (p11 - p10) * wx;
        out[(y * width + x) * 3 + c] = top + (bottom - top) * wy;
      }
    }
  }
  return { width, height, pixels: out };
}
