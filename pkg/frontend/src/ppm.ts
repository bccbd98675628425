/** Binary PPM (P6) decoding for the service's render endpoints. */

export interface RgbImage {
  width: number;
  height: number;
  rgb: Uint8Array; // 3 bytes per pixel, row-major
}

function isSpace(b: number): boolean {
  return b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d || b === 0x0b || b === 0x0c;
}

/**
 * Decode a P6 image. Header tokens may be separated by any whitespace and
 * '#' comment lines; only maxval 255 is accepted.
 */
export function decodeP6(bytes: Uint8Array): RgbImage {
  let pos = 0;
  const token = (): string => {
    while (pos < bytes.length) {
      if (bytes[pos] === 0x23) {
        // comment runs to end of line
        while (pos < bytes.length && bytes[pos] !== 0x0a) pos++;
      } else if (isSpace(bytes[pos])) {
        pos++;
      } else {
        break;
      }
    }
    const start = pos;
    while (pos < bytes.length && !isSpace(bytes[pos]) && bytes[pos] !== 0x23) pos++;
    if (pos === start) throw new Error("truncated PPM header");
    return String.fromCharCode(...bytes.subarray(start, pos));
  };

  if (token() !== "P6") throw new Error("not a P6 PPM");
  const width = Number(token());
  const height = Number(token());
  const maxval = Number(token());
  if (!Number.isInteger(width) || !Number.isInteger(height) || width <= 0 || height <= 0) {
    throw new Error("bad PPM dimensions");
  }
  if (maxval !== 255) throw new Error(`unsupported PPM maxval ${maxval}`);
  pos++; // single whitespace byte after maxval, then raw samples
  const body = bytes.subarray(pos);
  if (body.length < width * height * 3) {
    throw new Error(`PPM body too short: ${body.length} < ${width * height * 3}`);
  }
  return { width, height, rgb: body.slice(0, width * height * 3) };
}

/** Expand to RGBA for ImageData, alpha forced opaque. */
export function toRgba(img: RgbImage): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(new ArrayBuffer(img.width * img.height * 4));
  for (let i = 0, j = 0; i < img.rgb.length; i += 3, j += 4) {
    out[j] = img.rgb[i];
    out[j + 1] = img.rgb[i + 1];
    out[j + 2] = img.rgb[i + 2];
    out[j + 3] = 255;
  }
  return out;
}

export function pixelColor(img: RgbImage, col: number, row: number): [number, number, number] {
  const i = (row * img.width + col) * 3;
  return [img.rgb[i], img.rgb[i + 1], img.rgb[i + 2]];
}

/**
 * Invert a class palette: exact RGB match back to the class id, null for
 * colors outside the palette (e.g. the black nodata fill).
 */
export function classOfColor(
  palette: Record<string, number[]>,
  rgb: [number, number, number],
): number | null {
  for (const [id, c] of Object.entries(palette)) {
    if (c[0] === rgb[0] && c[1] === rgb[1] && c[2] === rgb[2]) return Number(id);
  }
  return null;
}
