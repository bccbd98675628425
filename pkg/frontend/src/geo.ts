/** Pixel/geo mapping mirroring the service's grid arithmetic (north-up,
 * no rotation). Used only to turn clicks into lon/lat pins and pins back
 * into pixels for drawing; every classification number still comes from
 * the service.
 */

import { Transform } from "./types.js";

/** Center coordinate of pixel (col, row). */
export function pixelToGeo(t: Transform, col: number, row: number): [number, number] {
  return [t.origin_x + (col + 0.5) * t.pixel_w, t.origin_y + (row + 0.5) * t.pixel_h];
}

/** Containing pixel of a lon/lat point, no bounds clamp. */
export function geoToPixel(t: Transform, lon: number, lat: number): [number, number] {
  // + 0 turns the negative zero of floor(0 / negative pitch) into plain 0
  return [
    Math.floor((lon - t.origin_x) / t.pixel_w) + 0,
    Math.floor((lat - t.origin_y) / t.pixel_h) + 0,
  ];
}

export function inBounds(width: number, height: number, col: number, row: number): boolean {
  return col >= 0 && col < width && row >= 0 && row < height;
}

/** Box the canvas occupies on screen, in CSS pixels. */
export interface ScreenBox {
  left: number;
  top: number;
  width: number;
  height: number;
}

/**
 * Map a client-coordinate click to a raster pixel. The canvas may be
 * scaled by CSS, so scale by the ratio of raster size to screen box.
 * Returns null when the click lands outside the raster.
 */
export function clickToPixel(
  box: ScreenBox,
  width: number,
  height: number,
  clientX: number,
  clientY: number,
): [number, number] | null {
  if (box.width <= 0 || box.height <= 0) return null;
  const col = Math.floor(((clientX - box.left) / box.width) * width);
  const row = Math.floor(((clientY - box.top) / box.height) * height);
  if (!inBounds(width, height, col, row)) return null;
  return [col, row];
}
