/** Local pin set: placement, undo, and the GeoJSON wire format.
 *
 * Pins snap to the center of the clicked pixel so the coordinate written
 * into the document names exactly the pixel the service will sample.
 */

import { geoToPixel, inBounds, pixelToGeo } from "./geo.js";
import { Transform } from "./types.js";

export interface Pin {
  col: number;
  row: number;
  lon: number;
  lat: number;
  classId: number;
  note?: string;
}

export class PinStore {
  private pins: Pin[] = [];

  constructor(
    private width: number,
    private height: number,
    private transform: Transform,
  ) {}

  get list(): readonly Pin[] {
    return this.pins;
  }

  get size(): number {
    return this.pins.length;
  }

  /** Add a pin at the center of pixel (col, row); null if out of raster. */
  place(col: number, row: number, classId: number, note?: string): Pin | null {
    col = Math.floor(col);
    row = Math.floor(row);
    if (!inBounds(this.width, this.height, col, row)) return null;
    const [lon, lat] = pixelToGeo(this.transform, col, row);
    const pin: Pin = { col, row, lon, lat, classId };
    if (note !== undefined) pin.note = note;
    this.pins.push(pin);
    return pin;
  }

  undo(): Pin | undefined {
    return this.pins.pop();
  }

  clear(): void {
    this.pins = [];
  }

  /** Pins per class id, zero-filled for every legend entry. */
  counts(legend: Record<string, string>): Map<number, number> {
    const out = new Map<number, number>();
    for (const id of Object.keys(legend)) out.set(Number(id), 0);
    for (const p of this.pins) out.set(p.classId, (out.get(p.classId) ?? 0) + 1);
    return out;
  }

  /**
   * Serialize as a GeoJSON FeatureCollection with a top-level legend
   * member. Deterministic: same pins, same bytes.
   */
  toGeoJSON(legend: Record<string, string>): string {
    const doc = {
      type: "FeatureCollection",
      legend: sortedLegend(legend),
      features: this.pins.map((p) => ({
        type: "Feature",
        geometry: { type: "Point", coordinates: [p.lon, p.lat] },
        properties:
          p.note === undefined
            ? { class: p.classId }
            : { class: p.classId, note: p.note },
      })),
    };
    return JSON.stringify(doc, null, 2) + "\n";
  }

  /**
   * Replace the store with the pins of a GeoJSON document. Returns the
   * legend found (or synthesized) in the document. Throws on anything
   * that is not a Point FeatureCollection with integer class labels.
   */
  fromGeoJSON(text: string): Record<string, string> {
    const doc = JSON.parse(text);
    if (!doc || typeof doc !== "object" || doc.type !== "FeatureCollection") {
      throw new Error("not a FeatureCollection");
    }
    const features = doc.features;
    if (!Array.isArray(features)) throw new Error("features must be an array");
    const pins: Pin[] = [];
    for (const f of features) {
      const geom = f?.geometry;
      if (!geom || geom.type !== "Point") {
        throw new Error(`only Point features supported, got ${geom?.type ?? "nothing"}`);
      }
      const coords = geom.coordinates;
      if (!Array.isArray(coords) || coords.length !== 2) {
        throw new Error("Point needs [lon, lat] coordinates");
      }
      const cls = f?.properties?.class;
      if (typeof cls !== "number" || !Number.isInteger(cls) || cls < 0) {
        throw new Error(`class must be a non-negative integer, got ${JSON.stringify(cls)}`);
      }
      const [lon, lat] = coords as [number, number];
      const [col, row] = geoToPixel(this.transform, lon, lat);
      const pin: Pin = { col, row, lon, lat, classId: cls };
      const note = f?.properties?.note;
      if (typeof note === "string") pin.note = note;
      pins.push(pin);
    }
    let legend: Record<string, string>;
    if (doc.legend && typeof doc.legend === "object") {
      legend = sortedLegend(doc.legend);
    } else {
      legend = {};
      for (const p of pins) legend[String(p.classId)] = `class_${p.classId}`;
      legend = sortedLegend(legend);
    }
    this.pins = pins;
    return legend;
  }
}

function sortedLegend(legend: Record<string, string>): Record<string, string> {
  const out: Record<string, string> = {};
  for (const id of Object.keys(legend).sort((a, b) => Number(a) - Number(b))) {
    out[id] = String(legend[id]);
  }
  return out;
}
