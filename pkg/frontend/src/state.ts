/** App controller: labeling session state and the calls behind each button.
 *
 * All numbers on screen originate from the service; this layer only
 * sequences requests, caches decoded renders by their query string, and
 * enforces the one-job-at-a-time rule client-side (the service enforces
 * it too and answers 409).
 */

import { ApiError, Client } from "./api.js";
import { Pin, PinStore } from "./pins.js";
import { classOfColor, decodeP6, pixelColor, RgbImage } from "./ppm.js";
import { buildComparePanel, ComparePanel } from "./report.js";
import { Meta, Source, TrainParams } from "./types.js";

export interface Status {
  kind: "idle" | "working" | "ok" | "error";
  message: string;
}

export class App {
  source: Source = "fused";
  opacity = 0.6; // overlay default keeps base and class map both readable
  activeClass = 0;
  status: Status = { kind: "idle", message: "" };
  compareText: string | null = null;
  panel: ComparePanel | null = null;
  lastValidatedRef: "scene" | "stored" | null = null;

  private busy = false;
  private version = 0; // bumped per retrain, busts render cache
  private renderCache = new Map<string, RgbImage>();
  private overlayVersions = new Map<Source, number>();
  private listeners: (() => void)[] = [];

  constructor(
    public client: Client,
    public meta: Meta,
    public pins: PinStore,
  ) {
    const ids = Object.keys(meta.legend).map(Number);
    if (ids.length > 0) this.activeClass = Math.min(...ids);
  }

  onChange(fn: () => void): void {
    this.listeners.push(fn);
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  private setStatus(kind: Status["kind"], message: string): void {
    this.status = { kind, message };
    this.notify();
  }

  get isBusy(): boolean {
    return this.busy;
  }

  /** Decoded base composite, fetched once per query string. */
  async composite(): Promise<RgbImage> {
    return this.cachedRender(this.client.compositeUrl("optical"));
  }

  /** Decoded class-map overlay for a source, if one has been made. */
  overlay(source: Source): RgbImage | null {
    const v = this.overlayVersions.get(source);
    if (v === undefined) return null;
    return this.renderCache.get(this.client.classmapUrl(source, v)) ?? null;
  }

  private async cachedRender(url: string): Promise<RgbImage> {
    const hit = this.renderCache.get(url);
    if (hit) return hit;
    const img = decodeP6(await this.client.fetchBytes(url));
    this.renderCache.set(url, img);
    return img;
  }

  setSource(source: Source): void {
    // swapping sources keeps pins and cached overlays
    this.source = source;
    this.notify();
  }

  setOpacity(value: number): void {
    this.opacity = Math.min(1, Math.max(0, value));
    this.notify();
  }

  setActiveClass(id: number): void {
    this.activeClass = id;
    this.notify();
  }

  /** Place a pin of the active class; false when the click missed the raster. */
  placePin(col: number, row: number): boolean {
    const pin = this.pins.place(col, row, this.activeClass);
    if (pin === null) {
      this.setStatus("error", "click outside the raster, pin ignored");
      return false;
    }
    this.setStatus("idle", `pin ${this.pins.size}: class ${pin.classId} at pixel (${pin.col}, ${pin.row})`);
    return true;
  }

  undoPin(): void {
    const gone = this.pins.undo();
    this.setStatus("idle", gone ? `removed pin at (${gone.col}, ${gone.row})` : "no pins to undo");
  }

  /** Legend classes that still have no pin; training needs all of them. */
  missingClasses(): string[] {
    const counts = this.pins.counts(this.meta.legend);
    const missing: string[] = [];
    for (const [id, n] of counts) {
      if (n === 0) missing.push(this.meta.legend[String(id)]);
    }
    return missing;
  }

  exportGeoJSON(): string {
    return this.pins.toGeoJSON(this.meta.legend);
  }

  importGeoJSON(text: string): void {
    this.pins.fromGeoJSON(text);
    this.setStatus("ok", `imported ${this.pins.size} pins`);
  }

  /**
   * The labeling loop's train step: push pins, train, classify, fetch the
   * overlay. Refuses to start while another job is in flight or when a
   * class has no pin yet.
   */
  async trainAndOverlay(source: Source, params: TrainParams = {}): Promise<boolean> {
    const missing = this.missingClasses();
    if (missing.length > 0) {
      this.setStatus("error", `need at least one pin per class, missing: ${missing.join(", ")}`);
      return false;
    }
    return this.job(`training ${source}`, async () => {
      await this.client.postSamples(this.exportGeoJSON());
      await this.client.train(source, params);
      await this.client.classify(source);
      this.version++;
      this.overlayVersions.set(source, this.version);
      await this.cachedRender(this.client.classmapUrl(source, this.version));
      // stale reports would lie next to the fresh overlay
      this.compareText = null;
      this.panel = null;
      this.setStatus("ok", `${source} model trained and classified`);
    });
  }

  /** Validate every trained model, then pull the comparison payload. */
  async validateAndReport(samplesRef: "scene" | "stored" = "scene"): Promise<boolean> {
    return this.job("validating", async () => {
      await this.client.validate(samplesRef);
      const { text } = await this.client.compareRaw();
      this.compareText = text;
      this.panel = buildComparePanel(text);
      this.lastValidatedRef = samplesRef;
      this.setStatus("ok", `validated against ${samplesRef} samples`);
    });
  }

  /**
   * Pins whose class disagrees with the service's class map at their
   * pixel, read from the cached overlay render (palette inverted). Only
   * meaningful right after validating the stored pins.
   */
  misclassifiedPins(source: Source): Pin[] {
    const img = this.overlay(source);
    if (img === null) return [];
    const out: Pin[] = [];
    for (const p of this.pins.list) {
      const predicted = classOfColor(this.meta.palette, pixelColor(img, p.col, p.row));
      if (predicted !== p.classId) out.push(p);
    }
    return out;
  }

  private async job(label: string, work: () => Promise<void>): Promise<boolean> {
    if (this.busy) {
      this.setStatus("error", `busy with the previous job, ${label} skipped`);
      return false;
    }
    this.busy = true;
    this.setStatus("working", label);
    try {
      await work();
      return true;
    } catch (e) {
      if (e instanceof ApiError && e.status === 409) {
        this.setStatus("error", "service is busy, try again in a moment");
      } else if (e instanceof ApiError) {
        this.setStatus("error", `${e.kind}: ${e.message}`);
      } else {
        this.setStatus("error", String(e));
      }
      return false;
    } finally {
      this.busy = false;
      this.notify();
    }
  }
}
