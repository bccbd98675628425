/** Typed fetch wrapper for the service endpoints. */

import {
  ComparePayload,
  Meta,
  Source,
  TrainParams,
  ValidateResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public kind: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function raise(res: Response): Promise<never> {
  let kind = "HttpError";
  let message = `${res.status} ${res.statusText}`;
  try {
    const body = await res.json();
    if (body && typeof body.message === "string") {
      message = body.message;
      kind = typeof body.error === "string" ? body.error : kind;
    }
  } catch {
    // non-JSON error body, keep the status line
  }
  throw new ApiError(res.status, kind, message);
}

export class Client {
  constructor(private base = "") {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.base + path, init);
    if (!res.ok) await raise(res);
    return (await res.json()) as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.json<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  meta(): Promise<Meta> {
    return this.json<Meta>("/api/meta");
  }

  compositeUrl(source: string, fmt = "ppm"): string {
    return `${this.base}/api/render/composite?source=${source}&fmt=${fmt}`;
  }

  classmapUrl(source: Source, version: number, fmt = "ppm"): string {
    // version busts the browser/client cache after a retrain
    return `${this.base}/api/render/classmap?source=${source}&fmt=${fmt}&v=${version}`;
  }

  async fetchBytes(url: string): Promise<Uint8Array> {
    const res = await fetch(url);
    if (!res.ok) await raise(res);
    return new Uint8Array(await res.arrayBuffer());
  }

  async samplesText(): Promise<string> {
    const res = await fetch(this.base + "/api/samples");
    if (!res.ok) await raise(res);
    return await res.text();
  }

  async postSamples(text: string): Promise<{ ok: boolean; count: number }> {
    const res = await fetch(this.base + "/api/samples", {
      method: "POST",
      headers: { "content-type": "application/geo+json" },
      body: text,
    });
    if (!res.ok) await raise(res);
    return (await res.json()) as { ok: boolean; count: number };
  }

  train(source: Source, params: TrainParams = {}): Promise<{ ok: boolean }> {
    return this.post("/api/train", { source, params });
  }

  classify(source: Source): Promise<{ ok: boolean }> {
    return this.post("/api/classify", { source });
  }

  validate(samplesRef: "scene" | "stored"): Promise<ValidateResponse> {
    return this.post("/api/validate", { samples_ref: samplesRef });
  }

  /** Comparison payload as exact bytes plus the parsed object. */
  async compareRaw(): Promise<{ text: string; data: ComparePayload }> {
    const res = await fetch(this.base + "/api/report/compare");
    if (!res.ok) await raise(res);
    const text = await res.text();
    return { text, data: JSON.parse(text) as ComparePayload };
  }
}
