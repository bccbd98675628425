/** Wire shapes served by the terrafuse HTTP service. */

export interface Transform {
  origin_x: number;
  origin_y: number;
  pixel_w: number;
  pixel_h: number;
}

export type Source = "optical" | "fused";

export interface Meta {
  width: number;
  height: number;
  transform: Transform;
  bands: { optical: string[]; sar: string[]; fused: string[] };
  legend: Record<string, string>;
  palette: Record<string, number[]>;
  render: { bands: string[]; stretch: number[] };
  sources: Source[];
  trained: Record<string, boolean>;
  classified: Record<string, boolean>;
  validated: Record<string, boolean>;
  samples_stored: boolean;
}

export interface TrainParams {
  max_depth?: number;
  min_samples_leaf?: number;
  min_impurity_decrease?: number;
}

export interface MetricPair {
  optical: number;
  fused: number;
  delta: number;
}

export interface SourcePair {
  optical: number | null;
  fused: number | null;
}

export interface ComparePayload {
  format: string;
  version: number;
  legend: Record<string, string>;
  overall_accuracy: MetricPair;
  kappa: MetricPair;
  per_class: Record<string, { name: string; producers: SourcePair; users: SourcePair }>;
}

export interface ReportObj {
  format: string;
  legend: Record<string, string>;
  class_ids: number[];
  matrix: number[][];
  overall_accuracy: number;
  kappa: number;
  producers: Record<string, number | null>;
  users: Record<string, number | null>;
}

export interface ValidateResponse {
  ok: boolean;
  samples_ref: string;
  reports: Record<string, ReportObj>;
}

export interface ServiceError {
  error: string;
  message: string;
}
