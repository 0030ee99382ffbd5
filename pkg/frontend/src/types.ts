// Payload shapes of the screening service. The dashboard never computes a
// score itself: everything rendered comes from these fields.

export interface AttributeMeta {
  name: string;
  kind: "categorical" | "numeric";
  categories?: string[];
  mean?: number;
  std_dev?: number;
}

export interface Meta {
  schema: { version: number; attributes: AttributeMeta[] };
  model_kind: string;
  provenance: Record<string, unknown>;
  n_rows: number;
}

export interface ExplainCell {
  attribute: string;
  kind: "categorical" | "numeric";
  observed: string | number;
  expected: string | number;
  confidence: number;
}

export interface Explanation {
  row: number;
  cells: ExplainCell[];
  row_score: number;
  neighbors: number[];
  latent_xy: [number, number] | null;
}

export interface AnomalyEntry {
  row: number;
  score: number;
}

export interface AnomalyList {
  k: number;
  rows: AnomalyEntry[];
}

export interface LatentPoint {
  row: number;
  x: number;
  y: number;
  score: number;
}

export interface LatentMapPayload {
  points: LatentPoint[];
}

export interface RowPayload {
  row: number;
  values: Record<string, string | number>;
  score: number;
}
