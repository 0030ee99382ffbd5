import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type {
  AnomalyList,
  Explanation,
  LatentMapPayload,
  Meta,
  RowPayload,
} from "../src/types.js";

const root = join(dirname(fileURLToPath(import.meta.url)), "..", "fixtures");

function load<T>(name: string): T {
  return JSON.parse(readFileSync(join(root, name), "utf-8")) as T;
}

export const explanationFixture = (): Explanation => load("explain.json");
export const neighborRowsFixture = (): RowPayload[] => load("neighbor_rows.json");
export const latentFixture = (): LatentMapPayload => load("latent.json");
export const anomaliesFixture = (): AnomalyList => load("anomalies.json");
export const metaFixture = (): Meta => load("meta.json");
