import type {
  AnomalyList,
  Explanation,
  LatentMapPayload,
  Meta,
  RowPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function getJson<T>(url: string): Promise<T> {
  const response = await fetch(url);
  if (!response.ok) {
    throw new ApiError(response.status, `${url} -> ${response.status}`);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  fetchMeta(): Promise<Meta> {
    return getJson(`${this.baseUrl}/meta`);
  }

  fetchAnomalies(k: number): Promise<AnomalyList> {
    return getJson(`${this.baseUrl}/anomalies?k=${k}`);
  }

  fetchExplanation(row: number): Promise<Explanation> {
    return getJson(`${this.baseUrl}/explain/${row}`);
  }

  fetchLatentMap(): Promise<LatentMapPayload> {
    return getJson(`${this.baseUrl}/latent`);
  }

  fetchRow(row: number): Promise<RowPayload> {
    return getJson(`${this.baseUrl}/rows/${row}`);
  }

  async fetchNeighborRows(rows: number[]): Promise<RowPayload[]> {
    return Promise.all(rows.map((r) => this.fetchRow(r)));
  }
}
