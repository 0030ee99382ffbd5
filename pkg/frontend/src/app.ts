import { ApiClient } from "./api.js";
import { renderLatent } from "./latent.js";
import { renderScreening } from "./screening.js";
import { renderTopK } from "./topk.js";
import type { AnomalyList, LatentMapPayload, Meta } from "./types.js";

// Single-page wiring: a top-K sidebar plus two views (screening, latent
// map). At most one explain request is in flight per selection; stale
// responses are dropped (latest wins).

export class App {
  private selected: number | null = null;
  private requestToken = 0;
  private anomalies: AnomalyList = { k: 0, rows: [] };
  private latent: LatentMapPayload = { points: [] };
  private meta: Meta | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly dom: {
      topk: HTMLElement;
      screening: HTMLElement;
      latent: HTMLElement;
      status: HTMLElement;
      kSlider: HTMLInputElement;
      kLabel: HTMLElement;
    },
  ) {}

  async start(): Promise<void> {
    this.dom.kSlider.addEventListener("input", () => void this.onKChanged());
    this.status("loading…");
    try {
      this.meta = await this.api.fetchMeta();
      this.latent = await this.api.fetchLatentMap();
      await this.onKChanged();
      this.status(
        `${this.meta.model_kind} model, ${this.meta.n_rows} rows`,
      );
      if (this.anomalies.rows.length > 0) {
        await this.select(this.anomalies.rows[0].row);
      }
    } catch (err) {
      this.status(`failed to reach the service: ${String(err)}`, true);
    }
  }

  private status(text: string, isError = false): void {
    this.dom.status.textContent = text;
    this.dom.status.classList.toggle("error", isError);
  }

  private async onKChanged(): Promise<void> {
    const k = Number(this.dom.kSlider.value);
    this.dom.kLabel.textContent = String(k);
    this.anomalies = await this.api.fetchAnomalies(k);
    this.renderSidebar();
    this.renderLatentView();
  }

  async select(row: number): Promise<void> {
    this.selected = row;
    const token = ++this.requestToken;
    this.renderSidebar();
    this.renderLatentView();
    try {
      const explanation = await this.api.fetchExplanation(row);
      const neighbors = await this.api.fetchNeighborRows(explanation.neighbors);
      if (token !== this.requestToken) return; // a newer selection won
      renderScreening(this.dom.screening, explanation, neighbors);
    } catch (err) {
      if (token !== this.requestToken) return;
      this.dom.screening.replaceChildren();
      const error = document.createElement("div");
      error.className = "error-state";
      error.textContent = `explanation failed: ${String(err)}`;
      const retry = document.createElement("button");
      retry.type = "button";
      retry.textContent = "retry";
      retry.addEventListener("click", () => void this.select(row));
      error.appendChild(retry);
      this.dom.screening.appendChild(error);
    }
  }

  private renderSidebar(): void {
    renderTopK(this.dom.topk, this.anomalies.rows, this.selected, (row) =>
      void this.select(row),
    );
  }

  private renderLatentView(): void {
    renderLatent(this.dom.latent, this.latent.points, {
      selected: this.selected,
      highlighted: new Set(this.anomalies.rows.map((r) => r.row)),
      onSelect: (row) => void this.select(row),
    });
  }
}

export function bootstrap(): void {
  const byId = (id: string) => {
    const el = document.getElementById(id);
    if (!el) throw new Error(`missing #${id}`);
    return el;
  };
  const app = new App(new ApiClient(""), {
    topk: byId("topk"),
    screening: byId("screening"),
    latent: byId("latent"),
    status: byId("status"),
    kSlider: byId("k-slider") as HTMLInputElement,
    kLabel: byId("k-label"),
  });
  void app.start();
}

if (typeof document !== "undefined" && document.getElementById("screening")) {
  bootstrap();
}
