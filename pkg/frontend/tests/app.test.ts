import { beforeEach, describe, expect, it } from "vitest";

import { App } from "../src/app.js";
import type { ApiClient } from "../src/api.js";
import {
  anomaliesFixture,
  explanationFixture,
  latentFixture,
  metaFixture,
  neighborRowsFixture,
} from "./fixtures.js";

function dom() {
  document.body.innerHTML = `
    <div id="topk"></div><div id="screening"></div><div id="latent"></div>
    <div id="status"></div><input id="k-slider" value="10" /><span id="k-label"></span>`;
  return {
    topk: document.getElementById("topk")!,
    screening: document.getElementById("screening")!,
    latent: document.getElementById("latent")!,
    status: document.getElementById("status")!,
    kSlider: document.getElementById("k-slider") as HTMLInputElement,
    kLabel: document.getElementById("k-label")!,
  };
}

class StubApi {
  explainDelays = new Map<number, number>();
  explainCalls: number[] = [];

  fetchMeta = async () => metaFixture();
  fetchAnomalies = async () => anomaliesFixture();
  fetchLatentMap = async () => latentFixture();
  fetchRow = async (row: number) => ({ row, values: {}, score: 0 });

  fetchExplanation = async (row: number) => {
    this.explainCalls.push(row);
    const delay = this.explainDelays.get(row) ?? 0;
    if (delay) await new Promise((r) => setTimeout(r, delay));
    const base = explanationFixture();
    return { ...base, row };
  };

  fetchNeighborRows = async () => neighborRowsFixture();
}

describe("app wiring", () => {
  let elements: ReturnType<typeof dom>;
  let api: StubApi;
  let app: App;

  beforeEach(() => {
    elements = dom();
    api = new StubApi();
    app = new App(api as unknown as ApiClient, elements);
  });

  it("boots from the service payloads and selects the top anomaly", async () => {
    await app.start();
    expect(elements.status.textContent).toContain("dae");
    expect(elements.topk.querySelectorAll("button").length).toBeGreaterThan(0);
    expect(elements.latent.querySelectorAll("circle").length).toBe(
      latentFixture().points.length,
    );
    const shownRow = elements.screening.querySelector('[data-field="row"]');
    expect(shownRow?.textContent).toBe(String(anomaliesFixture().rows[0].row));
  });

  it("drops a stale explanation when a newer selection wins", async () => {
    await app.start();
    api.explainDelays.set(111, 40); // slow first selection
    const slow = app.select(111);
    const fast = app.select(222);
    await Promise.all([slow, fast]);
    const shownRow = elements.screening.querySelector('[data-field="row"]');
    expect(shownRow?.textContent).toBe("222");
  });

  it("offers a retry when the explanation fetch fails", async () => {
    await app.start();
    let attempts = 0;
    api.fetchExplanation = async (row: number) => {
      attempts += 1;
      if (attempts === 1) throw new Error("boom");
      const base = explanationFixture();
      return { ...base, row };
    };
    await app.select(333);
    const retry = elements.screening.querySelector<HTMLButtonElement>(".error-state button");
    expect(retry).not.toBeNull();
    retry!.click();
    await new Promise((r) => setTimeout(r, 10));
    const shownRow = elements.screening.querySelector('[data-field="row"]');
    expect(shownRow?.textContent).toBe("333");
  });
});
