import { confidenceColor, shadeIntensity } from "./color.js";
import { formatConfidence, formatScore, formatValue } from "./format.js";
import type { Explanation, RowPayload } from "./types.js";

// Screening layout: a confidence bar per attribute, then the observed row
// (cells shaded by confidence), the model's expected row, and the five
// nearest reference rows.

export function validateExplanation(payload: unknown): payload is Explanation {
  const p = payload as Explanation;
  return (
    !!p &&
    Array.isArray(p.cells) &&
    p.cells.length > 0 &&
    typeof p.row_score === "number" &&
    Array.isArray(p.neighbors) &&
    p.cells.every(
      (c) =>
        typeof c.attribute === "string" &&
        typeof c.confidence === "number" &&
        c.confidence >= 0 &&
        c.confidence <= 1 &&
        "observed" in c &&
        "expected" in c,
    )
  );
}

export function renderScreening(
  root: HTMLElement,
  payload: unknown,
  neighborRows: RowPayload[],
): void {
  root.replaceChildren();
  if (!validateExplanation(payload)) {
    const error = document.createElement("div");
    error.className = "error-state";
    error.textContent = "Malformed explanation payload; nothing rendered.";
    root.appendChild(error);
    return;
  }
  const explanation = payload;

  const header = document.createElement("div");
  header.className = "screening-header";
  header.innerHTML =
    `<span>row <strong data-field="row">${explanation.row}</strong></span>` +
    `<span>anomaly score <strong data-field="row-score">${formatScore(explanation.row_score)}</strong></span>`;
  root.appendChild(header);

  const table = document.createElement("table");
  table.className = "screening-table";

  const head = table.createTHead().insertRow();
  head.appendChild(document.createElement("th"));
  for (const cell of explanation.cells) {
    const th = document.createElement("th");
    th.textContent = cell.attribute;
    head.appendChild(th);
  }

  const body = table.createTBody();

  const bars = body.insertRow();
  bars.dataset.role = "bars";
  labelCell(bars, "confidence");
  for (const cell of explanation.cells) {
    const td = bars.insertCell();
    td.className = "bar-cell";
    const bar = document.createElement("div");
    bar.className = "bar";
    bar.style.height = `${(shadeIntensity(cell.confidence) * 100).toFixed(1)}%`;
    bar.dataset.confidence = String(cell.confidence);
    td.appendChild(bar);
    const label = document.createElement("span");
    label.className = "bar-label";
    label.textContent = formatConfidence(cell.confidence);
    td.appendChild(label);
  }

  const observed = body.insertRow();
  observed.dataset.role = "observed";
  labelCell(observed, "observed");
  for (const cell of explanation.cells) {
    const td = observed.insertCell();
    td.textContent = formatValue(cell.observed);
    td.style.backgroundColor = confidenceColor(cell.confidence);
    td.dataset.intensity = String(shadeIntensity(cell.confidence));
  }

  const expected = body.insertRow();
  expected.dataset.role = "expected";
  labelCell(expected, "expected");
  for (const cell of explanation.cells) {
    const td = expected.insertCell();
    td.textContent = formatValue(cell.expected);
  }

  for (const neighbor of neighborRows) {
    const tr = body.insertRow();
    tr.dataset.role = "neighbor";
    tr.dataset.row = String(neighbor.row);
    labelCell(tr, `row ${neighbor.row}`);
    for (const cell of explanation.cells) {
      const td = tr.insertCell();
      td.textContent = formatValue(neighbor.values[cell.attribute]);
    }
  }

  root.appendChild(table);
}

function labelCell(tr: HTMLTableRowElement, text: string): void {
  const th = document.createElement("th");
  th.scope = "row";
  th.textContent = text;
  tr.appendChild(th);
}
