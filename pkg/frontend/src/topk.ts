import { formatScore } from "./format.js";
import type { AnomalyEntry } from "./types.js";

export function renderTopK(
  root: HTMLElement,
  entries: AnomalyEntry[],
  selected: number | null,
  onSelect: (row: number) => void,
): void {
  root.replaceChildren();
  if (entries.length === 0) {
    const empty = document.createElement("div");
    empty.className = "empty-state";
    empty.textContent = "No anomalies at this k.";
    root.appendChild(empty);
    return;
  }
  const list = document.createElement("ol");
  list.className = "topk-list";
  for (const entry of entries) {
    const item = document.createElement("li");
    const button = document.createElement("button");
    button.type = "button";
    button.dataset.row = String(entry.row);
    if (entry.row === selected) button.classList.add("selected");
    button.innerHTML =
      `<span class="topk-row">row ${entry.row}</span>` +
      `<span class="topk-score">${formatScore(entry.score)}</span>`;
    button.addEventListener("click", () => onSelect(entry.row));
    item.appendChild(button);
    list.appendChild(item);
  }
  root.appendChild(list);
}
