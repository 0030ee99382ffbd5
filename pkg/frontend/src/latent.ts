import { scoreColor } from "./color.js";
import { formatScore } from "./format.js";
import type { LatentPoint } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const SIZE = 640;
const PAD = 24;

export interface LatentViewOptions {
  selected?: number | null;
  highlighted?: Set<number>;
  onSelect?: (row: number) => void;
}

// 2-D scatter of every row's latent position, colored by anomaly score.
// Clicking a point selects exactly that row for screening.

export function renderLatent(
  root: HTMLElement,
  points: LatentPoint[],
  options: LatentViewOptions = {},
): void {
  root.replaceChildren();
  if (points.length === 0) {
    const empty = document.createElement("div");
    empty.className = "empty-state";
    empty.textContent = "No rows to map.";
    root.appendChild(empty);
    return;
  }

  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ys);
  const yMax = Math.max(...ys);
  const maxScore = Math.max(...points.map((p) => p.score));
  const sx = (v: number) =>
    PAD + ((v - xMin) / (xMax - xMin || 1)) * (SIZE - 2 * PAD);
  const sy = (v: number) =>
    SIZE - PAD - ((v - yMin) / (yMax - yMin || 1)) * (SIZE - 2 * PAD);

  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${SIZE} ${SIZE}`);
  svg.classList.add("latent-svg");

  for (const point of points) {
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", sx(point.x).toFixed(2));
    circle.setAttribute("cy", sy(point.y).toFixed(2));
    circle.setAttribute("r", point.row === options.selected ? "7" : "3.5");
    circle.setAttribute("fill", scoreColor(point.score, maxScore));
    circle.dataset.row = String(point.row);
    circle.classList.add("latent-point");
    if (options.highlighted?.has(point.row)) circle.classList.add("top-k");
    if (point.row === options.selected) circle.classList.add("selected");
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `row ${point.row}, score ${formatScore(point.score)}`;
    circle.appendChild(title);
    circle.addEventListener("click", () => options.onSelect?.(point.row));
    svg.appendChild(circle);
  }
  root.appendChild(svg);
}
