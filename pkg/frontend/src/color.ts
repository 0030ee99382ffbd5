// Red shading for cell-error confidence. The intensity is the confidence
// itself (clamped to [0, 1]), so the scale is monotone by construction.

export function shadeIntensity(confidence: number): number {
  if (!Number.isFinite(confidence)) return 0;
  return Math.min(1, Math.max(0, confidence));
}

export function confidenceColor(confidence: number): string {
  const t = shadeIntensity(confidence);
  if (t === 0) return "transparent";
  // white -> saturated red as t goes 0 -> 1
  const green = Math.round(235 - 180 * t);
  const blue = Math.round(235 - 195 * t);
  return `rgb(248, ${green}, ${blue})`;
}

export function scoreColor(score: number, maxScore: number): string {
  const t = maxScore > 0 ? shadeIntensity(score / maxScore) : 0;
  const green = Math.round(210 - 170 * t);
  return `rgb(${Math.round(120 + 120 * t)}, ${green}, 120)`;
}
