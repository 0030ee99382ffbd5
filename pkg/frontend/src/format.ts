// Display formatting: numbers at 4 significant digits, confidences as
// percentages. Categorical values pass through untouched.

export function formatNumber(value: number): string {
  if (!Number.isFinite(value)) return String(value);
  if (value === 0) return "0";
  const formatted = Number(value.toPrecision(4));
  return String(formatted);
}

export function formatValue(value: string | number): string {
  return typeof value === "number" ? formatNumber(value) : value;
}

export function formatConfidence(confidence: number): string {
  return `${(confidence * 100).toFixed(1)}%`;
}

export function formatScore(score: number): string {
  return formatNumber(score);
}
