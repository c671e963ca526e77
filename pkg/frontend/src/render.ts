/** Canvas rendering for the explorer panels: histogram strips on the
 *  diagonal, binned density maps off-diagonal, correlation labels. */

import { ColumnStats, DensityPanel } from "./filters.js";

const FONT = "11px system-ui, sans-serif";

export function drawHistogram(
  canvas: HTMLCanvasElement,
  stats: ColumnStats,
  baseline: ColumnStats | null,
  highlightValues: number[] = [],
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  if (stats.count === 0 || stats.min === null || stats.max === null) {
    ctx.fillStyle = "#888";
    ctx.font = FONT;
    ctx.fillText("no rows", 6, height / 2);
    return;
  }
  const bins = stats.histogram;
  const peak = Math.max(1, ...bins.map((b) => b.count));
  const span = stats.max - stats.min || 1;

  if (baseline && baseline.min !== null && baseline.max !== null) {
    // unfiltered silhouette behind the conditional distribution
    const bpeak = Math.max(1, ...baseline.histogram.map((b) => b.count));
    const bspan = (baseline.max as number) - (baseline.min as number) || 1;
    ctx.fillStyle = "#d8dee5";
    for (const bin of baseline.histogram) {
      const x = ((bin.left - (baseline.min as number)) / bspan) * width;
      const w = Math.max(1, ((bin.right - bin.left) / bspan) * width);
      const h = (bin.count / bpeak) * (height - 14);
      ctx.fillRect(x, height - h, w, h);
    }
  }
  ctx.fillStyle = "#3573b9";
  for (const bin of bins) {
    const x = ((bin.left - stats.min) / span) * width;
    const w = Math.max(1, ((bin.right - bin.left) / span) * width);
    const h = (bin.count / peak) * (height - 14);
    ctx.fillRect(x, height - h, w, h);
  }
  ctx.fillStyle = "#c03427";
  for (const value of highlightValues) {
    if (Number.isNaN(value)) continue;
    const x = ((value - stats.min) / span) * width;
    ctx.fillRect(x - 1, 0, 2, height);
  }
  ctx.fillStyle = "#333";
  ctx.font = FONT;
  ctx.fillText(stats.name, 4, 11);
}

export function drawDensity(
  canvas: HTMLCanvasElement,
  panel: DensityPanel,
  highlights: { x: number; y: number }[] = [],
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const bins = Math.round(Math.sqrt(panel.counts.length));
  let peak = 0;
  for (let i = 0; i < panel.counts.length; i++) {
    if (panel.counts[i] > peak) peak = panel.counts[i];
  }
  if (peak === 0) {
    ctx.fillStyle = "#888";
    ctx.font = FONT;
    ctx.fillText("no rows", 6, height / 2);
    return;
  }
  const cw = width / bins;
  const ch = height / bins;
  for (let by = 0; by < bins; by++) {
    for (let bx = 0; bx < bins; bx++) {
      const c = panel.counts[by * bins + bx];
      if (!c) continue;
      const z = Math.pow(c / peak, 0.4);
      ctx.fillStyle = `rgba(30, 80, 140, ${0.08 + 0.92 * z})`;
      ctx.fillRect(bx * cw, height - (by + 1) * ch, Math.ceil(cw), Math.ceil(ch));
    }
  }
  ctx.fillStyle = "#c03427";
  const xs = panel.xMax - panel.xMin || 1;
  const ys = panel.yMax - panel.yMin || 1;
  for (const h of highlights) {
    if (Number.isNaN(h.x) || Number.isNaN(h.y)) continue;
    const px = ((h.x - panel.xMin) / xs) * width;
    const py = height - ((h.y - panel.yMin) / ys) * height;
    ctx.beginPath();
    ctx.arc(px, py, 4, 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.fillStyle = "#333";
  ctx.font = FONT;
  ctx.fillText(`${panel.x} vs ${panel.y}`, 4, 11);
}

export function correlationLabel(value: number): string {
  return value.toFixed(2).replace("-0.00", "0.00");
}
