/** Pin-range filtering and conditional statistics over a columnar table.
 *
 *  Everything here is pure and synchronous so it runs identically on the
 *  main thread, in the worker, and under tests.  Statistics reproduce the
 *  host pipeline's conventions bit-for-bit where the contract demands it:
 *  inclusive pin bounds, stats over finite cells only, and numpy-style
 *  equal-width histogram binning (last bin right-inclusive). */

import { ColumnTable } from "./data.js";

/** Interval filters per variable; absent name = unpinned. */
export type PinSet = Record<string, [number, number]>;

export interface HistogramBin {
  left: number;
  right: number;
  count: number;
}

export interface ColumnStats {
  name: string;
  count: number;
  min: number | null;
  max: number | null;
  mean: number | null;
  histogram: HistogramBin[];
}

export interface ViewStats {
  surviving: number;
  columns: ColumnStats[];
  correlations: number[][];
  correlationNames: string[];
}

export function validatePins(pins: PinSet, table: ColumnTable): void {
  for (const [name, range] of Object.entries(pins)) {
    if (!table.columns.includes(name)) {
      throw new Error(`pin on unknown variable ${name}`);
    }
    if (!(range[0] <= range[1])) {
      throw new Error(`pin on ${name}: lo ${range[0]} > hi ${range[1]}`);
    }
  }
}

/** Surviving-row mask; a pinned NaN cell never survives. */
export function applyPins(table: ColumnTable, pins: PinSet): Uint8Array {
  validatePins(pins, table);
  const mask = new Uint8Array(table.length).fill(1);
  for (const [name, [lo, hi]] of Object.entries(pins)) {
    const col = table.column(name);
    for (let i = 0; i < col.length; i++) {
      if (mask[i] && !(col[i] >= lo && col[i] <= hi)) {
        mask[i] = 0;
      }
    }
  }
  return mask;
}

export function countMask(mask: Uint8Array): number {
  let n = 0;
  for (let i = 0; i < mask.length; i++) n += mask[i];
  return n;
}

/** numpy-compatible equal-width bin edges over [lo, hi]. */
function binEdges(lo: number, hi: number, bins: number): number[] {
  const edges = new Array<number>(bins + 1);
  const step = (hi - lo) / bins;
  for (let i = 0; i <= bins; i++) edges[i] = lo + i * step;
  edges[bins] = hi;
  return edges;
}

export function columnStats(
  table: ColumnTable,
  name: string,
  mask: Uint8Array,
  bins = 64,
): ColumnStats {
  const col = table.column(name);
  let count = 0;
  let min = Infinity;
  let max = -Infinity;
  let sum = 0;
  for (let i = 0; i < col.length; i++) {
    const v = col[i];
    if (!mask[i] || Number.isNaN(v)) continue;
    count += 1;
    sum += v;
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (count === 0) {
    return { name, count, min: null, max: null, mean: null, histogram: [] };
  }
  // numpy expands an all-equal value range by half a unit on each side
  const histLo = min === max ? min - 0.5 : min;
  const histHi = min === max ? max + 0.5 : max;
  const edges = binEdges(histLo, histHi, bins);
  const counts = new Uint32Array(bins);
  const width = (histHi - histLo) / bins;
  for (let i = 0; i < col.length; i++) {
    const v = col[i];
    if (!mask[i] || Number.isNaN(v)) continue;
    let b = Math.floor((v - histLo) / width);
    if (b >= bins) b = bins - 1;
    // snap to the numpy convention at interior edges
    while (b > 0 && v < edges[b]) b -= 1;
    while (b < bins - 1 && v >= edges[b + 1]) b += 1;
    counts[b] += 1;
  }
  const histogram: HistogramBin[] = [];
  for (let b = 0; b < bins; b++) {
    histogram.push({ left: edges[b], right: edges[b + 1], count: counts[b] });
  }
  return { name, count, min, max, mean: sum / count, histogram };
}

/** Pearson correlation over surviving rows where both cells are finite;
 *  constant columns correlate as 0 by convention. */
export function pearson(
  table: ColumnTable,
  aName: string,
  bName: string,
  mask: Uint8Array,
): number {
  const a = table.column(aName);
  const b = table.column(bName);
  let n = 0;
  let meanA = 0;
  let meanB = 0;
  for (let i = 0; i < a.length; i++) {
    if (!mask[i] || Number.isNaN(a[i]) || Number.isNaN(b[i])) continue;
    n += 1;
    meanA += a[i];
    meanB += b[i];
  }
  if (n < 2) return aName === bName ? 1 : 0;
  meanA /= n;
  meanB /= n;
  let cab = 0;
  let caa = 0;
  let cbb = 0;
  for (let i = 0; i < a.length; i++) {
    if (!mask[i] || Number.isNaN(a[i]) || Number.isNaN(b[i])) continue;
    const da = a[i] - meanA;
    const db = b[i] - meanB;
    cab += da * db;
    caa += da * da;
    cbb += db * db;
  }
  if (caa === 0 || cbb === 0) return aName === bName ? 1 : 0;
  const r = cab / Math.sqrt(caa * cbb);
  return Math.max(-1, Math.min(1, r));
}

export function pearsonMatrix(
  table: ColumnTable,
  names: string[],
  mask: Uint8Array,
): number[][] {
  const out = names.map(() => new Array<number>(names.length).fill(0));
  for (let i = 0; i < names.length; i++) {
    out[i][i] = 1;
    for (let j = i + 1; j < names.length; j++) {
      const r = pearson(table, names[i], names[j], mask);
      out[i][j] = r;
      out[j][i] = r;
    }
  }
  return out;
}

/** Fixed-grid 2-D density for the scatter panels (display only). */
export function density2d(
  table: ColumnTable,
  xName: string,
  yName: string,
  mask: Uint8Array,
  bins = 64,
): { counts: Uint32Array; xMin: number; xMax: number; yMin: number; yMax: number } {
  const xs = table.column(xName);
  const ys = table.column(yName);
  let xMin = Infinity;
  let xMax = -Infinity;
  let yMin = Infinity;
  let yMax = -Infinity;
  for (let i = 0; i < xs.length; i++) {
    if (!mask[i] || Number.isNaN(xs[i]) || Number.isNaN(ys[i])) continue;
    if (xs[i] < xMin) xMin = xs[i];
    if (xs[i] > xMax) xMax = xs[i];
    if (ys[i] < yMin) yMin = ys[i];
    if (ys[i] > yMax) yMax = ys[i];
  }
  const counts = new Uint32Array(bins * bins);
  if (!(xMin < Infinity)) {
    return { counts, xMin: 0, xMax: 0, yMin: 0, yMax: 0 };
  }
  const xw = (xMax - xMin) / bins || 1;
  const yw = (yMax - yMin) / bins || 1;
  for (let i = 0; i < xs.length; i++) {
    if (!mask[i] || Number.isNaN(xs[i]) || Number.isNaN(ys[i])) continue;
    let bx = Math.floor((xs[i] - xMin) / xw);
    let by = Math.floor((ys[i] - yMin) / yw);
    if (bx >= bins) bx = bins - 1;
    if (by >= bins) by = bins - 1;
    counts[by * bins + bx] += 1;
  }
  return { counts, xMin, xMax, yMin, yMax };
}

/** Everything the panels need for one pin state. */
export function viewStats(
  table: ColumnTable,
  pins: PinSet,
  correlationNames: string[],
  bins = 64,
  mask?: Uint8Array,
): ViewStats {
  const effective = mask ?? applyPins(table, pins);
  const surviving = countMask(effective);
  return {
    surviving,
    columns: table.columns.map((name) => columnStats(table, name, effective, bins)),
    correlations: pearsonMatrix(table, correlationNames, effective),
    correlationNames,
  };
}

export interface DensityPanel {
  x: string;
  y: string;
  counts: Uint32Array;
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
}

/** One-pass computation of the full view: stats plus density panels. */
export function computeView(
  table: ColumnTable,
  pins: PinSet,
  correlationNames: string[],
  densityPairs: [string, string][],
  bins = 64,
): { stats: ViewStats; densities: DensityPanel[] } {
  const mask = applyPins(table, pins);
  const stats = viewStats(table, pins, correlationNames, bins, mask);
  const densities = densityPairs.map(([x, y]) => ({
    x,
    y,
    ...density2d(table, x, y, mask),
  }));
  return { stats, densities };
}
