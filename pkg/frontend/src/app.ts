/** Explorer application: load the dataset, keep a PinSet in sync with the
 *  range sliders, run filtering in the worker (stale results dropped by
 *  generation), and redraw every linked panel on each result. */

import { ColumnTable, DatasetMeta, exportScenario, loadDataset } from "./data.js";
import { ColumnStats, DensityPanel, PinSet, ViewStats } from "./filters.js";
import { correlationLabel, drawDensity, drawHistogram } from "./render.js";

interface ViewState {
  meta: DatasetMeta;
  table: ColumnTable;
  pins: PinSet;
  generation: number;
  baseline: ViewStats | null;
  latest: ViewStats | null;
  bookmarks: number[];
}

const PANEL_W = 210;
const PANEL_H = 120;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  parent?: HTMLElement,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  parent?.appendChild(node);
  return node;
}

export async function start(root: HTMLElement, baseUrl = ""): Promise<void> {
  const status = el("div", { class: "status" }, root);
  status.textContent = "loading dataset...";
  let meta: DatasetMeta;
  let table: ColumnTable;
  try {
    ({ meta, table } = await loadDataset(baseUrl, 50_000, (p) => {
      status.textContent = `loading samples ${p.loaded}/${p.total}`;
    }));
  } catch (err) {
    status.textContent = `load failed: ${err}`;
    status.classList.add("error");
    return;
  }
  status.textContent = `${table.length} samples loaded`;

  const sampleColumns = meta.variables
    .map((v) => v.name)
    .filter((name) => name !== "reconstructed");
  const densityPairs: [string, string][] = [];
  for (let i = 0; i < Math.min(4, sampleColumns.length); i++) {
    for (let j = i + 1; j < Math.min(4, sampleColumns.length); j++) {
      densityPairs.push([sampleColumns[i], sampleColumns[j]]);
    }
  }

  const state: ViewState = {
    meta,
    table,
    pins: {},
    generation: 0,
    baseline: null,
    latest: null,
    bookmarks: [],
  };

  // panels
  const controls = el("div", { class: "controls" }, root);
  const summary = el("div", { class: "summary" }, root);
  const histRow = el("div", { class: "panel-row" }, root);
  const densityRow = el("div", { class: "panel-row" }, root);
  const corrBox = el("pre", { class: "correlations" }, root);
  const exportBox = el("div", { class: "exports" }, root);

  const histCanvas = new Map<string, HTMLCanvasElement>();
  for (const name of table.columns) {
    const canvas = el("canvas", { width: String(PANEL_W), height: String(PANEL_H) }, histRow);
    histCanvas.set(name, canvas);
  }
  const densityCanvas = densityPairs.map(() =>
    el("canvas", { width: String(PANEL_W), height: String(PANEL_H) }, densityRow),
  );

  const worker = new Worker("worker.js", { type: "module" });
  worker.postMessage(
    {
      kind: "init",
      columns: table.columns,
      buffers: table.data.map((c) => c.buffer),
      correlationNames: sampleColumns,
    },
    // the UI keeps its own copy for scenario export; structured clone is fine
  );

  const requestView = () => {
    state.generation += 1;
    worker.postMessage({
      kind: "filter",
      generation: state.generation,
      pins: state.pins,
      densityPairs,
      bins: 64,
    });
  };

  worker.onmessage = (
    event: MessageEvent<
      | { kind: "ready"; rows: number }
      | { kind: "stats"; generation: number; stats: ViewStats; densities: DensityPanel[] }
      | { kind: "error"; generation: number; message: string }
    >,
  ) => {
    const msg = event.data;
    if (msg.kind === "ready") {
      requestView();
      return;
    }
    if (msg.kind === "error") {
      status.textContent = `filter failed: ${msg.message}`;
      status.classList.add("error");
      return;
    }
    if (msg.generation !== state.generation) {
      return; // stale result of an older pin state
    }
    if (state.baseline === null) {
      state.baseline = msg.stats;
    }
    state.latest = msg.stats;
    redraw(msg.stats, msg.densities);
  };

  const highlightRows = Object.entries(meta.highlighted_scenarios ?? {});

  function redraw(stats: ViewStats, densities: DensityPanel[]): void {
    if (stats.surviving === 0) {
      summary.textContent = "no near-optimal solutions satisfy these pins";
      summary.classList.add("empty");
    } else {
      summary.classList.remove("empty");
      const eps = state.meta.epsilon;
      summary.textContent =
        `${stats.surviving} of ${table.length} samples survive` +
        (eps !== null ? ` (cost slack ${(eps * 100).toFixed(0)}%)` : "");
    }
    const byName = new Map(stats.columns.map((c) => [c.name, c]));
    const baseByName = new Map((state.baseline?.columns ?? []).map((c) => [c.name, c]));
    for (const [name, canvas] of histCanvas) {
      const survivors = highlightSurvivors();
      drawHistogram(
        canvas,
        byName.get(name) as ColumnStats,
        baseByName.get(name) ?? null,
        survivors.map((row) => table.column(name)[row]),
      );
    }
    densities.forEach((panel, i) => {
      const survivors = highlightSurvivors();
      drawDensity(
        densityCanvas[i],
        panel,
        survivors.map((row) => ({
          x: table.column(panel.x)[row],
          y: table.column(panel.y)[row],
        })),
      );
    });
    const lines = [" correlations (conditional):"];
    const names = stats.correlationNames;
    const header = "        " + names.map((n) => n.slice(0, 7).padStart(8)).join("");
    lines.push(header);
    names.forEach((n, i) => {
      lines.push(
        n.slice(0, 7).padStart(8) +
          stats.correlations[i].map((v) => correlationLabel(v).padStart(8)).join(""),
      );
    });
    corrBox.textContent = lines.join("\n");
  }

  function highlightSurvivors(): number[] {
    const rows: number[] = [];
    for (const [, row] of highlightRows) {
      const index = Number(row);
      let ok = true;
      for (const [name, [lo, hi]] of Object.entries(state.pins)) {
        const v = table.column(name)[index];
        if (!(v >= lo && v <= hi)) {
          ok = false;
          break;
        }
      }
      if (ok) rows.push(index);
    }
    return rows;
  }

  // range sliders per variable
  for (const variable of meta.variables) {
    if (variable.min === null || variable.max === null) continue;
    const wrap = el("div", { class: "pin" }, controls);
    el("span", {}, wrap).textContent = `${variable.name} [${variable.unit}]`;
    const lo = el("input", { type: "range", step: "any" }, wrap);
    const hi = el("input", { type: "range", step: "any" }, wrap);
    const label = el("span", { class: "pin-range" }, wrap);
    for (const input of [lo, hi]) {
      input.min = String(variable.min);
      input.max = String(variable.max);
    }
    lo.value = String(variable.min);
    hi.value = String(variable.max);
    const update = () => {
      let a = Number(lo.value);
      let b = Number(hi.value);
      if (a > b) [a, b] = [b, a];
      const full = a <= (variable.min as number) && b >= (variable.max as number);
      if (full) {
        delete state.pins[variable.name];
        label.textContent = "all";
      } else {
        state.pins[variable.name] = [a, b];
        label.textContent = `${a.toPrecision(4)} .. ${b.toPrecision(4)}`;
      }
      requestView();
    };
    lo.addEventListener("input", update);
    hi.addEventListener("input", update);
    label.textContent = "all";
  }

  const clear = el("button", {}, controls);
  clear.textContent = "clear pins";
  clear.addEventListener("click", () => {
    state.pins = {};
    controls.querySelectorAll("input").forEach((input) => {
      const slider = input as HTMLInputElement;
      slider.value = slider.getAttribute("min") ?? slider.value;
    });
    requestView();
  });

  const exportButton = el("button", {}, exportBox);
  exportButton.textContent = "export first surviving scenario";
  exportButton.addEventListener("click", () => {
    const rows = highlightSurvivors();
    const row = rows.length ? rows[0] : firstSurvivingRow();
    if (row === null) {
      status.textContent = "nothing to export: no surviving rows";
      return;
    }
    const payload = exportScenario(table, meta, row, { pins: state.pins });
    const blob = new Blob([payload], { type: "application/json" });
    const link = el("a", { download: `scenario-${row}.json` });
    link.href = URL.createObjectURL(blob);
    link.click();
    URL.revokeObjectURL(link.href);
  });

  function firstSurvivingRow(): number | null {
    for (let i = 0; i < table.length; i++) {
      let ok = true;
      for (const [name, [lo, hi]] of Object.entries(state.pins)) {
        const v = table.column(name)[i];
        if (!(v >= lo && v <= hi)) {
          ok = false;
          break;
        }
      }
      if (ok) return i;
    }
    return null;
  }
}
