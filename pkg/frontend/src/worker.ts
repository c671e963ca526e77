/** Filtering worker: owns a copy of the columnar table and answers pin
 *  updates with full view statistics.  Replies carry the request's
 *  generation counter so the UI thread can drop stale results. */

import { ColumnTable } from "./data.js";
import { PinSet, computeView } from "./filters.js";

interface InitMessage {
  kind: "init";
  columns: string[];
  buffers: ArrayBuffer[];
  correlationNames: string[];
}

interface FilterMessage {
  kind: "filter";
  generation: number;
  pins: PinSet;
  densityPairs: [string, string][];
  bins: number;
}

let table: ColumnTable | null = null;
let correlationNames: string[] = [];

const post = (msg: unknown) => (self as unknown as Worker).postMessage(msg);

self.onmessage = (event: MessageEvent<InitMessage | FilterMessage>) => {
  const msg = event.data;
  if (msg.kind === "init") {
    table = new ColumnTable(
      msg.columns,
      msg.buffers.map((b) => new Float64Array(b)),
    );
    correlationNames = msg.correlationNames;
    post({ kind: "ready", rows: table.length });
    return;
  }
  if (msg.kind === "filter") {
    if (!table) {
      post({ kind: "error", generation: msg.generation, message: "filter before init" });
      return;
    }
    try {
      const view = computeView(table, msg.pins, correlationNames, msg.densityPairs, msg.bins);
      post({ kind: "stats", generation: msg.generation, ...view });
    } catch (err) {
      post({ kind: "error", generation: msg.generation, message: String(err) });
    }
  }
};
