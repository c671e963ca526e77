/** Columnar dataset loading: /api/meta plus chunked /api/samples pulls,
 *  stored as one Float64Array per column (NaN marks missing cells). */

export interface VariableMeta {
  name: string;
  unit: string;
  min: number | null;
  max: number | null;
}

export interface DatasetMeta {
  variables: VariableMeta[];
  n_samples: number;
  epsilon: number | null;
  f_star: number | null;
  highlighted_scenarios: Record<string, number>;
}

export class ColumnTable {
  readonly columns: string[];
  readonly data: Float64Array[];
  readonly length: number;

  constructor(columns: string[], data: Float64Array[]) {
    if (columns.length !== data.length) {
      throw new Error(`${columns.length} names for ${data.length} columns`);
    }
    const lengths = new Set(data.map((c) => c.length));
    if (lengths.size > 1) {
      throw new Error("ragged columns");
    }
    this.columns = columns;
    this.data = data;
    this.length = data.length ? data[0].length : 0;
  }

  column(name: string): Float64Array {
    const i = this.columns.indexOf(name);
    if (i < 0) throw new Error(`unknown column ${name}`);
    return this.data[i];
  }

  row(index: number): Record<string, number> {
    const out: Record<string, number> = {};
    this.columns.forEach((name, i) => (out[name] = this.data[i][index]));
    return out;
  }
}

export interface LoadProgress {
  loaded: number;
  total: number;
}

async function getJson(url: string): Promise<any> {
  const resp = await fetch(url);
  if (!resp.ok) {
    throw new Error(`${url}: HTTP ${resp.status}`);
  }
  return resp.json();
}

/** Fetch the meta document and every sample chunk; fails loudly on a
 *  truncated stream rather than returning a silently partial table. */
export async function loadDataset(
  baseUrl: string,
  chunkSize = 50_000,
  onProgress?: (p: LoadProgress) => void,
): Promise<{ meta: DatasetMeta; table: ColumnTable }> {
  const meta = (await getJson(`${baseUrl}/api/meta`)) as DatasetMeta;
  const names = meta.variables.map((v) => v.name);
  const total = meta.n_samples;
  const buffers = names.map(() => new Float64Array(total));

  let offset = 0;
  while (offset < total) {
    const chunk = await getJson(
      `${baseUrl}/api/samples?offset=${offset}&limit=${chunkSize}`,
    );
    const count: number = chunk.count;
    if (count <= 0) {
      throw new Error(
        `truncated sample stream: got ${offset} of ${total} rows before an empty chunk`,
      );
    }
    names.forEach((name, i) => {
      const values: (number | null)[] = chunk.columns[name];
      if (!values || values.length !== count) {
        throw new Error(`chunk at ${offset}: column ${name} missing or wrong length`);
      }
      for (let k = 0; k < count; k++) {
        const v = values[k];
        buffers[i][offset + k] = v === null ? NaN : v;
      }
    });
    offset += count;
    onProgress?.({ loaded: offset, total });
  }
  return { meta, table: new ColumnTable(names, buffers) };
}

/** Scenario hand-off: one surviving row as a downloadable JSON payload. */
export function exportScenario(
  table: ColumnTable,
  meta: DatasetMeta,
  rowIndex: number,
  provenance: Record<string, unknown> = {},
): string {
  if (rowIndex < 0 || rowIndex >= table.length) {
    throw new Error(`row ${rowIndex} outside the table`);
  }
  const values = table.row(rowIndex);
  return JSON.stringify(
    {
      row: rowIndex,
      values,
      epsilon: meta.epsilon,
      f_star: meta.f_star,
      ...provenance,
    },
    null,
    1,
  );
}
