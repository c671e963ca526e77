"""Read-only local HTTP service: the sampled dataset behind a small JSON
API plus static explorer assets.

    GET /api/meta          variables (name, unit, min, max), n_samples,
                           epsilon, f_star, highlighted scenario rows
    GET /api/samples?offset=0&limit=50000
                           columnar chunk {offset, count, columns: {...}}
    GET /api/vertices      phase-1 support points with costs
    GET /api/correlations  {names, matrix}
    GET /                  explorer assets (ui_dir) or a plain index page

Stateless and safe for concurrent readers; NaN cells are serialized as
null.
"""

from __future__ import annotations

import json
import math
from functools import partial
from http.server import SimpleHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlparse

import numpy as np

from nearopt import sampler

UNIT_BY_COLUMN = {
    "wind": "MW",
    "solar": "MW",
    "ocgt": "MW",
    "hydrogen": "MW",
    "battery": "MW",
    "transmission": "MW*km",
    "gini_self_sufficiency": "1",
    "gini_investment": "1",
    "land_use_km2": "km2",
    "implementation_years": "yr",
    "co2_t": "t",
    "system_cost": "currency/yr",
    "reconstructed": "flag",
}

MAX_CHUNK = 100_000


class Dataset:
    """In-memory columnar view of the annotated sample table."""

    def __init__(self, table: sampler.SampleTable, manifest: dict, metrics_manifest: dict,
                 correlations: Optional[dict]):
        self.table = table
        self.manifest = manifest
        self.metrics_manifest = metrics_manifest
        self.correlations = correlations

    @classmethod
    def load(cls, annotated_csv, manifest: dict, metrics_manifest: dict,
             correlations_csv=None) -> "Dataset":
        table = sampler.read_csv(annotated_csv)
        correlations = None
        if correlations_csv is not None:
            correlations = _read_matrix_csv(correlations_csv)
        return cls(table, manifest, metrics_manifest, correlations)

    def meta(self) -> dict:
        variables = []
        for name in self.table.columns:
            col = self.table.column(name)
            finite = col[np.isfinite(col)]
            variables.append(
                {
                    "name": name,
                    "unit": UNIT_BY_COLUMN.get(name, "MW"),
                    "min": float(finite.min()) if finite.size else None,
                    "max": float(finite.max()) if finite.size else None,
                }
            )
        return {
            "variables": variables,
            "n_samples": self.table.n,
            "epsilon": self.manifest.get("epsilon"),
            "f_star": self.manifest.get("f_star"),
            "highlighted_scenarios": self.metrics_manifest.get("highlights", {}),
        }

    def samples(self, offset: int, limit: int) -> dict:
        offset = max(0, offset)
        limit = max(0, min(limit, MAX_CHUNK))
        block = self.table.rows[offset : offset + limit]
        columns = {
            name: [None if math.isnan(v) else v for v in block[:, i]]
            for i, name in enumerate(self.table.columns)
        }
        return {"offset": offset, "count": block.shape[0], "columns": columns}

    def vertices(self) -> dict:
        return {
            "derived_names": self.manifest.get("derived_names", []),
            "vertices": self.manifest.get("vertices", []),
        }


def _read_matrix_csv(path) -> dict:
    lines = Path(path).read_text(encoding="utf-8").strip().split("\n")
    names = lines[0].split(",")[1:]
    matrix = [[float(cell) for cell in line.split(",")[1:]] for line in lines[1:]]
    return {"names": names, "matrix": matrix}


class _Handler(SimpleHTTPRequestHandler):
    # directory= serves the explorer assets; dataset is shared and read-only
    def __init__(self, *args, dataset: Dataset, **kwargs):
        self.dataset = dataset
        super().__init__(*args, **kwargs)

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def do_GET(self):
        parsed = urlparse(self.path)
        if parsed.path == "/api/meta":
            return self._json(self.dataset.meta())
        if parsed.path == "/api/samples":
            query = parse_qs(parsed.query)
            offset = int(query.get("offset", ["0"])[0])
            limit = int(query.get("limit", ["50000"])[0])
            return self._json(self.dataset.samples(offset, limit))
        if parsed.path == "/api/vertices":
            return self._json(self.dataset.vertices())
        if parsed.path == "/api/correlations":
            if self.dataset.correlations is None:
                return self._error(404, "correlations.csv has not been produced")
            return self._json(self.dataset.correlations)
        if parsed.path.startswith("/api/"):
            return self._error(404, "unknown endpoint")
        return super().do_GET()

    def _json(self, doc) -> None:
        body = json.dumps(doc).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, code: int, message: str) -> None:
        body = json.dumps({"error": message}).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


_FALLBACK_INDEX = """<!doctype html>
<html><head><meta charset="utf-8"><title>near-optimal explorer API</title></head>
<body><h1>Dataset API</h1>
<p>No explorer build was found. Endpoints:</p>
<ul>
<li><a href="/api/meta">/api/meta</a></li>
<li><a href="/api/samples?offset=0&amp;limit=100">/api/samples</a></li>
<li><a href="/api/vertices">/api/vertices</a></li>
<li><a href="/api/correlations">/api/correlations</a></li>
</ul></body></html>
"""


def make_server(annotated_csv, manifest, metrics_manifest, correlations_csv,
                port: int, ui_dir: Optional[Path]) -> ThreadingHTTPServer:
    dataset = Dataset.load(annotated_csv, manifest, metrics_manifest, correlations_csv)
    if ui_dir is None or not Path(ui_dir).exists():
        import tempfile

        tmp = Path(tempfile.mkdtemp(prefix="nearopt-ui-"))
        (tmp / "index.html").write_text(_FALLBACK_INDEX, encoding="utf-8")
        ui_dir = tmp
    handler = partial(_Handler, dataset=dataset, directory=str(ui_dir))
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve_forever(annotated_csv, manifest, metrics_manifest, correlations_csv,
                  port: int, ui_dir: Optional[Path]) -> None:
    try:
        server = make_server(annotated_csv, manifest, metrics_manifest, correlations_csv,
                             port, ui_dir)
    except OSError as exc:
        raise SystemExit(f"cannot bind port {port}: {exc}")
    host, bound_port = server.server_address
    print(f"serving on http://{host}:{bound_port}/ (ctrl-c to stop)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
