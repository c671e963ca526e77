"""Uniform interior sampling of a convex hull.

The product path picks a triangulation simplex per sample with probability
equal to its volume fraction (multinomial allocation) and draws barycentric
weights by sorted-uniform spacings, which is a flat Dirichlet draw and
hence uniform inside each simplex.  A hit-and-run Markov chain is provided
purely as a distribution-equivalence oracle for tests.

Randomness comes from named counter-based Philox streams: stream k of a
seed is independent of stream j, so per-simplex blocks can be generated in
parallel and merged by simplex index without changing the result.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from nearopt.geometry import ConvexHull, Simplex, contains_many, decompose, hull_digest

GENERATOR_NAME = "philox4x64"


def rng_stream(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent, reproducible generator for (seed, stream index)."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class SampleTable:
    """N x d sample matrix plus provenance; columns may later gain metrics."""

    columns: tuple
    rows: np.ndarray
    seed: Optional[int]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.shape[1] != len(self.columns):
            raise ValueError("row width must match column count")
        self.rows.flags.writeable = False

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def write_csv(self, path, sidecar: bool = True) -> None:
        """CSV with '.' decimals and LF endings; floats keep full precision.

        Empty cells encode NaN (rows lacking a joined metric)."""
        path = Path(path)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow(["" if np.isnan(v) else repr(float(v)) for v in row])
        if sidecar:
            side = {
                "seed": self.seed,
                "generator": GENERATOR_NAME,
                **{k: v for k, v in self.provenance.items()},
            }
            sidecar_path = path.with_name(path.stem + ".provenance.json")
            sidecar_path.write_text(json.dumps(side, indent=1) + "\n", encoding="utf-8")


def read_csv(path) -> SampleTable:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(cell) if cell else np.nan for cell in row] for row in reader]
    side = {}
    sidecar_path = path.with_name(path.stem + ".provenance.json")
    if sidecar_path.exists():
        side = json.loads(sidecar_path.read_text(encoding="utf-8"))
    seed = side.get("seed")
    return SampleTable(tuple(header), np.asarray(rows, float).reshape(len(rows), len(header)),
                       seed, {k: v for k, v in side.items() if k not in ("seed", "generator")})


# -- bayesian-bootstrap weights ---------------------------------------------


def bootstrap_weights(m: int, rng: np.random.Generator) -> np.ndarray:
    """One weight vector: m-1 sorted uniforms extended by {0, 1}, differenced.

    Nonnegative, sums to one, and distributed flat-Dirichlet."""
    if m < 1:
        raise ValueError("need at least one weight")
    return bootstrap_weights_batch(m, 1, rng)[0]


def bootstrap_weights_batch(m: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """(size, m) matrix of independent weight vectors (vectorized draw)."""
    if m < 1:
        raise ValueError("need at least one weight")
    u = rng.random((size, m - 1))
    u.sort(axis=1)
    fences = np.concatenate(
        [np.zeros((size, 1)), u, np.ones((size, 1))], axis=1
    )
    return np.diff(fences, axis=1)


# -- simplex and polytope sampling -------------------------------------------


def sample_simplex(simplex: Simplex, rng: np.random.Generator, size: Optional[int] = None):
    """Uniform point(s) in the simplex: barycentric combination with
    bootstrap weights.  Returns a vector, or a (size, d) matrix."""
    one = size is None
    count = 1 if one else int(size)
    weights = bootstrap_weights_batch(simplex.points.shape[0], count, rng)
    out = weights @ simplex.points
    return out[0] if one else out


def allocate_counts(volumes: Sequence[float], n: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial split of n samples over simplices by volume fraction."""
    vols = np.asarray(volumes, float)
    total = vols.sum()
    if total <= 0:
        raise ValueError("cannot sample a zero-volume hull")
    return rng.multinomial(n, vols / total)


def sample_polytope(hull: ConvexHull, n: int, seed: int, columns: Optional[Sequence[str]] = None) -> SampleTable:
    """N uniform samples of the hull interior.

    Stream 0 of the seed draws the per-simplex allocation; block k is drawn
    from stream k+1 and blocks are concatenated in simplex order, so the
    output is reproducible bit-for-bit regardless of execution order.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    sims = decompose(hull)
    vols = [s.volume for s in sims]
    counts = allocate_counts(vols, n, rng_stream(seed, 0))

    blocks: List[np.ndarray] = []
    for k, (simplex, count) in enumerate(zip(sims, counts)):
        if count == 0:
            continue
        blocks.append(sample_simplex(simplex, rng_stream(seed, k + 1), size=int(count)))
    rows = np.vstack(blocks)

    tol = 1e-7 * hull.scale()
    ok = contains_many(hull, rows, tol)
    if not np.all(ok):
        worst = rows[~ok][0]
        raise RuntimeError(f"sample escaped the hull (first offender {worst})")

    names = tuple(columns) if columns is not None else tuple(f"y{i}" for i in range(hull.dim))
    provenance = {
        "hull_id": hull_digest(hull),
        "allocation": [int(c) for c in counts],
        "method": "simplex-bootstrap",
    }
    return SampleTable(names, rows, seed, provenance)


def hit_and_run(
    hull: ConvexHull,
    n: int,
    burn_in: int = 1000,
    thin: int = 5,
    seed: int = 0,
    columns: Optional[Sequence[str]] = None,
) -> SampleTable:
    """Uniform hull samples by the hit-and-run Markov chain.

    Random chord directions from the centroid start, uniform steps along
    the feasible chord.  Slow; kept as the distribution oracle for
    :func:`sample_polytope`, not a product path.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    rng = rng_stream(seed, 0)
    normals = np.ascontiguousarray(hull.facet_normals)
    offsets = hull.facet_offsets
    centroid = hull.vertices.mean(axis=0)
    x = centroid.copy()
    d = hull.dim

    out = np.empty((n, d))
    got = 0
    step = 0
    eps = 1e-13 * hull.scale()
    while got < n:
        v = rng.normal(size=d)
        v /= np.linalg.norm(v)
        along = normals @ v
        slack = offsets - normals @ x
        with np.errstate(divide="ignore"):
            ratios = slack / along
        upper = ratios[along > 0]
        lower = ratios[along < 0]
        t_hi = float(upper.min()) if upper.size else np.inf
        t_lo = float(lower.max()) if lower.size else -np.inf
        if not np.isfinite(t_hi) or not np.isfinite(t_lo) or t_hi - t_lo <= eps:
            x = centroid.copy()  # degenerate chord: restart
            continue
        x = x + rng.uniform(t_lo, t_hi) * v
        step += 1
        if step > burn_in and (step - burn_in) % thin == 0:
            out[got] = x
            got += 1

    provenance = {
        "hull_id": hull_digest(hull),
        "burn_in": burn_in,
        "thin": thin,
        "method": "hit-and-run",
    }
    names = tuple(columns) if columns is not None else tuple(f"y{i}" for i in range(hull.dim))
    return SampleTable(names, out, seed, provenance)
