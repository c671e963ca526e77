"""d-dimensional convex hulls: construction, facet normals, volume,
simplex decomposition, membership.

Facet enumeration is delegated to the quickhull implementation in Qhull
(via scipy), which merges near-coplanar facets and stays consistent on
the thin, heavily-vertexed clouds that LP support points produce; naive
eps-visibility insertion provably loses points on exactly those inputs.
Construction runs in per-axis normalized coordinates (the bounding box
mapped to the unit cube) so mixed units cannot wreck conditioning; facet
planes are mapped back to raw units afterwards, and volume comes from
this module's own fan triangulation of the facets.  Points within
tolerance of a facet plane are absorbed into facets, not vertices.

Dimension is capped at :data:`DIM_CAP`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

DIM_CAP = 10

#: relative tolerance for "on the facet plane", scaled by bbox diagonal
PLANE_TOL = 1e-9
#: relative singular-value cutoff for affine-rank detection
RANK_TOL = 1e-8


class GeometryError(RuntimeError):
    """Hull construction failed or produced an inconsistent structure."""


class RankDeficiencyError(GeometryError):
    """Points do not affinely span the ambient dimension.

    Carries the detected affine rank and an orthonormal set of spanning
    directions (rows) so callers can retry in the reduced subspace.
    """

    def __init__(self, rank: int, directions: np.ndarray, dim: int):
        self.rank = rank
        self.directions = directions
        super().__init__(
            f"points span an affine subspace of dimension {rank} < {dim}; "
            "reduce to the spanned subspace before building a hull"
        )


class DimensionCapError(ValueError):
    """Requested dimension exceeds the supported cap."""

    def __init__(self, dim: int):
        super().__init__(
            f"hull construction in dimension {dim} is not supported "
            f"(hard cap {DIM_CAP}); group variables into at most {DIM_CAP} aggregates"
        )


@dataclass(frozen=True)
class Simplex:
    """d+1 points spanning a d-volume."""

    points: np.ndarray

    def __post_init__(self):
        self.points.flags.writeable = False

    @property
    def volume(self) -> float:
        return simplex_volume(self.points)


def simplex_volume(points: np.ndarray) -> float:
    """|det(p2 - p1, ..., p_{d+1} - p1)| / d! for d+1 points in d dims."""
    pts = np.asarray(points, float)
    d = pts.shape[1]
    if pts.shape[0] != d + 1:
        raise ValueError(f"simplex in {d} dims needs {d + 1} points, got {pts.shape[0]}")
    diff = pts[1:] - pts[0]
    return abs(float(np.linalg.det(diff))) / math.factorial(d)


def _relatively_degenerate(points: np.ndarray, rtol: float = 1e-12) -> bool:
    """Numerically flat simplex: |det| below rtol of its Hadamard bound.

    Scale-free in every axis, so anisotropic point clouds (coordinates in
    different units) are judged fairly."""
    diff = points[1:] - points[0]
    norms = np.linalg.norm(diff, axis=1)
    bound = float(np.prod(norms))
    if bound == 0.0:
        return True
    return abs(float(np.linalg.det(diff))) <= rtol * bound


class ConvexHull:
    """Immutable hull: vertices, outward facet planes, fan triangulation.

    The facet planes satisfy hull = {y | normals @ y <= offsets}, with unit
    normals.  `facet_vertices` indexes into `vertices` (each row one facet,
    d entries).  `volume` equals the summed triangulation volume.
    """

    def __init__(
        self,
        dim: int,
        vertices: np.ndarray,
        facet_normals: np.ndarray,
        facet_offsets: np.ndarray,
        facet_vertices: np.ndarray,
        volume: Optional[float] = None,
    ):
        self.dim = int(dim)
        self.vertices = np.asarray(vertices, float)
        self.facet_normals = np.asarray(facet_normals, float)
        self.facet_offsets = np.asarray(facet_offsets, float)
        self.facet_vertices = np.asarray(facet_vertices, int)
        self._triangulation: Optional[List[Simplex]] = None
        self.volume = float(volume) if volume is not None else self._compute_volume()
        for arr in (self.vertices, self.facet_normals, self.facet_offsets, self.facet_vertices):
            arr.flags.writeable = False

    # -- derived structure -------------------------------------------------

    def scale(self) -> float:
        """Bounding-box diagonal of the vertex cloud (>= tiny)."""
        if len(self.vertices) == 0:
            return 1.0
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return max(float(np.linalg.norm(span)), 1e-300)

    def triangulation(self) -> List[Simplex]:
        """Simplices partitioning the hull, from a Delaunay triangulation of
        the vertex set (computed in per-axis normalized coordinates).

        Delaunay cells tile the hull exactly even when facets were merged
        during construction, so the summed volume is consistent and the
        partition is safe to sample from.  A hull that is already a simplex
        decomposes into exactly itself; degenerate sliver cells (zero
        volume at normalized scale) are excluded.
        """
        if self._triangulation is None:
            if len(self.vertices) == self.dim + 1:
                self._triangulation = [Simplex(self.vertices.copy())]
                return self._triangulation
            from scipy.spatial import Delaunay, QhullError

            span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
            axis_scale = np.where(span > 0, span, 1.0)
            scaled = (self.vertices - self.vertices.min(axis=0)) / axis_scale
            try:
                tri = Delaunay(scaled)
            except QhullError:
                tri = Delaunay(scaled, qhull_options="QJ Qbb Qc Qz Q12")
            cells = np.sort(tri.simplices, axis=1)
            cells = cells[np.lexsort(cells.T[::-1])]
            sims: List[Simplex] = []
            for cell in cells:
                # degeneracy is judged on normalized coordinates so one
                # large-unit axis cannot mask genuinely flat simplices
                if _relatively_degenerate(scaled[cell]):
                    continue
                sims.append(Simplex(self.vertices[cell]))
            self._triangulation = sims
        return self._triangulation

    def _compute_volume(self) -> float:
        if self.dim == 0 or len(self.vertices) <= self.dim:
            return 0.0
        return float(sum(s.volume for s in self.triangulation()))


def volume(hull: ConvexHull) -> float:
    """Enclosed d-volume (0 for degenerate hulls)."""
    return hull.volume


def decompose(hull: ConvexHull) -> List[Simplex]:
    """Simplices partitioning the hull; volumes sum to hull.volume."""
    sims = hull.triangulation()
    if not sims:
        raise GeometryError("degenerate hull has no triangulation")
    return sims


def contains(hull: ConvexHull, y, tol: float) -> bool:
    """True iff y satisfies every facet inequality within tol."""
    y = np.asarray(y, float)
    return bool(np.all(hull.facet_normals @ y <= hull.facet_offsets + tol))


def contains_many(hull: ConvexHull, rows: np.ndarray, tol: float) -> np.ndarray:
    """Vectorized `contains` over rows of a sample matrix."""
    vals = rows @ hull.facet_normals.T - hull.facet_offsets[None, :]
    return np.all(vals <= tol, axis=1)


# -- construction ----------------------------------------------------------


def affine_rank(points: np.ndarray, rtol: float = RANK_TOL):
    """(rank, orthonormal spanning directions) of the centered point cloud."""
    pts = np.asarray(points, float)
    centered = pts - pts.mean(axis=0)
    if len(pts) < 2:
        return 0, np.zeros((0, pts.shape[1]))
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    if svals.size == 0 or svals[0] == 0.0:
        return 0, np.zeros((0, pts.shape[1]))
    rank = int(np.sum(svals > rtol * svals[0]))
    return rank, vt[:rank]


def build_hull(points: Iterable, plane_tol: float = PLANE_TOL) -> ConvexHull:
    """Convex hull of the input points.

    Requires at least d+1 points affinely spanning dimension d; otherwise
    raises :class:`RankDeficiencyError` with the detected rank and spanning
    directions.  Deterministic for a fixed input ordering.

    Construction runs in per-axis normalized coordinates (the bounding box
    mapped to the unit cube) so clouds mixing units of very different
    magnitude stay well conditioned; facet planes are mapped back to the
    raw coordinates afterwards.
    """
    pts = np.asarray(points, float)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array-like")
    n, d = pts.shape
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if d > DIM_CAP:
        raise DimensionCapError(d)
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite point coordinates")

    rank, directions = affine_rank(pts)
    if rank < d:
        raise RankDeficiencyError(rank, directions, d)

    if d == 1:
        return _hull_1d(pts)

    origin = pts.min(axis=0)
    span = pts.max(axis=0) - origin
    axis_scale = np.where(span > 0, span, 1.0)
    work = (pts - origin) / axis_scale

    from scipy.spatial import ConvexHull as _Qhull
    from scipy.spatial import QhullError

    qh = None
    last_message = "qhull failed"
    # second attempt joggles the input (deterministic in qhull) to resolve
    # wide-merge topology failures on nearly degenerate clouds
    for options in (None, "QJ"):
        try:
            qh = _Qhull(work, qhull_options=options)
            break
        except QhullError as exc:
            message = str(exc).splitlines()[0] if str(exc) else "qhull failed"
            if "QH6154" in message or "flat" in message.lower() or "singular" in message.lower():
                raise RankDeficiencyError(min(rank, d - 1), directions[: d - 1], d) from exc
            last_message = message
    if qh is None:
        raise GeometryError(f"hull construction failed: {last_message}")

    vert_ids = sorted(int(v) for v in qh.vertices)
    local = {v: i for i, v in enumerate(vert_ids)}
    vertices = pts[vert_ids]

    # map facet planes from normalized to raw coordinates; offsets are
    # re-anchored on the facets' own (exact, raw) vertex coordinates
    normals = qh.equations[:, :-1] / axis_scale
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    facet_vertices = np.array(
        [[local[int(v)] for v in simplex] for simplex in qh.simplices], dtype=int
    )
    offsets = np.array(
        [float(np.max(vertices[fv] @ n)) for fv, n in zip(facet_vertices, normals)]
    )

    hull = ConvexHull(d, vertices, normals, offsets, facet_vertices)
    worst = float(np.max(contains_gap(hull, pts)))
    if worst > plane_tol * 1e2 * hull.scale():
        raise GeometryError(f"hull validation failed: input point protrudes by {worst:.3e}")
    return hull


def contains_gap(hull: ConvexHull, rows: np.ndarray) -> np.ndarray:
    """Worst facet violation per row (negative means strictly inside)."""
    vals = rows @ hull.facet_normals.T - hull.facet_offsets[None, :]
    return vals.max(axis=1)


def _hull_1d(pts: np.ndarray) -> ConvexHull:
    lo_id = int(np.argmin(pts[:, 0]))
    hi_id = int(np.argmax(pts[:, 0]))
    vertices = np.array([[pts[lo_id, 0]], [pts[hi_id, 0]]])
    normals = np.array([[-1.0], [1.0]])
    offsets = np.array([-pts[lo_id, 0], pts[hi_id, 0]])
    facet_vertices = np.array([[0], [1]])
    hull = ConvexHull(1, vertices, normals, offsets, facet_vertices)
    return hull



# -- persistence -----------------------------------------------------------


def hull_digest(hull: ConvexHull) -> str:
    """Short stable identifier of a hull (hash of its canonical JSON)."""
    import hashlib

    doc = {
        "dim": hull.dim,
        "vertices": [list(map(float, row)) for row in hull.vertices],
        "volume": hull.volume,
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def save_hull(hull: ConvexHull, path) -> None:
    """Write the hull as JSON; floats survive round-trips losslessly."""
    doc = {
        "dim": hull.dim,
        "vertices": [list(map(float, row)) for row in hull.vertices],
        "facets": [
            {"normal": list(map(float, n)), "offset": float(b)}
            for n, b in zip(hull.facet_normals, hull.facet_offsets)
        ],
        "volume": hull.volume,
        "facet_vertices": [list(map(int, row)) for row in hull.facet_vertices],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_hull(path) -> ConvexHull:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    dim = int(doc["dim"])
    vertices = np.asarray(doc["vertices"], float).reshape(-1, dim)
    normals = np.asarray([f["normal"] for f in doc["facets"]], float).reshape(-1, dim)
    offsets = np.asarray([f["offset"] for f in doc["facets"]], float)
    if "facet_vertices" in doc:
        fv = np.asarray(doc["facet_vertices"], int).reshape(-1, dim)
        return ConvexHull(dim, vertices, normals, offsets, fv, volume=float(doc["volume"]))
    rebuilt = build_hull(vertices)
    return rebuilt
