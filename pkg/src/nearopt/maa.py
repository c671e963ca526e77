"""Phase 1: bound the near-optimal solution space.

Given an LP with optimum value f*, all solutions whose original cost stays
within a slack fraction eps form the polytope W (the original feasible set
plus one cost row).  W is explored in a low-dimensional space of derived
variables y = P x.  The search alternates between building the convex hull
of the support points found so far and re-optimizing along every hull facet
normal that has not been searched yet, until the hull volume stops growing.

The one-at-a-time min/max search over the derived axes doubles as the
classic MGA baseline and as the initialization of the iteration.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

from nearopt import lp as lpmod
from nearopt.geometry import (
    DIM_CAP,
    ConvexHull,
    DimensionCapError,
    RankDeficiencyError,
    affine_rank,
    build_hull,
    contains,
)

#: facet normals closer than this cosine to a searched direction are skipped
DIRECTION_COS_TOL = 1.0 - 1e-6
#: new support points within this relative ball of known ones are dropped
VERTEX_DEDUP_TOL = 1e-6
#: default relative volume-growth termination threshold
DEFAULT_VOL_TOL = 1e-3


class SearchSpaceError(RuntimeError):
    """The near-optimal space is empty or unbounded (a modeling defect)."""


@dataclass(frozen=True)
class Projection:
    """Linear map from the full variable vector to d derived variables."""

    matrix: np.ndarray
    derived_names: tuple

    def __post_init__(self):
        mat = np.asarray(self.matrix, float)
        object.__setattr__(self, "matrix", mat)
        if mat.ndim != 2:
            raise ValueError("projection matrix must be 2-D")
        d = mat.shape[0]
        if len(self.derived_names) != d:
            raise ValueError(f"{len(self.derived_names)} names for {d} derived variables")
        if d > DIM_CAP:
            raise DimensionCapError(d)
        if not np.all(np.isfinite(mat)):
            raise ValueError("non-finite projection coefficients")
        if np.any(mat < 0):
            raise ValueError("projection rows must be nonnegative capacity aggregations")
        mat.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x


@dataclass(frozen=True)
class Direction:
    """Unit search direction in derived space (the minimized objective)."""

    n: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.n, float)
        norm = float(np.linalg.norm(vec))
        if abs(norm - 1.0) > 1e-12:
            if norm == 0:
                raise ValueError("zero direction")
            vec = vec / norm
        object.__setattr__(self, "n", vec)
        vec.flags.writeable = False


@dataclass(frozen=True)
class VertexRecord:
    """One support point of W: derived point, full solution, search data."""

    y: np.ndarray
    x: np.ndarray
    direction: np.ndarray
    cost: float


@dataclass
class NearOptimalSpace:
    """Converged (or capped) description of the near-optimal space.

    When the support points span only an affine subspace of the derived
    space, `hull` lives in reduced coordinates: u = reduced_basis @ (y -
    reduced_origin); `reduced_basis` is None for full-rank spaces.
    `solve_count` counts directional (near-optimal) solves, excluding the
    initial optimization.
    """

    epsilon: float
    f_star: float
    x_star: np.ndarray
    projection: Projection
    vertices: List[VertexRecord]
    hull: Optional[ConvexHull]
    volume_history: List[float]
    solve_count: int
    converged: bool
    termination: str = "volume-growth"
    reduced_basis: Optional[np.ndarray] = None
    reduced_origin: Optional[np.ndarray] = None
    fixed_coordinates: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def vertex_matrix(self) -> np.ndarray:
        return np.array([r.y for r in self.vertices])

    def to_reduced(self, y: np.ndarray) -> np.ndarray:
        if self.reduced_basis is None:
            return np.asarray(y, float)
        return self.reduced_basis @ (np.asarray(y, float) - self.reduced_origin)

    def from_reduced(self, u: np.ndarray) -> np.ndarray:
        if self.reduced_basis is None:
            return np.asarray(u, float)
        return self.reduced_origin + self.reduced_basis.T @ np.asarray(u, float)

    def contains_derived(self, y: np.ndarray, tol: float) -> bool:
        if self.hull is None:
            ref = self.vertices[0].y
            return bool(np.max(np.abs(np.asarray(y) - ref)) <= tol)
        u = self.to_reduced(y)
        if self.reduced_basis is not None:
            # off-subspace component must vanish too
            back = self.from_reduced(u)
            if float(np.max(np.abs(back - np.asarray(y, float)))) > tol:
                return False
        return contains(self.hull, u, tol)


def add_mga_constraint(
    lp: lpmod.LinearProgram,
    f_star: float,
    epsilon: float,
    absolute_slack: Optional[float] = None,
) -> lpmod.LinearProgram:
    """Append the cost-slack row bounding the original objective.

    For a positive optimum the bound is f*(1+eps); for a negative one
    f* + eps|f*| (a relative slack must widen, not shrink, the budget).
    A zero optimum carries no scale, so an explicit `absolute_slack` is
    required then.
    """
    if epsilon < 0:
        raise ValueError("slack must be nonnegative")
    if f_star == 0.0:
        if absolute_slack is None:
            raise ValueError(
                "optimum is exactly zero: a relative slack has no scale; "
                "pass absolute_slack explicitly"
            )
        rhs = float(absolute_slack)
    else:
        rhs = f_star + epsilon * abs(f_star)
    return lpmod.with_row(lp, lp.c, rhs, "<=")


def directional_solve(
    lp_w: lpmod.LinearProgram,
    projection: Projection,
    direction: Direction,
    backend: str = "auto",
) -> VertexRecord:
    """Support point of W in (minimization) direction n over derived space.

    Solves min (P^T n) @ x over W and records y = P x together with the
    original-objective cost of the point.
    """
    n = direction.n if isinstance(direction, Direction) else Direction(np.asarray(direction)).n
    obj = projection.matrix.T @ n
    sol = lpmod.solve(lpmod.with_objective(lp_w, obj), backend=backend)
    if sol.status == lpmod.UNBOUNDED:
        raise SearchSpaceError(
            "directional solve is unbounded: the near-optimal space must be "
            "bounded in every derived direction (check the model's bounds)"
        )
    if sol.status != lpmod.OPTIMAL:
        raise SearchSpaceError(f"directional solve ended with status {sol.status}")
    x = sol.x
    return VertexRecord(projection.apply(x), x, n, float(lp_w.c @ x))


def mga_extremes(
    lp_w: lpmod.LinearProgram,
    projection: Projection,
    backend: str = "auto",
) -> List[VertexRecord]:
    """One-at-a-time baseline: min and max of every derived variable (2d
    solves), also used to initialize the facet-normal iteration."""
    records = []
    d = projection.dim
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        records.append(directional_solve(lp_w, projection, Direction(e), backend))
        records.append(directional_solve(lp_w, projection, Direction(-e), backend))
    return records


def _dedup(cloud: List[VertexRecord], candidates: List[VertexRecord]) -> List[VertexRecord]:
    """Candidates whose y is not within the relative dedup ball of cloud."""
    kept = []
    ys = [r.y for r in cloud]
    for rec in candidates:
        pool = ys + [r.y for r in kept]
        if not pool:
            kept.append(rec)
            continue
        arr = np.array(pool)
        scale = max(float(np.max(np.abs(arr))), float(np.max(np.abs(rec.y))), 1e-30)
        dist = np.max(np.abs(arr - rec.y), axis=1)
        if np.min(dist) > VERTEX_DEDUP_TOL * scale:
            kept.append(rec)
    return kept


_WORKER_STATE = None


def _init_worker(lp_w, projection, backend):
    global _WORKER_STATE
    _WORKER_STATE = (lp_w, projection, backend)


def _worker_solve(n):
    lp_w, projection, backend = _WORKER_STATE
    return directional_solve(lp_w, projection, Direction(n), backend)


def _solve_batch(lp_w, projection, directions, backend, threads):
    if threads <= 1 or len(directions) <= 1:
        return [directional_solve(lp_w, projection, Direction(n), backend) for n in directions]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(
        max_workers=min(threads, len(directions)),
        initializer=_init_worker,
        initargs=(lp_w, projection, backend),
    ) as pool:
        return list(pool.map(_worker_solve, directions))


def _facet_areas(hull) -> np.ndarray:
    """(d-1)-measure of every (simplicial) facet, batched Gram determinant."""
    import math

    verts = hull.vertices
    fv = hull.facet_vertices
    edges = verts[fv[:, 1:]] - verts[fv[:, :1]]
    gram = edges @ np.transpose(edges, (0, 2, 1))
    dets = np.linalg.det(gram)
    return np.sqrt(np.clip(dets, 0.0, None)) / math.factorial(hull.dim - 1)


def _facet_gap_bounds(
    hull,
    support_dirs: np.ndarray,
    support_vals: np.ndarray,
    box_center: np.ndarray,
    box_radius: float,
) -> np.ndarray:
    """Upper bound on how far W can extend beyond each hull facet.

    Every directional solve certifies a supporting halfspace
    m_k . y <= s_k; together with the bounding box of the axis extremes,
    the reach of W past facet (n_f, b_f) is at most

        min_k [ cos(n_f, m_k) (s_k - m_k . c) + sin(n_f, m_k) r ] + n_f . c - b_f

    (valid for nonnegative cosines, with c the box center and r its
    circumradius).  Facets with a tiny bound are certified explored and
    never searched; the area-weighted sum estimates the missing volume.
    """
    normals = hull.facet_normals
    offsets = hull.facet_offsets
    cos = np.clip(normals @ support_dirs.T, 0.0, 1.0)
    sin = np.sqrt(np.clip(1.0 - cos**2, 0.0, None))
    reach = support_vals - support_dirs @ box_center
    bound = cos * reach[None, :] + sin * box_radius
    usable = cos > 1e-9
    bound = np.where(usable, bound, np.inf)
    best = bound.min(axis=1)
    gaps = best + normals @ box_center - offsets
    return np.clip(gaps, 0.0, None)


def run_phase1(
    lp: lpmod.LinearProgram,
    projection: Projection,
    epsilon: float,
    vol_tol: float = DEFAULT_VOL_TOL,
    max_iter: int = 20,
    backend: str = "auto",
    threads: int = 1,
    f_star_override: Optional[float] = None,
    absolute_slack: Optional[float] = None,
    max_batch: Optional[int] = None,
) -> NearOptimalSpace:
    """Map the near-optimal space of `lp` in the projected coordinates.

    Solves the original program, adds the slack row, initializes with the
    one-at-a-time extremes and then repeatedly (a) builds the hull of all
    support points found, (b) searches every facet normal not yet searched
    (within cosine tolerance), deduplicating new points, until the relative
    volume growth over a full iteration drops below `vol_tol`, no unsearched
    normals remain, or `max_iter` direction batches have run.

    `max_batch` caps the directional solves per iteration: above the cap a
    greedy max-spread subset of the unsearched facet normals is taken and
    the volume criterion is checked after each capped batch.  Facet counts
    grow combinatorially beyond roughly five dimensions, so a cap keeps
    wall clock bounded at a small risk of terminating on a locally flat
    batch; None searches every facet normal exactly as stated above.

    `f_star_override` substitutes the slack reference (used by sweep runs
    that share one global cost budget); the program is still solved once to
    obtain x*.
    """
    timings = {}
    t0 = time.perf_counter()
    base = lpmod.solve(lp, backend=backend)
    timings["optimize_s"] = time.perf_counter() - t0
    if base.status != lpmod.OPTIMAL:
        raise SearchSpaceError(f"original problem is {base.status}")
    f_star = float(base.objective_value) if f_star_override is None else float(f_star_override)

    lp_w = add_mga_constraint(lp, f_star, epsilon, absolute_slack)

    t1 = time.perf_counter()
    extremes = mga_extremes(lp_w, projection, backend)
    records = _dedup([], extremes)
    solve_count = 2 * projection.dim
    d = projection.dim

    searched = [r.direction for r in records]
    # supporting halfspaces certified by every solve: m.y <= s over all of W
    support_dirs = [-r.direction for r in extremes]
    support_vals = [float(-r.direction @ r.y) for r in extremes]
    ext_cloud = np.array([r.y for r in extremes])
    box_center = 0.5 * (ext_cloud.max(axis=0) + ext_cloud.min(axis=0))
    box_radius = 0.5 * float(np.linalg.norm(ext_cloud.max(axis=0) - ext_cloud.min(axis=0)))

    volume_history: List[float] = []
    converged = False
    termination = "iteration-cap"
    basis = None
    origin = None
    iterations = 0

    while True:
        cloud = np.array([r.y for r in records])
        rank, dirs = affine_rank(cloud)
        hull = None
        if rank == 0:
            volume_history.append(0.0)
            converged = True
            termination = "point-degenerate"
            basis, origin = None, cloud[0] * 0.0
            break
        if rank == d:
            try:
                basis, origin = None, None
                hull = build_hull(cloud)
            except RankDeficiencyError as err:
                rank, dirs = err.rank, err.directions
        if rank < d:
            origin = cloud.mean(axis=0)
            basis = dirs
            reduced = (cloud - origin) @ basis.T
            hull = build_hull(reduced)
        volume_history.append(hull.volume)

        if len(volume_history) >= 2:
            prev, cur = volume_history[-2], volume_history[-1]
            growth = np.inf if prev <= 0 else (cur - prev) / prev
            if growth < vol_tol:
                converged = True
                termination = "volume-growth"
                break
        if iterations >= max_iter:
            converged = False
            termination = "iteration-cap"
            break

        normals = hull.facet_normals
        gaps = None
        missing = None
        if basis is None:
            areas = _facet_areas(hull)
            gaps = _facet_gap_bounds(
                hull, np.array(support_dirs), np.array(support_vals), box_center, box_radius
            )
            missing = float(np.sum(areas * gaps))
            if hull.volume > 0 and missing <= vol_tol * hull.volume:
                # every facet is certified near-exhausted by the supporting
                # halfspaces: the unmapped volume is below tolerance
                converged = True
                termination = "support-gap"
                break
            # best available proxy for the cap volume behind each facet
            priority = areas * gaps
        else:
            normals = normals @ basis  # lift reduced normals to derived space
            priority = _facet_areas(hull)

        order = np.argsort(-priority, kind="stable")
        new_dirs: List[np.ndarray] = []
        searched_mat = np.array(searched)
        for fi in order:
            if max_batch is not None and len(new_dirs) >= max_batch:
                break
            if gaps is not None and gaps[fi] <= 1e-12 * max(box_radius, 1.0):
                continue  # certified: nothing lies beyond this facet
            cand = -normals[fi]  # minimizing -m pushes the support point past the facet
            if searched_mat.size and float(np.max(searched_mat @ cand)) > DIRECTION_COS_TOL:
                continue
            if new_dirs and float(np.max(np.array(new_dirs) @ cand)) > DIRECTION_COS_TOL:
                continue
            new_dirs.append(cand)
        if not new_dirs:
            converged = True
            termination = "facets-exhausted"
            break

        t_batch = time.perf_counter()
        batch = _solve_batch(lp_w, projection, new_dirs, backend, threads)
        solve_count += len(batch)
        searched.extend(new_dirs)
        for rec, direction in zip(batch, new_dirs):
            support_dirs.append(-direction)
            support_vals.append(float(-direction @ rec.y))
        records.extend(_dedup(records, batch))
        iterations += 1
        log.info(
            "iteration %d: volume %.6g, %d facets, %d directions solved in %.1fs, "
            "%d support points%s",
            iterations,
            volume_history[-1],
            len(normals),
            len(new_dirs),
            time.perf_counter() - t_batch,
            len(records),
            "" if missing is None else f", missing volume estimate {missing:.3g}",
        )

    timings["phase1_s"] = time.perf_counter() - t1

    fixed = {}
    if basis is not None or all(v == 0.0 for v in volume_history):
        cloud = np.array([r.y for r in records])
        span = cloud.max(axis=0) - cloud.min(axis=0)
        scale = max(float(np.max(np.abs(cloud))), 1e-30)
        for i, name in enumerate(projection.derived_names):
            if span[i] <= 1e-8 * scale:
                fixed[name] = float(cloud[:, i].mean())

    return NearOptimalSpace(
        epsilon=epsilon,
        f_star=f_star,
        x_star=base.x,
        projection=projection,
        vertices=records,
        hull=hull,
        volume_history=volume_history,
        solve_count=solve_count,
        converged=converged,
        termination=termination,
        reduced_basis=basis,
        reduced_origin=origin,
        fixed_coordinates=fixed,
        timings=timings,
    )


def reconstruct(
    lp_w: lpmod.LinearProgram,
    projection: Projection,
    y: Sequence[float],
    backend: str = "auto",
    band: float = 1e-6,
) -> lpmod.LpSolution:
    """Cheapest full solution in W whose projection lands on y (within a
    +-band scaled per coordinate).  Infeasible only for points hugging the
    hull boundary; callers flag such samples."""
    y = np.asarray(y, float)
    if y.shape[0] != projection.dim:
        raise ValueError("point dimension does not match the projection")
    out = lp_w
    for i in range(projection.dim):
        delta = band * max(1.0, abs(float(y[i])))
        row = projection.matrix[i]
        out = lpmod.with_row(out, row, float(y[i]) + delta, "<=")
        out = lpmod.with_row(out, -row, -(float(y[i]) - delta), "<=")
    return lpmod.solve(out, backend=backend)
