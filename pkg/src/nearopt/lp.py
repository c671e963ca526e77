"""Linear-program container and solve front end.

A :class:`LinearProgram` is an immutable value object holding

    minimize    c @ x
    subject to  a_eq @ x == b_eq
                a_ub @ x <= d_ub
                lo <= x <= hi        (entries may be -inf / +inf)

Constraint matrices are stored sparse (CSR) so that desk-scale energy
models with ~10^4 columns stay cheap to copy and append to.  Solving goes
either through the built-in bounded revised simplex (`backend="simplex"`,
see :mod:`nearopt._simplex`) or through scipy's HiGHS (`backend="highs"`)
for instances too large for a dense solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

#: Above this many columns or rows, `backend="auto"` routes to HiGHS.
DENSE_LIMIT = 600


class NumericalFailureError(RuntimeError):
    """Raised when a solve breaks down numerically instead of returning a
    silently wrong answer (cycling, singular basis, failed residual check)."""


def _as_csr(mat, n_cols: int) -> sp.csr_matrix:
    if mat is None:
        return sp.csr_matrix((0, n_cols))
    m = sp.csr_matrix(mat, dtype=float)
    if m.shape[1] != n_cols and m.shape[0] == 0:
        m = sp.csr_matrix((0, n_cols))
    return m


@dataclass(frozen=True)
class LinearProgram:
    """Immutable convex LP; safe to share across threads."""

    c: np.ndarray
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    a_ub: sp.csr_matrix
    d_ub: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    names: tuple

    def __post_init__(self):
        n = self.c.shape[0]
        for label, vec, rows in (
            ("b_eq", self.b_eq, self.a_eq),
            ("d_ub", self.d_ub, self.a_ub),
        ):
            if rows.shape[1] != n:
                raise ValueError(f"{label} matrix has {rows.shape[1]} columns, expected {n}")
            if vec.shape[0] != rows.shape[0]:
                raise ValueError(f"{label} length {vec.shape[0]} != row count {rows.shape[0]}")
        if self.lo.shape[0] != n or self.hi.shape[0] != n:
            raise ValueError("bound vectors must match column count")
        if len(self.names) != n:
            raise ValueError(f"{len(self.names)} names for {n} columns")
        if len(set(self.names)) != n:
            raise ValueError("variable names must be unique")
        for label, arr in (("c", self.c), ("b_eq", self.b_eq), ("d_ub", self.d_ub)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite entries in {label}")
        for mat in (self.a_eq, self.a_ub):
            if mat.nnz and not np.all(np.isfinite(mat.data)):
                raise ValueError("non-finite entries in constraint matrix")
        # bounds may be +-inf but never NaN
        if np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)):
            raise ValueError("NaN in variable bounds")
        for arr in (self.c, self.b_eq, self.d_ub, self.lo, self.hi):
            arr.flags.writeable = False

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.a_eq.shape[0] + self.a_ub.shape[0]


def make_lp(
    c,
    a_eq=None,
    b_eq=None,
    a_ub=None,
    d_ub=None,
    lo=None,
    hi=None,
    names: Optional[Sequence[str]] = None,
) -> LinearProgram:
    """Build a :class:`LinearProgram`, filling in open bounds and names."""
    c = np.asarray(c, dtype=float).ravel()
    n = c.shape[0]
    lo = np.full(n, -np.inf) if lo is None else np.asarray(lo, dtype=float).ravel()
    hi = np.full(n, np.inf) if hi is None else np.asarray(hi, dtype=float).ravel()
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    d_ub = np.zeros(0) if d_ub is None else np.asarray(d_ub, dtype=float).ravel()
    if names is None:
        names = tuple(f"x{i}" for i in range(n))
    return LinearProgram(
        c=c,
        a_eq=_as_csr(a_eq, n),
        b_eq=b_eq,
        a_ub=_as_csr(a_ub, n),
        d_ub=d_ub,
        lo=lo,
        hi=hi,
        names=tuple(names),
    )


@dataclass(frozen=True)
class LpSolution:
    """Outcome of a solve; `x` and `objective_value` are set when optimal."""

    status: str
    x: Optional[np.ndarray] = None
    objective_value: float = float("nan")
    iterations: int = 0
    backend: str = ""

    def __post_init__(self):
        if self.x is not None:
            self.x.flags.writeable = False


def with_objective(lp: LinearProgram, c_new) -> LinearProgram:
    """Copy of `lp` with a replacement objective; constraints untouched."""
    c_new = np.asarray(c_new, dtype=float).ravel()
    if c_new.shape[0] != lp.n_vars:
        raise ValueError(f"objective length {c_new.shape[0]} != {lp.n_vars} columns")
    return LinearProgram(
        c=c_new,
        a_eq=lp.a_eq,
        b_eq=lp.b_eq,
        a_ub=lp.a_ub,
        d_ub=lp.d_ub,
        lo=lp.lo,
        hi=lp.hi,
        names=lp.names,
    )


def with_row(lp: LinearProgram, coeffs, rhs: float, sense: str = "<=") -> LinearProgram:
    """Copy of `lp` with one row appended (`sense` is "<=" or "=")."""
    coeffs = np.asarray(coeffs, dtype=float).ravel()
    if coeffs.shape[0] != lp.n_vars:
        raise ValueError(f"row length {coeffs.shape[0]} != {lp.n_vars} columns")
    row = sp.csr_matrix(coeffs.reshape(1, -1))
    if sense == "<=":
        return LinearProgram(
            c=lp.c,
            a_eq=lp.a_eq,
            b_eq=lp.b_eq,
            a_ub=sp.vstack([lp.a_ub, row], format="csr"),
            d_ub=np.append(lp.d_ub, float(rhs)),
            lo=lp.lo,
            hi=lp.hi,
            names=lp.names,
        )
    if sense == "=":
        return LinearProgram(
            c=lp.c,
            a_eq=sp.vstack([lp.a_eq, row], format="csr"),
            b_eq=np.append(lp.b_eq, float(rhs)),
            a_ub=lp.a_ub,
            d_ub=lp.d_ub,
            lo=lp.lo,
            hi=lp.hi,
            names=lp.names,
        )
    raise ValueError(f"unknown row sense {sense!r}")


def feasibility_violation(lp: LinearProgram, x: np.ndarray) -> float:
    """Worst constraint violation of `x`, measured on max-abs-scaled rows."""
    worst = 0.0
    if lp.a_eq.shape[0]:
        resid = np.abs(lp.a_eq @ x - lp.b_eq)
        scale = _row_scales(lp.a_eq, lp.b_eq)
        worst = max(worst, float(np.max(resid / scale)))
    if lp.a_ub.shape[0]:
        resid = lp.a_ub @ x - lp.d_ub
        scale = _row_scales(lp.a_ub, lp.d_ub)
        worst = max(worst, float(np.max(resid / scale)))
    span = np.maximum(1.0, np.maximum(np.abs(lp.lo), np.abs(lp.hi)))
    span[~np.isfinite(span)] = 1.0
    below = np.where(np.isfinite(lp.lo), lp.lo - x, 0.0) / span
    above = np.where(np.isfinite(lp.hi), x - lp.hi, 0.0) / span
    worst = max(worst, float(np.max(below, initial=0.0)), float(np.max(above, initial=0.0)))
    return worst


def _row_scales(mat: sp.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.abs(mat).max(axis=1).toarray().ravel(), np.abs(rhs))
    return np.maximum(scale, 1.0)


def solve(lp: LinearProgram, backend: str = "auto", feas_tol: float = 1e-7) -> LpSolution:
    """Solve `lp` to optimality.

    `backend="simplex"` uses the built-in dense bounded revised simplex,
    `"highs"` scipy's HiGHS, and `"auto"` picks the simplex below
    :data:`DENSE_LIMIT` rows/columns and HiGHS above it.  Optimal solutions
    are re-checked for feasibility; a violated check raises
    :class:`NumericalFailureError` rather than returning a wrong answer.
    """
    if backend == "auto":
        backend = "simplex" if max(lp.n_vars, lp.n_rows) <= DENSE_LIMIT else "highs"
    if backend == "simplex":
        from nearopt._simplex import simplex_solve

        sol = simplex_solve(lp, feas_tol=feas_tol)
    elif backend == "highs":
        sol = _solve_highs(lp)
    else:
        raise ValueError(f"unknown backend {backend!r}")

    if sol.status == OPTIMAL:
        worst = feasibility_violation(lp, sol.x)
        if worst > 100 * feas_tol:
            raise NumericalFailureError(
                f"{backend} returned an infeasible 'optimal' point (violation {worst:.3e})"
            )
    return sol


def _solve_highs(lp: LinearProgram) -> LpSolution:
    from scipy.optimize import linprog

    bounds = np.column_stack([lp.lo, lp.hi])
    res = linprog(
        lp.c,
        A_ub=lp.a_ub if lp.a_ub.shape[0] else None,
        b_ub=lp.d_ub if lp.d_ub.shape[0] else None,
        A_eq=lp.a_eq if lp.a_eq.shape[0] else None,
        b_eq=lp.b_eq if lp.b_eq.shape[0] else None,
        bounds=bounds,
        method="highs",
    )
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 0:
        x = np.asarray(res.x, dtype=float)
        return LpSolution(OPTIMAL, x, float(lp.c @ x), iters, "highs")
    if res.status == 2:
        return LpSolution(INFEASIBLE, iterations=iters, backend="highs")
    if res.status == 3:
        return LpSolution(UNBOUNDED, iterations=iters, backend="highs")
    raise NumericalFailureError(f"HiGHS failed: {res.message}")
