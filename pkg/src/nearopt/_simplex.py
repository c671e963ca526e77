"""Dense two-phase bounded revised simplex.

Built for desk-scale programs (hundreds of rows/columns): the basis is
re-factorized every iteration and basic values are recomputed exactly, so
numerical drift cannot accumulate.  Pricing is Dantzig (most violating
reduced cost) with a switch to Bland's rule after a stall, which makes
termination on degenerate programs guaranteed.  Rows are equilibrated by
max-abs scaling before the solve.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from nearopt.lp import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    LinearProgram,
    LpSolution,
    NumericalFailureError,
)

# nonbasic variable states
_BASIC = 0
_AT_LO = 1
_AT_UP = 2
_FREE = 3  # nonbasic free variable parked at zero

_PIVOT_TOL = 1e-10
_RC_TOL = 1e-9
_STALL_LIMIT = 100


class _Tableau:
    """Working state of one solve; owns nothing shared."""

    def __init__(self, mat: np.ndarray, rhs: np.ndarray, lo: np.ndarray, hi: np.ndarray):
        self.mat = mat  # (m, n_total) dense, row-scaled
        self.rhs = rhs
        self.lo = lo
        self.hi = hi
        self.m = mat.shape[0]
        self.n = mat.shape[1]
        self.state = np.full(self.n, _AT_LO, dtype=np.int8)
        self.basis = np.zeros(self.m, dtype=np.int64)
        self.x = np.zeros(self.n)

    def nonbasic_value(self, j: int) -> float:
        if self.state[j] == _AT_LO:
            return self.lo[j]
        if self.state[j] == _AT_UP:
            return self.hi[j]
        return 0.0

    def recompute_basics(self, lu) -> None:
        nb = self.state != _BASIC
        xn = np.where(self.state == _AT_LO, self.lo, np.where(self.state == _AT_UP, self.hi, 0.0))
        xn[~nb] = 0.0
        resid = self.rhs - self.mat @ xn
        self.x = xn
        if self.m:
            self.x[self.basis] = scipy.linalg.lu_solve(lu, resid)

    def factorize(self):
        if self.m == 0:
            return None
        b = self.mat[:, self.basis]
        try:
            lu = scipy.linalg.lu_factor(b)
        except scipy.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise NumericalFailureError("singular basis matrix") from exc
        if not np.all(np.isfinite(lu[0])):
            raise NumericalFailureError("singular basis matrix")
        return lu


def _run_phase(tab: _Tableau, cost: np.ndarray, max_iter: int) -> tuple:
    """Iterate to optimality for `cost`; returns (status, iterations)."""
    bland = False
    stall = 0
    last_obj = np.inf
    rc_tol = _RC_TOL * (1.0 + float(np.max(np.abs(cost), initial=0.0)))

    for it in range(max_iter):
        lu = tab.factorize()
        tab.recompute_basics(lu)
        obj = float(cost @ tab.x)
        if obj < last_obj - 1e-12 * (1.0 + abs(last_obj)):
            stall = 0
            last_obj = obj
        else:
            stall += 1
            if stall > _STALL_LIMIT:
                bland = True

        if tab.m:
            y = scipy.linalg.lu_solve(lu, cost[tab.basis], trans=1)
            rc = cost - tab.mat.T @ y
        else:
            rc = cost.copy()

        nonbasic = np.flatnonzero(tab.state != _BASIC)
        fixed = tab.lo[nonbasic] == tab.hi[nonbasic]
        st = tab.state[nonbasic]
        r = rc[nonbasic]
        eligible = ~fixed & (
            ((st == _AT_LO) & (r < -rc_tol))
            | ((st == _AT_UP) & (r > rc_tol))
            | ((st == _FREE) & (np.abs(r) > rc_tol))
        )
        if not np.any(eligible):
            return OPTIMAL, it

        cand = nonbasic[eligible]
        if bland:
            enter = int(cand[0])
        else:
            enter = int(cand[np.argmax(np.abs(rc[cand]))])
        direction = 1.0 if (tab.state[enter] == _AT_LO or rc[enter] < 0) else -1.0
        if tab.state[enter] == _AT_UP:
            direction = -1.0

        col = tab.mat[:, enter]
        w = scipy.linalg.lu_solve(lu, col) if tab.m else np.zeros(0)

        # ratio test: basic variables block when pushed against a bound,
        # the entering variable blocks at its own opposite bound
        theta = np.inf
        leave_pos = -1
        leave_to = _AT_LO
        if tab.m:
            xb = tab.x[tab.basis]
            delta = -direction * w
            lo_b = tab.lo[tab.basis]
            hi_b = tab.hi[tab.basis]
            dec = delta < -_PIVOT_TOL
            inc = delta > _PIVOT_TOL
            with np.errstate(divide="ignore", invalid="ignore"):
                lim_dec = np.where(dec & np.isfinite(lo_b), (lo_b - xb) / delta, np.inf)
                lim_inc = np.where(inc & np.isfinite(hi_b), (hi_b - xb) / delta, np.inf)
            limits = np.minimum(lim_dec, lim_inc)
            limits = np.maximum(limits, 0.0)
            pos = int(np.argmin(limits))
            if limits[pos] < theta:
                theta = float(limits[pos])
                near = np.flatnonzero(limits <= theta + 1e-9 * (1.0 + theta))
                if bland:
                    # smallest variable index among near-minimal blockers
                    pos = int(near[np.argmin(tab.basis[near])])
                else:
                    pos = int(near[np.argmax(np.abs(delta[near]))])
                theta = float(limits[pos])
                leave_pos = pos
                leave_to = _AT_LO if delta[pos] < 0 else _AT_UP

        span = tab.hi[enter] - tab.lo[enter]
        if np.isfinite(span) and span < theta:
            theta = float(span)
            leave_pos = -2  # bound flip

        if not np.isfinite(theta):
            return UNBOUNDED, it

        if leave_pos == -2:
            tab.state[enter] = _AT_UP if tab.state[enter] == _AT_LO else _AT_LO
            continue
        if leave_pos < 0:  # theta == inf handled above; defensive
            raise NumericalFailureError("ratio test found no blocking variable")

        leaving = int(tab.basis[leave_pos])
        tab.state[leaving] = leave_to
        if not np.isfinite(tab.lo[leaving]) and leave_to == _AT_LO:
            tab.state[leaving] = _FREE
        if not np.isfinite(tab.hi[leaving]) and leave_to == _AT_UP:
            tab.state[leaving] = _FREE
        tab.basis[leave_pos] = enter
        tab.state[enter] = _BASIC

    raise NumericalFailureError(
        f"simplex did not terminate within {max_iter} iterations (cycling or breakdown)"
    )


def simplex_solve(lp: LinearProgram, feas_tol: float = 1e-7) -> LpSolution:
    """Two-phase bounded revised simplex over the dense row-scaled system."""
    n = lp.n_vars
    m_eq = lp.a_eq.shape[0]
    m_ub = lp.a_ub.shape[0]
    m = m_eq + m_ub
    if n * max(m, 1) > 5_000_000:
        raise ValueError(
            f"{m} rows x {n} columns is too large for the dense simplex; use backend='highs'"
        )
    if np.any(lp.lo > lp.hi):
        return LpSolution(INFEASIBLE, backend="simplex")

    # equality system [A_eq; A_ub | I_slack] z = [b; d], slacks >= 0
    n_total = n + m_ub
    mat = np.zeros((m, n_total))
    if m_eq:
        mat[:m_eq, :n] = lp.a_eq.toarray()
    if m_ub:
        mat[m_eq:, :n] = lp.a_ub.toarray()
        mat[m_eq:, n:] = np.eye(m_ub)
    rhs = np.concatenate([lp.b_eq, lp.d_ub])

    # max-abs row equilibration
    if m:
        scale = np.maximum(np.max(np.abs(mat), axis=1), 1e-12)
        mat /= scale[:, None]
        rhs = rhs / scale

    lo = np.concatenate([lp.lo, np.zeros(m_ub)])
    hi = np.concatenate([lp.hi, np.full(m_ub, np.inf)])

    tab = _Tableau(mat, rhs, lo, hi)
    for j in range(n_total):
        if np.isfinite(lo[j]):
            tab.state[j] = _AT_LO
        elif np.isfinite(hi[j]):
            tab.state[j] = _AT_UP
        else:
            tab.state[j] = _FREE

    iters_cap = max(5000, 200 * (m + 1))
    total_iters = 0

    if m:
        x0 = np.where(tab.state == _AT_LO, lo, np.where(tab.state == _AT_UP, hi, 0.0))
        resid = rhs - mat @ x0

        art_cols = []
        art_of_row = {}
        for i in range(m):
            if i >= m_eq and resid[i] >= 0.0:
                tab.basis[i] = n + (i - m_eq)  # slack absorbs the residual
                tab.state[n + (i - m_eq)] = _BASIC
            else:
                art_of_row[i] = len(art_cols)
                art_cols.append(i)
        if art_cols:
            n_art = len(art_cols)
            full = np.zeros((m, n_total + n_art))
            full[:, :n_total] = mat
            for k, i in enumerate(art_cols):
                full[i, n_total + k] = 1.0 if resid[i] >= 0 else -1.0
                tab.basis[i] = n_total + k
            tab.mat = full
            tab.n = n_total + n_art
            tab.lo = np.concatenate([lo, np.zeros(n_art)])
            tab.hi = np.concatenate([hi, np.full(n_art, np.inf)])
            tab.state = np.concatenate([tab.state, np.full(n_art, _AT_LO, dtype=np.int8)])
            tab.state[tab.basis] = _BASIC
            tab.x = np.zeros(tab.n)

            cost1 = np.zeros(tab.n)
            cost1[n_total:] = 1.0
            status, its = _run_phase(tab, cost1, iters_cap)
            total_iters += its
            if status == UNBOUNDED:  # pragma: no cover - phase 1 is bounded below
                raise NumericalFailureError("phase 1 reported unbounded")
            lu = tab.factorize()
            tab.recompute_basics(lu)
            if float(np.sum(tab.x[n_total:])) > feas_tol * (1.0 + float(np.sum(np.abs(rhs)))):
                return LpSolution(INFEASIBLE, backend="simplex")
            # pin artificials at zero; they may stay basic but can never move
            tab.lo[n_total:] = 0.0
            tab.hi[n_total:] = 0.0

    cost2 = np.zeros(tab.n)
    cost2[:n] = lp.c
    status, its = _run_phase(tab, cost2, iters_cap)
    total_iters += its
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, iterations=total_iters, backend="simplex")

    lu = tab.factorize()
    tab.recompute_basics(lu)
    x = np.array(tab.x[:n])
    return LpSolution(OPTIMAL, x, float(lp.c @ x), total_iters, "simplex")
