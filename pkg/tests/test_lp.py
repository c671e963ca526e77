import numpy as np
import pytest

from nearopt.lp import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    LinearProgram,
    feasibility_violation,
    make_lp,
    solve,
    with_objective,
    with_row,
)

from oracles import enumerate_vertices

BACKENDS = ["simplex", "highs"]


def random_bounded_lp(rng, n=5, m=8):
    """Random LP with box bounds (bounded) and a guaranteed interior point."""
    a_ub = rng.normal(size=(m, n))
    x0 = rng.uniform(0.2, 0.8, size=n)
    d_ub = a_ub @ x0 + rng.uniform(0.05, 1.0, size=m)
    c = rng.normal(size=n)
    return make_lp(c, a_ub=a_ub, d_ub=d_ub, lo=np.zeros(n), hi=np.ones(n))


def oracle_min(lp):
    _, best = enumerate_vertices(lp.c, lp.a_eq.toarray(), lp.b_eq, lp.a_ub.toarray(), lp.d_ub, lp.lo, lp.hi)
    return best


class TestConstruction:
    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            make_lp([1.0, 2.0], a_ub=[[1.0]], d_ub=[1.0])

    def test_rhs_length_mismatch(self):
        with pytest.raises(ValueError):
            make_lp([1.0], a_ub=[[1.0]], d_ub=[1.0, 2.0])

    def test_nonfinite_coefficient(self):
        with pytest.raises(ValueError):
            make_lp([np.nan])
        with pytest.raises(ValueError):
            make_lp([1.0], a_ub=[[np.inf]], d_ub=[1.0])

    def test_duplicate_names(self):
        with pytest.raises(ValueError):
            make_lp([1.0, 1.0], names=["a", "a"])

    def test_immutable_vectors(self):
        lp = make_lp([1.0, 2.0])
        with pytest.raises(ValueError):
            lp.c[0] = 5.0


class TestSolveBasics:
    @pytest.mark.parametrize("backend", BACKENDS)
    def test_single_active_bound(self, backend):
        lp = make_lp([1.0], lo=[1.0])
        sol = solve(lp, backend=backend)
        assert sol.status == OPTIMAL
        assert sol.x[0] == pytest.approx(1.0, abs=1e-9)
        assert sol.objective_value == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_dominant_coefficient_vertex(self, backend):
        lp = make_lp([-1.0, -2.0], a_ub=[[1.0, 1.0]], d_ub=[1.0], lo=[0.0, 0.0])
        sol = solve(lp, backend=backend)
        assert sol.status == OPTIMAL
        assert sol.x == pytest.approx([0.0, 1.0], abs=1e-9)
        assert sol.objective_value == pytest.approx(-2.0, abs=1e-9)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_infeasible_status(self, backend):
        lp = make_lp([1.0], a_ub=[[1.0]], d_ub=[-1.0], lo=[0.0])
        assert solve(lp, backend=backend).status == INFEASIBLE

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_unbounded_status(self, backend):
        lp = make_lp([-1.0], lo=[0.0])
        assert solve(lp, backend=backend).status == UNBOUNDED

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_equality_rows(self, backend):
        lp = make_lp(
            [1.0, 1.0],
            a_eq=[[1.0, 1.0]],
            b_eq=[3.0],
            lo=[0.0, 0.0],
            hi=[1.0, np.inf],
        )
        sol = solve(lp, backend=backend)
        assert sol.objective_value == pytest.approx(3.0, abs=1e-9)

    def test_crossed_bounds_infeasible(self):
        lp = make_lp([1.0], lo=[2.0], hi=[1.0])
        assert solve(lp, backend="simplex").status == INFEASIBLE

    def test_no_rows_box(self):
        lp = make_lp([1.0, -1.0], lo=[-2.0, -3.0], hi=[5.0, 4.0])
        sol = solve(lp, backend="simplex")
        assert sol.x == pytest.approx([-2.0, 4.0])


class TestRandomFamilyOracle:
    """Random 5-var / 8-inequality LPs vs the vertex-enumeration oracle."""

    @pytest.mark.parametrize("backend", BACKENDS)
    @pytest.mark.parametrize("seed", range(12))
    def test_matches_vertex_enumeration(self, seed, backend):
        rng = np.random.default_rng(1000 + seed)
        lp = random_bounded_lp(rng)
        best = oracle_min(lp)
        assert best is not None
        sol = solve(lp, backend=backend)
        assert sol.status == OPTIMAL
        assert sol.objective_value == pytest.approx(best, rel=1e-6, abs=1e-9)

    @pytest.mark.parametrize("seed", range(6))
    def test_with_equalities_matches_oracle(self, seed):
        rng = np.random.default_rng(2000 + seed)
        n = 5
        lp0 = random_bounded_lp(rng, n=n, m=6)
        # pin a random hyperplane through a feasible interior point
        coeffs = rng.normal(size=n)
        x0 = np.full(n, 0.5)
        lp = LinearProgram(
            c=lp0.c,
            a_eq=_csr([coeffs], n),
            b_eq=np.array([coeffs @ x0]),
            a_ub=lp0.a_ub,
            d_ub=lp0.d_ub,
            lo=lp0.lo,
            hi=lp0.hi,
            names=lp0.names,
        )
        best = oracle_min(lp)
        if best is None:
            pytest.skip("degenerate random instance")
        sol = solve(lp, backend="simplex")
        assert sol.status == OPTIMAL
        assert sol.objective_value == pytest.approx(best, rel=1e-6, abs=1e-9)

    @pytest.mark.parametrize("seed", range(8))
    def test_backends_agree(self, seed):
        rng = np.random.default_rng(3000 + seed)
        lp = random_bounded_lp(rng, n=7, m=12)
        a = solve(lp, backend="simplex")
        b = solve(lp, backend="highs")
        assert a.status == b.status == OPTIMAL
        assert a.objective_value == pytest.approx(b.objective_value, rel=1e-7, abs=1e-9)


class TestWithObjective:
    def test_identity(self):
        rng = np.random.default_rng(7)
        lp = random_bounded_lp(rng)
        same = with_objective(lp, lp.c)
        assert solve(same).objective_value == pytest.approx(solve(lp).objective_value, rel=1e-12)

    def test_sign_flip_on_box(self):
        lp = make_lp([2.0, -3.0], lo=[0.0, 0.0], hi=[1.0, 1.0])
        a = solve(lp, backend="simplex")
        b = solve(with_objective(lp, -lp.c), backend="simplex")
        assert a.x == pytest.approx([0.0, 1.0])
        assert b.x == pytest.approx([1.0, 0.0])

    @pytest.mark.parametrize("i", range(3))
    def test_coordinate_objective_matches_oracle(self, i):
        rng = np.random.default_rng(40 + i)
        lp = random_bounded_lp(rng)
        e = np.zeros(lp.n_vars)
        e[i] = 1.0
        lpi = with_objective(lp, e)
        best = oracle_min(lpi)
        assert solve(lpi).objective_value == pytest.approx(best, rel=1e-6, abs=1e-9)

    def test_length_mismatch(self):
        lp = make_lp([1.0, 2.0])
        with pytest.raises(ValueError):
            with_objective(lp, [1.0])


class TestWithRow:
    def test_vacuous_row(self):
        rng = np.random.default_rng(11)
        lp = random_bounded_lp(rng)
        padded = with_row(lp, np.zeros(lp.n_vars), 1.0, "<=")
        assert solve(padded).objective_value == pytest.approx(solve(lp).objective_value, rel=1e-12)

    def test_binding_at_optimum(self):
        rng = np.random.default_rng(12)
        lp = random_bounded_lp(rng)
        f_star = solve(lp).objective_value
        pinned = with_row(lp, lp.c, f_star, "<=")
        assert solve(pinned).objective_value == pytest.approx(f_star, rel=1e-7, abs=1e-9)

    def test_box_cut_matches_oracle(self):
        lp = make_lp([1.0, 1.0], lo=[0.0, 0.0], hi=[1.0, 1.0])
        e0 = np.array([1.0, 0.0])
        cut = with_row(with_objective(lp, -e0), e0, 0.5, "<=")
        best = oracle_min(cut)
        sol = solve(cut)
        assert sol.objective_value == pytest.approx(best, rel=1e-9)
        assert sol.x[0] == pytest.approx(0.5, abs=1e-9)

    def test_equality_row_sense(self):
        lp = make_lp([1.0, 0.0], lo=[0.0, 0.0], hi=[2.0, 2.0])
        pinned = with_row(lp, [1.0, 1.0], 3.0, "=")
        sol = solve(pinned)
        assert sol.x[0] + sol.x[1] == pytest.approx(3.0, abs=1e-9)

    def test_length_mismatch(self):
        lp = make_lp([1.0, 2.0])
        with pytest.raises(ValueError):
            with_row(lp, [1.0], 0.0, "<=")

    def test_original_untouched(self):
        lp = make_lp([1.0], lo=[0.0], hi=[1.0])
        with_row(lp, [1.0], 0.5, "<=")
        assert lp.a_ub.shape[0] == 0


class TestInvariants:
    @pytest.mark.parametrize("seed", range(5))
    def test_weak_duality_sanity(self, seed):
        rng = np.random.default_rng(500 + seed)
        lp = random_bounded_lp(rng)
        sol = solve(lp)
        value = sol.objective_value
        for _ in range(20):
            x = rng.uniform(0.0, 1.0, size=lp.n_vars)
            if feasibility_violation(lp, x) <= 1e-9:
                assert lp.c @ x >= value - 1e-7 * (1.0 + abs(value))

    def test_resolve_reproduces_objective(self):
        rng = np.random.default_rng(9)
        lp = random_bounded_lp(rng)
        a = solve(lp).objective_value
        b = solve(lp).objective_value
        assert b == pytest.approx(a, rel=1e-9)

    def test_feasible_point_satisfies_constraints(self):
        rng = np.random.default_rng(10)
        lp = random_bounded_lp(rng)
        sol = solve(lp)
        assert feasibility_violation(lp, sol.x) <= 1e-6


def _csr(rows, n):
    import scipy.sparse as sp

    return sp.csr_matrix(np.asarray(rows, float).reshape(-1, n))
