import numpy as np
import pytest

from nearopt.geometry import DimensionCapError, build_hull
from nearopt.lp import INFEASIBLE, OPTIMAL, make_lp, solve, with_objective
from nearopt.maa import (
    Direction,
    Projection,
    add_mga_constraint,
    directional_solve,
    mga_extremes,
    reconstruct,
    run_phase1,
)

from oracles import shoelace_area

QUAD_VERTS = np.array([[0.5, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.5]])
QUAD_AREA = 0.375


def quad_lp():
    """min x+y over [0,1]^2 with x+y >= 0.5; f* = 0.5.

    With eps = 1.0 the near-optimal space is the quadrilateral
    (0.5,0),(1,0),(0,1),(0,0.5) of area 0.375."""
    return make_lp(
        [1.0, 1.0],
        a_ub=[[-1.0, -1.0]],
        d_ub=[-0.5],
        lo=[0.0, 0.0],
        hi=[1.0, 1.0],
        names=["x", "y"],
    )


def box_lp(lo=(1.0, 1.0), hi=(2.0, 3.0)):
    """Box W: huge slack makes the cost row vacuous over the box."""
    return make_lp([1.0, 1.0], lo=list(lo), hi=list(hi), names=["x", "y"])


def identity_projection(d, names=None):
    return Projection(np.eye(d), tuple(names or (f"y{i}" for i in range(d))))


class TestProjection:
    def test_dimension_cap(self):
        with pytest.raises(DimensionCapError):
            Projection(np.eye(11), tuple(f"v{i}" for i in range(11)))

    def test_negative_rows_rejected(self):
        with pytest.raises(ValueError):
            Projection(np.array([[-1.0, 0.0]]), ("a",))

    def test_name_count(self):
        with pytest.raises(ValueError):
            Projection(np.eye(2), ("only-one",))


class TestDirection:
    def test_normalized(self):
        d = Direction(np.array([3.0, 4.0]))
        assert np.linalg.norm(d.n) == pytest.approx(1.0, abs=1e-15)

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            Direction(np.zeros(2))


class TestMgaConstraint:
    def test_zero_slack_collapses_to_optimum(self):
        lp = quad_lp()
        f_star = solve(lp).objective_value
        lp_w = add_mga_constraint(lp, f_star, 0.0)
        proj = identity_projection(2)
        for vec in ([1.0, 0.0], [-1.0, 0.3], [0.2, -1.0]):
            rec = directional_solve(lp_w, proj, Direction(np.array(vec)))
            assert rec.cost == pytest.approx(f_star, abs=1e-7)

    def test_quadrilateral_area_analytic(self):
        lp = quad_lp()
        f_star = solve(lp).objective_value
        assert f_star == pytest.approx(0.5, abs=1e-9)
        assert shoelace_area(QUAD_VERTS[[0, 1, 2, 3]]) == pytest.approx(QUAD_AREA)

    def test_negative_optimum_slack_widens(self):
        lp = make_lp([-1.0], lo=[0.0], hi=[4.0])  # f* = -4
        f_star = solve(lp).objective_value
        lp_w = add_mga_constraint(lp, f_star, 0.25)  # cost <= -4 + 1 = -3
        sol = solve(with_objective(lp_w, np.array([1.0])))  # min x s.t. -x <= -3
        assert sol.x[0] == pytest.approx(3.0, abs=1e-9)

    def test_zero_optimum_requires_absolute_slack(self):
        lp = make_lp([1.0], lo=[0.0], hi=[1.0])  # f* = 0
        with pytest.raises(ValueError):
            add_mga_constraint(lp, 0.0, 0.1)
        lp_w = add_mga_constraint(lp, 0.0, 0.1, absolute_slack=0.5)
        sol = solve(with_objective(lp_w, np.array([-1.0])))
        assert sol.x[0] == pytest.approx(0.5, abs=1e-9)

    def test_negative_epsilon_rejected(self):
        with pytest.raises(ValueError):
            add_mga_constraint(quad_lp(), 0.5, -0.1)


class TestDirectionalSolve:
    def test_box_corner(self):
        lp_w = box_lp(lo=(0.0, 0.0), hi=(1.0, 1.0))
        proj = identity_projection(2)
        rec = directional_solve(lp_w, proj, Direction(np.array([-1.0, -1.0])))
        assert rec.y == pytest.approx([1.0, 1.0], abs=1e-9)

    def test_opposite_directions_give_width(self):
        lp_w = box_lp(lo=(1.0, 1.0), hi=(4.0, 2.0))
        proj = identity_projection(2)
        n = Direction(np.array([1.0, 0.0]))
        a = directional_solve(lp_w, proj, n)
        b = directional_solve(lp_w, proj, Direction(-n.n))
        assert float((b.y - a.y) @ n.n) == pytest.approx(3.0, abs=1e-9)

    def test_quadrilateral_supports_on_analytic_vertices(self):
        lp = quad_lp()
        f_star = solve(lp).objective_value
        lp_w = add_mga_constraint(lp, f_star, 1.0)
        proj = identity_projection(2)
        for k in range(16):
            ang = 2 * np.pi * k / 16.0
            rec = directional_solve(lp_w, proj, Direction(np.array([np.cos(ang), np.sin(ang)])))
            dist = np.min(np.linalg.norm(QUAD_VERTS - rec.y, axis=1))
            assert dist < 1e-7

    def test_unbounded_direction_is_model_defect(self):
        # cost only pins x; y is free upward, so W is an unbounded strip
        lp = make_lp([1.0, 0.0], lo=[1.0, 1.0])
        lp_w = add_mga_constraint(lp, solve(lp).objective_value, 1.0)
        from nearopt.maa import SearchSpaceError

        with pytest.raises(SearchSpaceError):
            directional_solve(lp_w, identity_projection(2), Direction(np.array([0.0, -1.0])))


class TestMgaExtremes:
    def test_exactly_2d_solves(self):
        lp_w = box_lp()
        for d, proj in ((2, identity_projection(2)),):
            recs = mga_extremes(lp_w, proj)
            assert len(recs) == 2 * d

    def test_box_axis_ranges_exact(self):
        lp_w = box_lp(lo=(1.0, 1.0), hi=(2.0, 3.0))
        recs = mga_extremes(lp_w, identity_projection(2))
        ys = np.array([r.y for r in recs])
        assert ys[:, 0].min() == pytest.approx(1.0, abs=1e-9)
        assert ys[:, 0].max() == pytest.approx(2.0, abs=1e-9)
        assert ys[:, 1].min() == pytest.approx(1.0, abs=1e-9)
        assert ys[:, 1].max() == pytest.approx(3.0, abs=1e-9)

    def test_extremes_inside_final_hull(self):
        lp = quad_lp()
        f_star = solve(lp).objective_value
        lp_w = add_mga_constraint(lp, f_star, 1.0)
        proj = identity_projection(2)
        recs = mga_extremes(lp_w, proj)
        space = run_phase1(lp, proj, epsilon=1.0)
        for rec in recs:
            assert space.contains_derived(rec.y, 1e-6)


class TestRunPhase1:
    def test_box_recovered_right_after_init(self):
        space = run_phase1(box_lp(), identity_projection(2), epsilon=10.0, vol_tol=1e-6)
        assert space.converged
        assert space.volume_history[-1] == pytest.approx(2.0, abs=1e-9)
        # exact after at most one direction batch beyond the extremes
        assert len(space.volume_history) <= 2
        assert space.volume_history[min(1, len(space.volume_history) - 1)] == pytest.approx(
            2.0, abs=1e-9
        )

    def test_quadrilateral_recovered(self):
        space = run_phase1(quad_lp(), identity_projection(2), epsilon=1.0, vol_tol=1e-6)
        assert space.converged
        assert space.volume_history[-1] == pytest.approx(QUAD_AREA, abs=1e-6)
        assert len(space.volume_history) <= 3
        # every analytic vertex appears among the support points
        ys = space.vertex_matrix
        for v in QUAD_VERTS:
            assert np.min(np.linalg.norm(ys - v, axis=1)) < 1e-7

    def test_volume_history_nondecreasing(self):
        space = run_phase1(quad_lp(), identity_projection(2), epsilon=1.0, vol_tol=1e-9)
        hist = space.volume_history
        assert all(b >= a - 1e-12 for a, b in zip(hist, hist[1:]))

    def test_all_vertices_respect_cost_slack(self):
        eps = 0.7
        space = run_phase1(quad_lp(), identity_projection(2), epsilon=eps)
        bound = space.f_star * (1 + eps)
        for rec in space.vertices:
            assert rec.cost <= bound + 1e-7
        # at least one support point exhausts the budget
        assert max(r.cost for r in space.vertices) == pytest.approx(bound, rel=1e-6)

    def test_solve_count_reported(self):
        space = run_phase1(quad_lp(), identity_projection(2), epsilon=1.0)
        assert space.solve_count >= 4  # at least the extremes
        assert space.solve_count == len({id(r) for r in space.vertices}) or space.solve_count >= len(
            space.vertices
        )

    def test_epsilon_zero_degenerates_to_point(self):
        # unique optimum: W collapses to x*
        lp = make_lp([1.0, 2.0], lo=[0.5, 0.25], hi=[2.0, 2.0], names=["a", "b"])
        space = run_phase1(lp, identity_projection(2, names=("a", "b")), epsilon=0.0)
        assert space.converged
        assert space.volume_history[-1] == 0.0
        assert space.fixed_coordinates == pytest.approx({"a": 0.5, "b": 0.25}, abs=1e-7)

    def test_flat_space_reduced_subspace(self):
        # W = segment: x+y = 1 fixed by equality, slack only moves along it
        lp = make_lp(
            [1.0, 1.0],
            a_eq=[[1.0, 1.0]],
            b_eq=[1.0],
            lo=[0.0, 0.0],
            hi=[1.0, 1.0],
            names=["x", "y"],
        )
        space = run_phase1(lp, identity_projection(2, names=("x", "y")), epsilon=5.0)
        assert space.converged
        assert space.reduced_basis is not None
        assert space.reduced_basis.shape == (1, 2)
        # 1-D measure of the segment from (1,0) to (0,1)
        assert space.volume_history[-1] == pytest.approx(np.sqrt(2.0), rel=1e-6)

    def test_iteration_cap_reports_not_converged(self):
        space = run_phase1(quad_lp(), identity_projection(2), epsilon=1.0, vol_tol=0.0, max_iter=0)
        assert not space.converged

    def test_permuting_derived_order_permutes_outputs(self):
        lp = quad_lp()
        p12 = Projection(np.eye(2), ("x", "y"))
        p21 = Projection(np.eye(2)[::-1].copy(), ("y", "x"))
        s12 = run_phase1(lp, p12, epsilon=1.0)
        s21 = run_phase1(lp, p21, epsilon=1.0)
        assert s12.volume_history[-1] == pytest.approx(s21.volume_history[-1], rel=1e-9)
        h12 = build_hull(s12.vertex_matrix)
        h21 = build_hull(s21.vertex_matrix[:, ::-1])
        assert h21.volume == pytest.approx(h12.volume, rel=1e-9)


class TestReconstruct:
    def setup_method(self):
        self.lp = quad_lp()
        self.f_star = solve(self.lp).objective_value
        self.lp_w = add_mga_constraint(self.lp, self.f_star, 1.0)
        self.proj = identity_projection(2)

    def test_optimum_reconstructs_itself(self):
        x_star = solve(self.lp).x
        y = self.proj.apply(x_star)
        sol = reconstruct(self.lp_w, self.proj, y)
        assert sol.status == OPTIMAL
        assert sol.objective_value == pytest.approx(self.f_star, abs=1e-6)

    def test_phase1_vertices_reconstruct_within_slack(self):
        space = run_phase1(self.lp, self.proj, epsilon=1.0)
        bound = self.f_star * 2.0
        for rec in space.vertices:
            sol = reconstruct(self.lp_w, self.proj, rec.y)
            assert sol.status == OPTIMAL
            assert float(self.lp.c @ sol.x) <= bound + 1e-6

    def test_uniform_samples_reconstruct(self):
        from nearopt.sampler import sample_polytope

        space = run_phase1(self.lp, self.proj, epsilon=1.0)
        table = sample_polytope(space.hull, 100, seed=5)
        bound = self.f_star * 2.0
        for row in table.rows:
            sol = reconstruct(self.lp_w, self.proj, row)
            assert sol.status == OPTIMAL
            assert float(self.lp.c @ sol.x) <= bound * (1 + 1e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            reconstruct(self.lp_w, self.proj, np.zeros(3))

    def test_far_point_infeasible(self):
        sol = reconstruct(self.lp_w, self.proj, np.array([5.0, 5.0]))
        assert sol.status == INFEASIBLE
