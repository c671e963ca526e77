import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nearopt.geometry import (
    DimensionCapError,
    GeometryError,
    RankDeficiencyError,
    Simplex,
    build_hull,
    contains,
    contains_many,
    decompose,
    load_hull,
    save_hull,
    simplex_volume,
    volume,
)

from oracles import brute_force_hull_facets_3d, shoelace_area

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def random_rotation(rng, d):
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


class TestBuildHull:
    def test_unit_square(self):
        h = build_hull(SQUARE)
        assert len(h.vertices) == 4
        assert len(h.facet_normals) == 4
        assert h.volume == pytest.approx(1.0, abs=1e-12)

    def test_standard_4_simplex(self):
        pts = np.vstack([np.zeros(4), np.eye(4)])
        h = build_hull(pts)
        assert h.volume == pytest.approx(1.0 / 24.0, abs=1e-12)

    def test_unit_cube(self):
        pts = np.array(list(itertools.product([0.0, 1.0], repeat=3)))
        h = build_hull(pts)
        assert len(h.vertices) == 8
        assert h.volume == pytest.approx(1.0, abs=1e-9)

    def test_every_input_point_inside(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(60, 4))
        h = build_hull(pts)
        tol = 1e-9 * h.scale()
        assert np.all(contains_many(h, pts, tol))

    def test_vertices_subset_of_input(self):
        rng = np.random.default_rng(4)
        pts = rng.normal(size=(40, 3))
        h = build_hull(pts)
        for v in h.vertices:
            assert np.min(np.linalg.norm(pts - v, axis=1)) < 1e-12

    def test_facets_outward_consistent(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(50, 3))
        h = build_hull(pts)
        centroid = h.vertices.mean(axis=0)
        gaps = h.facet_normals @ centroid - h.facet_offsets
        assert np.all(gaps < 0)

    def test_ball_cloud_matches_brute_force_facets_3d(self):
        rng = np.random.default_rng(6)
        raw = rng.normal(size=(200, 3))
        pts = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        pts *= rng.uniform(0, 1, size=(200, 1)) ** (1 / 3)
        h = build_hull(pts)
        oracle = brute_force_hull_facets_3d(pts)
        mine = {tuple(np.round(n, 7)) for n in h.facet_normals}
        theirs = {tuple(np.round(n, 7)) for n, _ in oracle}
        assert mine == theirs

    def test_coplanar_points_absorbed_not_vertices(self):
        pts = np.vstack([SQUARE, [[0.5, 0.0], [0.0, 0.5], [0.25, 0.75]]])
        h = build_hull(pts)
        assert len(h.vertices) == 4
        assert h.volume == pytest.approx(1.0, abs=1e-12)

    def test_rank_deficiency_error_carries_rank_and_directions(self):
        pts = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.5, 0.5, 0.0]])
        with pytest.raises(RankDeficiencyError) as err:
            build_hull(pts)
        assert err.value.rank < 3
        dirs = err.value.directions
        assert dirs.shape == (err.value.rank, 3)
        # reported directions actually span the cloud
        centered = pts - pts.mean(axis=0)
        recon = centered @ dirs.T @ dirs
        assert np.allclose(recon, centered, atol=1e-9)

    def test_too_few_points_is_rank_error(self):
        with pytest.raises(RankDeficiencyError):
            build_hull(np.array([[0.0, 0.0], [1.0, 0.0]]))

    def test_dimension_cap(self):
        rng = np.random.default_rng(7)
        with pytest.raises(DimensionCapError):
            build_hull(rng.normal(size=(30, 11)))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            build_hull(np.array([[0.0, np.inf], [1.0, 0.0], [0.0, 1.0]]))

    def test_1d_hull(self):
        h = build_hull(np.array([[3.0], [-1.0], [2.0]]))
        assert h.volume == pytest.approx(4.0)
        assert sorted(v[0] for v in h.vertices) == [-1.0, 3.0]


class TestVolume:
    def test_axis_aligned_box(self):
        a, b, c = 2.0, 3.0, 0.5
        pts = np.array(list(itertools.product([0, a], [0, b], [0, c])), dtype=float)
        assert volume(build_hull(pts)) == pytest.approx(a * b * c, rel=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_polygon_matches_shoelace(self, seed):
        rng = np.random.default_rng(100 + seed)
        angles = np.sort(rng.uniform(0, 2 * np.pi, size=12))
        radii = rng.uniform(0.5, 2.0, size=12)
        poly = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
        h = build_hull(poly)
        order = np.argsort(np.arctan2(h.vertices[:, 1], h.vertices[:, 0]))
        assert h.volume == pytest.approx(shoelace_area(h.vertices[order]), rel=1e-9)

    def test_invariant_under_permutation(self):
        rng = np.random.default_rng(8)
        pts = rng.normal(size=(30, 3))
        v1 = build_hull(pts).volume
        v2 = build_hull(pts[rng.permutation(30)]).volume
        assert v2 == pytest.approx(v1, rel=1e-9)

    def test_invariant_under_rigid_motion(self):
        rng = np.random.default_rng(9)
        pts = rng.normal(size=(25, 3))
        rot = random_rotation(rng, 3)
        shift = rng.normal(size=3)
        v1 = build_hull(pts).volume
        v2 = build_hull(pts @ rot.T + shift).volume
        assert v2 == pytest.approx(v1, rel=1e-9)

    def test_matches_qhull_library(self):
        # scipy wraps the same quickhull lineage; use it as a second opinion
        from scipy.spatial import ConvexHull as SciHull

        rng = np.random.default_rng(10)
        for d in (2, 3, 4, 5, 6):
            pts = rng.normal(size=(80, d))
            assert build_hull(pts).volume == pytest.approx(SciHull(pts).volume, rel=1e-9)


class TestDecompose:
    def test_square_two_triangles(self):
        sims = decompose(build_hull(SQUARE))
        assert len(sims) == 2
        assert sorted(s.volume for s in sims) == pytest.approx([0.5, 0.5])

    def test_simplex_identity(self):
        pts = np.vstack([np.zeros(3), np.eye(3)])
        h = build_hull(pts)
        sims = decompose(h)
        assert len(sims) == 1
        assert sims[0].volume == pytest.approx(h.volume, rel=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_volumes_sum_to_hull_volume_4d(self, seed):
        rng = np.random.default_rng(200 + seed)
        pts = rng.normal(size=(40, 4))
        h = build_hull(pts)
        total = sum(s.volume for s in decompose(h))
        assert total == pytest.approx(h.volume, rel=1e-9)

    def test_partition_no_double_cover(self):
        # membership counts: interior samples must fall in exactly one simplex
        rng = np.random.default_rng(11)
        pts = rng.normal(size=(25, 3))
        h = build_hull(pts)
        sims = decompose(h)
        probes = h.vertices.mean(axis=0) + 0.3 * rng.normal(size=(200, 3))
        tol = 1e-9 * h.scale()
        inside = contains_many(h, probes, -1e-6 * h.scale())  # strictly interior
        for p in probes[inside]:
            hits = sum(1 for s in sims if _in_simplex(s, p, 1e-9))
            assert hits == 1

    def test_simplex_vertex_count_invariant(self):
        rng = np.random.default_rng(12)
        pts = rng.normal(size=(30, 5))
        for s in decompose(build_hull(pts)):
            assert s.points.shape == (6, 5)
            assert s.volume > 0


class TestContains:
    def test_centroid_inside(self):
        rng = np.random.default_rng(13)
        pts = rng.normal(size=(30, 4))
        h = build_hull(pts)
        assert contains(h, h.vertices.mean(axis=0), 1e-9)

    def test_far_point_outside(self):
        h = build_hull(SQUARE)
        diag = h.scale()
        assert not contains(h, h.vertices.mean(axis=0) + 10 * diag, 1e-9)

    def test_vertices_on_boundary(self):
        rng = np.random.default_rng(14)
        pts = rng.normal(size=(30, 3))
        h = build_hull(pts)
        tol = 1e-9 * h.scale()
        assert np.all(contains_many(h, h.vertices, tol))


class TestIncrementalProperties:
    def test_adding_interior_point_changes_nothing(self):
        rng = np.random.default_rng(15)
        pts = rng.normal(size=(25, 3))
        h1 = build_hull(pts)
        inner = h1.vertices.mean(axis=0)
        h2 = build_hull(np.vstack([pts, inner]))
        assert h2.volume == pytest.approx(h1.volume, rel=1e-12)
        assert len(h2.vertices) == len(h1.vertices)
        assert {tuple(np.round(n, 9)) for n in h2.facet_normals} == {
            tuple(np.round(n, 9)) for n in h1.facet_normals
        }

    def test_adding_outside_point_grows_volume(self):
        rng = np.random.default_rng(16)
        pts = rng.normal(size=(25, 3))
        h1 = build_hull(pts)
        outside = h1.vertices.mean(axis=0) + np.array([10.0, 0.0, 0.0])
        h2 = build_hull(np.vstack([pts, outside]))
        assert h2.volume > h1.volume

    def test_volume_monotone_in_vertex_subsets(self):
        rng = np.random.default_rng(17)
        pts = rng.normal(size=(40, 3))
        sub = build_hull(pts[:15]).volume
        full = build_hull(pts).volume
        assert sub <= full + 1e-12

    def test_deterministic_for_fixed_ordering(self):
        rng = np.random.default_rng(18)
        pts = rng.normal(size=(50, 4))
        h1 = build_hull(pts)
        h2 = build_hull(pts)
        assert np.array_equal(h1.vertices, h2.vertices)
        assert np.array_equal(h1.facet_normals, h2.facet_normals)
        assert h1.volume == h2.volume

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_hull_contains_cloud_property(self, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 5))
        pts = rng.normal(size=(int(rng.integers(d + 2, 30)), d))
        try:
            h = build_hull(pts)
        except RankDeficiencyError:
            return
        assert np.all(contains_many(h, pts, 1e-8 * h.scale()))
        total = sum(s.volume for s in h.triangulation())
        assert total == pytest.approx(h.volume, rel=1e-9)


class TestSimplexType:
    def test_volume_formula(self):
        pts = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
        assert simplex_volume(pts) == pytest.approx(2.0)

    def test_wrong_count_rejected(self):
        with pytest.raises(ValueError):
            simplex_volume(np.zeros((3, 3)))

    def test_immutable(self):
        s = Simplex(np.array([[0.0], [1.0]]))
        with pytest.raises(ValueError):
            s.points[0] = 5.0


class TestHullFile:
    def test_round_trip_identical(self, tmp_path):
        rng = np.random.default_rng(19)
        pts = rng.normal(size=(30, 3))
        h = build_hull(pts)
        p1 = tmp_path / "hull.json"
        save_hull(h, p1)
        h2 = load_hull(p1)
        p2 = tmp_path / "hull2.json"
        save_hull(h2, p2)
        assert p1.read_text() == p2.read_text()
        assert np.array_equal(h2.vertices, h.vertices)
        assert h2.volume == h.volume

    def test_schema_fields(self, tmp_path):
        h = build_hull(SQUARE)
        path = tmp_path / "hull.json"
        save_hull(h, path)
        doc = json.loads(path.read_text())
        assert set(doc) >= {"dim", "vertices", "facets", "volume"}
        assert doc["dim"] == 2
        assert all(set(f) == {"normal", "offset"} for f in doc["facets"])

    def test_load_without_incidence_rebuilds(self, tmp_path):
        h = build_hull(SQUARE)
        path = tmp_path / "hull.json"
        save_hull(h, path)
        doc = json.loads(path.read_text())
        del doc["facet_vertices"]
        path.write_text(json.dumps(doc))
        h2 = load_hull(path)
        assert h2.volume == pytest.approx(1.0, abs=1e-12)


def _in_simplex(simplex, p, tol):
    d = simplex.points.shape[1]
    mat = np.vstack([simplex.points.T, np.ones(d + 1)])
    vec = np.concatenate([p, [1.0]])
    try:
        lam = np.linalg.solve(mat, vec)
    except np.linalg.LinAlgError:
        return False
    return bool(np.all(lam >= -tol))
