"""Cech complex construction against enumerable configurations."""

import numpy as np
import pytest

from cechmorse.cech import (
    SimplicialComplex,
    build_cech,
    build_cech_brute,
    euler_characteristic_full,
    face_counts,
)
from cechmorse import _kernels
from cechmorse.errors import MetricRangeError
from cechmorse.geometry import min_enclosing_ball
from cechmorse.homology import euler_characteristic
from cechmorse.sampling import Binomial, flat_torus, sample

# side-1 equilateral triangle: circumradius 1/sqrt(3) = 0.5774
TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])


def simplex_set(cx, k):
    return {tuple(row) for row in cx.simplices.get(k, np.empty((0, k + 1)))}


class TestSmallConfigurations:
    def test_hollow_triangle(self):
        # 0.5 < eps < 0.5774: all edges, no filled triangle
        cx = build_cech(TRIANGLE, eps=0.55)
        assert face_counts(cx) == (3, 3, 0)

    def test_filled_triangle(self):
        cx = build_cech(TRIANGLE, eps=0.6)
        assert face_counts(cx) == (3, 3, 1)

    def test_no_edges_below_half_gap(self):
        cx = build_cech(TRIANGLE, eps=0.49)
        assert face_counts(cx) == (3, 0, 0)

    def test_tetrahedron_shell_then_solid(self):
        # triangles fill at 1/sqrt(3) = 0.5774, the solid at sqrt(3/8) = 0.6124
        tet = np.array(
            [
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.5, np.sqrt(3) / 2, 0.0],
                [0.5, np.sqrt(3) / 6, np.sqrt(2.0 / 3.0)],
            ]
        )
        shell = build_cech(tet, eps=0.60)
        assert face_counts(shell) == (4, 6, 4, 0)
        solid = build_cech(tet, eps=0.62)
        assert face_counts(solid) == (4, 6, 4, 1)

    def test_cycle_of_points_on_circle(self):
        # twelve evenly spaced points, adjacent chord 0.5176, skip chord 1.0
        ang = 2 * np.pi * np.arange(12) / 12
        pts = np.column_stack([np.cos(ang), np.sin(ang)])
        cx = build_cech(pts, eps=0.27)
        assert face_counts(cx)[:2] == (12, 12)
        assert all(c == 0 for c in face_counts(cx)[2:])


class TestPeriodicMetric:
    def test_seam_edge(self):
        pts = np.array([[0.05, 0.5], [0.95, 0.5]])
        cloud_like = type("C", (), {"points": pts, "period": 1.0})()
        cx = build_cech(cloud_like, eps=0.06, max_dim=1)
        assert face_counts(cx) == (2, 1)
        assert build_cech(pts, eps=0.06, max_dim=1).face_count(1) == 0

    def test_radius_bound_enforced(self):
        cloud_like = type("C", (), {"points": np.zeros((3, 2)), "period": 1.0})()
        with pytest.raises(MetricRangeError):
            build_cech(cloud_like, eps=0.25)

    def test_wraparound_triple_not_filled(self):
        # balls around 0, 0.35, 0.7 on the unit circle line pairwise
        # intersect but share no common point
        pts = np.array([[0.0], [0.35], [0.7]])
        cloud_like = type("C", (), {"points": pts, "period": 1.0})()
        cx = build_cech(cloud_like, eps=0.2, max_dim=2)
        assert face_counts(cx) == (3, 3, 0)

    def test_grid_cloud_face_counts(self):
        # 8x8 lattice, pitch 0.125; at eps = 0.09 each lattice square
        # contributes 4 triangles and one 3-simplex (circumradius 0.0884)
        h = 1.0 / 8.0
        ax = np.arange(8) * h
        gx, gy = np.meshgrid(ax, ax, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        cloud_like = type("C", (), {"points": pts, "period": 1.0})()
        cx = build_cech(cloud_like, eps=0.09, max_dim=3)
        assert face_counts(cx) == (64, 256, 256, 64)


class TestAgainstBruteForce:
    @pytest.mark.parametrize("period", [None, 1.0])
    @pytest.mark.parametrize("seed", range(6))
    def test_random_clouds(self, period, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 11))
        pts = rng.uniform(0, 1, size=(n, 2))
        eps = float(rng.uniform(0.08, 0.22))
        cloud_like = type("C", (), {"points": pts, "period": period})()
        fast = build_cech(cloud_like, eps, max_dim=n - 1)
        brute = build_cech_brute(pts, eps, period=period)
        for k in range(n):
            assert simplex_set(fast, k) == simplex_set(brute, k), (seed, k)

    def test_monotone_in_eps(self):
        rng = np.random.default_rng(101)
        pts = rng.uniform(0, 1, size=(14, 2))
        small = build_cech(pts, eps=0.12, max_dim=4)
        large = build_cech(pts, eps=0.2, max_dim=4)
        for k in range(5):
            assert simplex_set(small, k) <= simplex_set(large, k)


class TestFullEulerCharacteristic:
    @pytest.mark.parametrize("period", [None, 1.0])
    @pytest.mark.parametrize("seed", range(4))
    def test_matches_full_build(self, period, seed):
        rng = np.random.default_rng(200 + seed)
        pts = rng.uniform(0, 1, size=(18, 2))
        eps = 0.13
        cloud_like = type("C", (), {"points": pts, "period": period})()
        cx = build_cech(cloud_like, eps, max_dim=17)
        assert euler_characteristic_full(cloud_like, eps) == euler_characteristic(cx)

    def test_isolated_points(self):
        pts = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]])
        assert euler_characteristic_full(pts, eps=0.1) == 3


class TestDefaultsAndSerialization:
    def test_default_max_dim_from_manifold(self):
        cloud = sample(flat_torus(2), mode=Binomial(30), seed=1)
        cx = build_cech(cloud, eps=0.1)
        assert cx.max_dim == 3

    def test_jsonl_round_trip(self, tmp_path):
        cx = build_cech(TRIANGLE, eps=0.6)
        path = tmp_path / "complex.jsonl"
        cx.save(path)
        back = SimplicialComplex.load(path)
        assert back.n_vertices == cx.n_vertices
        assert back.eps == cx.eps
        assert face_counts(back) == face_counts(cx)
        assert simplex_set(back, 2) == simplex_set(cx, 2)

    def test_jsonl_sorted_by_dim_then_lex(self, tmp_path):
        import json

        rng = np.random.default_rng(3)
        cx = build_cech(rng.uniform(0, 1, (12, 2)), eps=0.2, max_dim=3)
        path = tmp_path / "cx.jsonl"
        cx.save(path)
        with open(path) as fh:
            fh.readline()  # metadata
            keys = [(r["dim"], tuple(r["vertices"])) for r in map(json.loads, fh)]
        assert keys == sorted(keys)


class TestSmallMiniballKernel:
    """The closed-form 2..4 point enclosing-ball kernel used in candidate
    filtering must agree with the scalar reference."""

    @pytest.mark.parametrize("s", [2, 3, 4])
    @pytest.mark.parametrize("d", [2, 3, 5])
    def test_matches_welzl_on_random_rows(self, s, d):
        rng = np.random.default_rng(10 * s + d)
        cfg = rng.standard_normal((300, s, d))
        r2 = _kernels.miniball_r2_small(cfg)
        assert (r2 >= 0).all()
        for row in range(0, 300, 7):
            _, r_ref = min_enclosing_ball(cfg[row])
            assert r2[row] == pytest.approx(r_ref**2, rel=1e-8)

    def test_degenerate_rows(self):
        collinear = np.array([[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]])
        assert _kernels.miniball_r2_small(collinear)[0] == pytest.approx(2.25)
        coincident = np.zeros((1, 4, 3))
        assert _kernels.miniball_r2_small(coincident)[0] == pytest.approx(0.0)
        cocircular = np.array(
            [[[1.0, 0.0, 5.0], [-1.0, 0.0, 5.0], [0.0, 1.0, 5.0], [0.0, -1.0, 5.0]]]
        )
        assert _kernels.miniball_r2_small(cocircular)[0] == pytest.approx(1.0)
