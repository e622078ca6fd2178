"""Critical point enumeration against hand-worked configurations."""

import numpy as np
import pytest

from cechmorse.cech import euler_characteristic_full
from cechmorse.critical import (
    critical_counts,
    enumerate_critical_points,
    enumerate_critical_points_brute,
    load_critical_points,
    morse_euler,
    save_critical_points,
)
from cechmorse.errors import DegeneracyWarning, MetricRangeError
from cechmorse.sampling import Binomial, flat_torus, sample

TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
OBTUSE = np.array([[0.0, 0.0], [4.0, 0.0], [0.2, 0.6]])


def signature(points):
    return {(cp.k, cp.generators, round(cp.value, 9)) for cp in points}


class TestEquilateralTriangle:
    def test_all_three_levels(self):
        # edge midpoints at value 0.5, circumcenter at 0.5774
        assert critical_counts(TRIANGLE, r=0.6, max_index=2) == (3, 3, 1)
        assert critical_counts(TRIANGLE, r=0.55, max_index=2) == (3, 3, 0)
        assert critical_counts(TRIANGLE, r=0.45, max_index=2) == (3, 0, 0)

    def test_values_and_generators(self):
        pts = enumerate_critical_points(TRIANGLE, r=0.6, max_index=2)
        saddle_values = [cp.value for cp in pts if cp.k == 1]
        assert np.allclose(saddle_values, 0.5)
        top = [cp for cp in pts if cp.k == 2]
        assert len(top) == 1
        assert top[0].generators == (0, 1, 2)
        assert top[0].value == pytest.approx(1 / np.sqrt(3), abs=1e-9)
        assert np.allclose(top[0].center, [0.5, np.sqrt(3) / 6], atol=1e-9)

    def test_output_sorted_by_index_then_value(self):
        pts = enumerate_critical_points(TRIANGLE, r=0.6, max_index=2)
        keys = [(cp.k, cp.value) for cp in pts]
        assert keys == sorted(keys)


class TestObtuseTriangle:
    def test_no_index_two_point(self):
        # circumcenter falls outside the hull, and the long-edge midpoint
        # ball swallows the third vertex
        counts = critical_counts(OBTUSE, r=2.5, max_index=2)
        assert counts == (3, 2, 0)

    def test_morse_euler_matches_complex(self):
        assert morse_euler(OBTUSE, r=2.5) == euler_characteristic_full(OBTUSE, 2.5)


class TestPeriodicLine:
    def test_gap_midpoints(self):
        pts = np.array([[0.1], [0.35], [0.9]])
        cloud_like = type("C", (), {"points": pts, "period": 1.0})()
        cps = enumerate_critical_points(cloud_like, r=0.24, max_index=1)
        saddles = [cp for cp in cps if cp.k == 1]
        # gaps 0.25 and 0.2 close at values 0.125 and 0.1; gap 0.55 stays open
        assert sorted(round(cp.value, 6) for cp in saddles) == [0.1, 0.125]
        assert morse_euler(cloud_like, r=0.24, max_index=1) == 1

    def test_gap_census_matches_counts(self):
        cloud = sample(flat_torus(1), mode=Binomial(100), seed=9)
        r = 0.004
        x = np.sort(cloud.points[:, 0])
        gaps = np.diff(np.append(x, x[0] + 1.0))
        expected = int((gaps <= 2 * r).sum())
        assert critical_counts(cloud, r, max_index=1)[1] == expected

    def test_radius_bound(self):
        cloud = sample(flat_torus(2), mode=Binomial(30), seed=1)
        with pytest.raises(MetricRangeError):
            enumerate_critical_points(cloud, r=0.3)


class TestDegenerateConfigurations:
    def test_cocircular_shell_is_skipped(self):
        ang = np.deg2rad([0.0, 100.0, 200.0, 300.0])
        pts = np.column_stack([np.cos(ang), np.sin(ang)])
        with pytest.warns(DegeneracyWarning):
            cps = enumerate_critical_points(pts, r=1.05, max_index=2)
        # every acute triple's circumsphere carries the fourth point on
        # its boundary, so no index-2 point survives
        assert all(cp.k != 2 for cp in cps)

    def test_brute_agrees_on_degenerate_input(self):
        ang = np.deg2rad([0.0, 100.0, 200.0, 300.0])
        pts = np.column_stack([np.cos(ang), np.sin(ang)])
        with pytest.warns(DegeneracyWarning):
            fast = enumerate_critical_points(pts, r=1.05, max_index=2)
        with pytest.warns(DegeneracyWarning):
            brute = enumerate_critical_points_brute(pts, r=1.05, max_index=2)
        assert signature(fast) == signature(brute)


class TestAgainstBruteForce:
    @pytest.mark.parametrize("period", [None, 1.0])
    @pytest.mark.parametrize("seed", range(8))
    def test_expansion_equals_brute(self, period, seed):
        rng = np.random.default_rng(300 + seed)
        n = int(rng.integers(5, 11))
        pts = rng.uniform(0, 1, size=(n, 2))
        r = float(rng.uniform(0.08, 0.22))
        cloud_like = type("C", (), {"points": pts, "period": period})()
        fast = enumerate_critical_points(cloud_like, r, 2, method="expansion")
        brute = enumerate_critical_points_brute(cloud_like, r, 2)
        assert signature(fast) == signature(brute), (seed, period)

    @pytest.mark.parametrize("period", [None, 1.0])
    @pytest.mark.parametrize("seed", range(8))
    def test_delaunay_equals_brute(self, period, seed):
        rng = np.random.default_rng(400 + seed)
        n = int(rng.integers(8, 14))
        pts = rng.uniform(0, 1, size=(n, 2))
        r = float(rng.uniform(0.08, 0.22))
        cloud_like = type("C", (), {"points": pts, "period": period})()
        fast = enumerate_critical_points(cloud_like, r, 2, method="delaunay")
        brute = enumerate_critical_points_brute(cloud_like, r, 2)
        assert signature(fast) == signature(brute), (seed, period)

    def test_3d_torus_modes_agree(self):
        cloud = sample(flat_torus(3), mode=Binomial(40), seed=5)
        r = 0.2
        exp = enumerate_critical_points(cloud, r, 3, method="expansion")
        dly = enumerate_critical_points(cloud, r, 3, method="delaunay")
        brt = enumerate_critical_points_brute(cloud, r, 3)
        assert signature(exp) == signature(brt)
        assert signature(dly) == signature(brt)


class TestMorseEulerIdentity:
    @pytest.mark.parametrize("period", [None, 1.0])
    @pytest.mark.parametrize("seed", range(5))
    def test_alternating_sum_equals_complex_euler(self, period, seed):
        rng = np.random.default_rng(500 + seed)
        pts = rng.uniform(0, 1, size=(25, 2))
        r = 0.12
        cloud_like = type("C", (), {"points": pts, "period": period})()
        assert morse_euler(cloud_like, r) == euler_characteristic_full(cloud_like, r)


class TestSerialization:
    def test_jsonl_round_trip(self, tmp_path):
        cps = enumerate_critical_points(TRIANGLE, r=0.6, max_index=2)
        path = tmp_path / "crit.jsonl"
        save_critical_points(cps, path)
        back = load_critical_points(path)
        assert signature(back) == signature(cps)
        assert [cp.k for cp in back] == [cp.k for cp in cps]
