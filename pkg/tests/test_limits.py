"""Closed forms and Monte Carlo estimators for the limit constants.

Oracle values are derived by hand from the defining integrals:

* gamma_1 for m = 3: E[pairs with empty diametral ball and separation
  at most 2r] per point is 4(1 - exp(-(4 pi / 3) lambda)), obtained by
  integrating the void probability over the separation vector.  At
  lambda = 1 this is 3.939341520541814.
* the saturation levels are 4, 3(1 + pi^2/16), and 3 pi^2/16.
* all three closed forms share the structure
  gamma_k(lambda) = gamma_k(inf) * P(k, (4 pi / 3) lambda) with P the
  regularized lower incomplete gamma function, so the rates are
  gamma_k(inf) * a^k / (k-1)! * lambda^(k-1) exp(-a lambda).
* mu_1^c in m dimensions is half the volume of the radius-2 ball: the
  indicator is identically 1 on the support (2 pi for m = 2).
* mu_k^c equals the lambda -> 0 limit of gamma_k(lambda) / lambda^k,
  giving (8 pi^2 / 3)(1 + pi^2/16) for (m, k) = (3, 2) and
  2 pi^5 / 27 for (3, 3).
* for m = 1 the same void-probability integral gives
  gamma_1(lambda) = 1 - exp(-2 lambda); for m = 2 it gives
  2(1 - exp(-pi lambda)).
"""

import csv

import numpy as np
import pytest

from cechmorse.errors import UnsupportedError
from cechmorse.homology import is_nontrivial_k_cycle
from cechmorse.limits import (
    CSV_HEADER,
    LimitConstants,
    ball_volume,
    constants_to_csv,
    cycle_indicator,
    euler_limit_curve_m3,
    gamma_closed_form_m3,
    gamma_numeric,
    gamma_rate_m3,
    mu_b_estimate,
    mu_c_estimate,
)

GAMMA_INF = {1: 4.0, 2: 3.0 + 3.0 * np.pi**2 / 16.0, 3: 3.0 * np.pi**2 / 16.0}


class TestBallVolume:
    def test_known_dimensions(self):
        assert ball_volume(1) == pytest.approx(2.0)
        assert ball_volume(2) == pytest.approx(np.pi)
        assert ball_volume(3) == pytest.approx(4.0 * np.pi / 3.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            ball_volume(0)


class TestClosedForms:
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_zero_occupancy_is_zero(self, k):
        assert gamma_closed_form_m3(k, 0.0) == 0.0

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_saturation_levels(self, k):
        assert gamma_closed_form_m3(k, np.inf) == pytest.approx(GAMMA_INF[k])
        # effectively saturated well before lambda = 10
        assert gamma_closed_form_m3(k, 10.0) == pytest.approx(GAMMA_INF[k], rel=1e-9)

    def test_gamma1_at_unit_occupancy(self):
        assert gamma_closed_form_m3(1, 1.0) == pytest.approx(3.939341520541814)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_monotone_and_bounded(self, k):
        grid = np.linspace(0.0, 8.0, 400)
        vals = np.array([gamma_closed_form_m3(k, lam) for lam in grid])
        assert (np.diff(vals) >= -1e-12).all()
        assert (vals <= GAMMA_INF[k] + 1e-12).all()

    def test_rejects_bad_k_and_lambda(self):
        with pytest.raises(ValueError):
            gamma_closed_form_m3(4, 1.0)
        with pytest.raises(ValueError):
            gamma_closed_form_m3(1, -0.5)


class TestRates:
    def test_initial_rates(self):
        assert gamma_rate_m3(1, 0.0) == pytest.approx(16.0 * np.pi / 3.0)
        assert gamma_rate_m3(2, 0.0) == 0.0
        assert gamma_rate_m3(3, 0.0) == 0.0

    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("lam", [0.1, 0.7, 2.3])
    def test_matches_finite_differences(self, k, lam):
        h = 1e-6
        fd = (gamma_closed_form_m3(k, lam + h) - gamma_closed_form_m3(k, lam - h)) / (
            2.0 * h
        )
        assert gamma_rate_m3(k, lam) == pytest.approx(fd, rel=1e-6)


class TestEulerCurve:
    def test_endpoints(self):
        curve = euler_limit_curve_m3([0.0, 5.0])
        assert curve[0]["chi_per_point"] == pytest.approx(1.0)
        # saturation: the alternating sum of the limits vanishes exactly
        assert abs(curve[1]["chi_per_point"]) < 1e-6

    def test_consistent_with_closed_forms(self):
        lam = 1.3
        (rec,) = euler_limit_curve_m3([lam])
        expected = 1.0 - sum(
            (-1) ** (k + 1) * gamma_closed_form_m3(k, lam) for k in (1, 2, 3)
        )
        assert rec["chi_per_point"] == pytest.approx(expected)
        assert rec["lambda"] == lam


class TestMuCritical:
    def test_m1_k1_exact(self):
        # indicator is 1 on the whole support: zero-variance estimate of 2
        est = mu_c_estimate(1, 1, n_mc=20_000, seed=0)
        assert est.value == pytest.approx(2.0, rel=1e-12)
        assert est.stderr == pytest.approx(0.0, abs=1e-12)

    def test_m2_k1_exact(self):
        est = mu_c_estimate(2, 1, n_mc=20_000, seed=0)
        assert est.value == pytest.approx(2.0 * np.pi, rel=1e-12)

    def test_m3_k2_matches_derived_constant(self):
        target = (8.0 * np.pi**2 / 3.0) * (1.0 + np.pi**2 / 16.0)
        est = mu_c_estimate(3, 2, n_mc=200_000, seed=0)
        assert est.stderr > 0
        assert abs(est.value - target) < 4.0 * est.stderr

    def test_m3_k3_matches_derived_constant(self):
        target = 2.0 * np.pi**5 / 27.0
        est = mu_c_estimate(3, 3, n_mc=200_000, seed=0)
        assert abs(est.value - target) < 4.0 * est.stderr

    def test_seed_stability(self):
        a = mu_c_estimate(3, 2, n_mc=100_000, seed=1)
        b = mu_c_estimate(3, 2, n_mc=100_000, seed=2)
        assert abs(a.value - b.value) < 3.0 * np.hypot(a.stderr, b.stderr)

    def test_deterministic_per_seed(self):
        a = mu_c_estimate(3, 2, n_mc=50_000, seed=7)
        b = mu_c_estimate(3, 2, n_mc=50_000, seed=7)
        assert a == b

    def test_rejects_bad_index(self):
        with pytest.raises(ValueError):
            mu_c_estimate(2, 3)
        with pytest.raises(ValueError):
            mu_c_estimate(2, 0)


class TestMuCycle:
    def test_m1_unsupported(self):
        with pytest.raises(UnsupportedError):
            mu_b_estimate(1, 1)

    def test_rejects_k_at_manifold_dim(self):
        with pytest.raises(ValueError):
            mu_b_estimate(2, 2)

    def test_m2_k1_positive_and_seed_stable(self):
        a = mu_b_estimate(2, 1, n_mc=150_000, seed=3)
        b = mu_b_estimate(2, 1, n_mc=150_000, seed=4)
        assert a.value > 0
        assert np.isfinite(a.value)
        assert abs(a.value - b.value) < 3.0 * np.hypot(a.stderr, b.stderr)

    def test_indicator_zero_outside_support(self):
        # any point farther than 2(k+2) from the first kills every facet
        rng = np.random.default_rng(0)
        cfg = rng.uniform(-1, 1, size=(64, 3, 2))
        cfg[:, 0, :] = 0.0
        cfg[:, 1, 0] += 7.0  # beyond 2(k+2) = 6 for k = 1
        assert not cycle_indicator(cfg).any()

    @pytest.mark.parametrize("scale", [0.6, 1.1, 2.5])
    def test_indicator_matches_brute_homology(self, scale):
        rng = np.random.default_rng(int(scale * 10))
        cfg = scale * rng.standard_normal((40, 3, 2))
        cfg[:, 0, :] = 0.0
        flags = cycle_indicator(cfg)
        for i in range(40):
            assert flags[i] == is_nontrivial_k_cycle(cfg[i], eps=1.0, k=1)


class TestGammaNumeric:
    def test_zero_lambda_is_zero(self):
        est = gamma_numeric(3, 1, 0.0, n_mc=1000, seed=0)
        assert est.value == 0.0

    def test_m3_k1_matches_closed_form(self):
        est = gamma_numeric(3, 1, 1.0, n_mc=200_000, seed=0)
        assert abs(est.value - 3.939341520541814) < 3.0 * est.stderr
        assert est.stderr < 0.05

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_m3_saturation(self, k):
        est = gamma_numeric(3, k, np.inf, n_mc=200_000, seed=k)
        assert abs(est.value - GAMMA_INF[k]) < 4.0 * est.stderr

    def test_m1_closed_form(self):
        # 1 - exp(-2 lambda) from the one-dimensional void integral
        est = gamma_numeric(1, 1, 1.0, n_mc=100_000, seed=0)
        assert abs(est.value - (1.0 - np.exp(-2.0))) < 4.0 * est.stderr

    def test_m2_closed_form(self):
        # 2(1 - exp(-pi lambda)) from the two-dimensional void integral
        est = gamma_numeric(2, 1, 1.0, n_mc=100_000, seed=0)
        assert abs(est.value - 2.0 * (1.0 - np.exp(-np.pi))) < 4.0 * est.stderr

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            gamma_numeric(2, 3, 1.0)
        with pytest.raises(ValueError):
            gamma_numeric(3, 1, -1.0)


class TestCsv:
    def test_round_trip(self, tmp_path):
        rows = [
            LimitConstants(3, 1, 1.0, 3.94, 0.01, "monte_carlo", 1000, 5),
            LimitConstants(2, 1, None, 6.28, 0.0, "monte_carlo", 1000, None),
        ]
        path = tmp_path / "constants.csv"
        constants_to_csv(rows, path)
        with open(path) as fh:
            got = list(csv.reader(fh))
        assert got[0] == CSV_HEADER
        assert got[1][:4] == ["3", "1", "1.0", "3.94"]
        assert got[2][2] == ""  # no lambda for mu constants
