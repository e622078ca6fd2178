"""Sampling distribution checks and serialization round trips."""

import numpy as np
import pytest
from scipy import stats

from cechmorse.errors import RejectionStallError
from cechmorse.geometry import distance_to_set
from cechmorse.sampling import (
    Binomial,
    DensitySpec,
    PointCloud,
    Poisson,
    circle,
    coverage_net,
    derive_seed,
    embedded_torus,
    flat_torus,
    sample,
    sphere2,
)

ALL_SPECS = [flat_torus(2), flat_torus(3), circle(), sphere2(), embedded_torus(2.0, 1.0)]


class TestBasicSampling:
    @pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.kind + str(s.m))
    def test_shape_and_constraint(self, spec):
        cloud = sample(spec, mode=Binomial(200), seed=1)
        assert cloud.points.shape == (200, spec.ambient_dim)
        assert cloud.spec.constraint_residual(cloud.points).max() <= 1e-9

    def test_deterministic_in_seed(self):
        a = sample(sphere2(), mode=Binomial(50), seed=42)
        b = sample(sphere2(), mode=Binomial(50), seed=42)
        c = sample(sphere2(), mode=Binomial(50), seed=43)
        assert np.array_equal(a.points, b.points)
        assert not np.array_equal(a.points, c.points)

    def test_poisson_mode_count_distribution(self):
        sizes = [sample(flat_torus(2), mode=Poisson(100), seed=s).size for s in range(200)]
        sizes = np.array(sizes)
        assert sizes.std() > 0  # genuinely random count
        # mean 100, sd 10: the average of 200 draws is within 5 of 100 whp
        assert abs(sizes.mean() - 100.0) < 5.0

    def test_empty_cloud(self):
        cloud = sample(flat_torus(2), mode=Binomial(0), seed=0)
        assert cloud.size == 0


class TestUniformity:
    def test_flat_torus_chi_square_battery(self):
        # 4x4 occupancy grid, 100 seeds at significance 0.01
        failures = 0
        for s in range(100):
            cloud = sample(flat_torus(2), mode=Binomial(800), seed=s)
            cells = np.floor(cloud.points * 4).astype(int)
            idx = cells[:, 0] * 4 + cells[:, 1]
            counts = np.bincount(idx, minlength=16)
            if stats.chisquare(counts).pvalue < 0.01:
                failures += 1
        assert failures <= 3

    def test_circle_angle_uniform(self):
        cloud = sample(circle(), mode=Binomial(4000), seed=3)
        ang = np.arctan2(cloud.points[:, 1], cloud.points[:, 0])
        counts = np.histogram(ang, bins=8, range=(-np.pi, np.pi))[0]
        assert stats.chisquare(counts).pvalue > 0.001

    def test_sphere_z_uniform(self):
        # z-coordinate of the uniform sphere measure is uniform on [-R, R]
        cloud = sample(sphere2(), mode=Binomial(6000), seed=5)
        counts = np.histogram(cloud.points[:, 2], bins=10, range=(-1, 1))[0]
        assert stats.chisquare(counts).pvalue > 0.001

    def test_embedded_torus_angle_bias(self):
        # uniform area measure weights theta by the ring radius:
        # E[cos theta] = minor / (2 major) = 1/4 for the (2, 1) torus
        spec = embedded_torus(2.0, 1.0)
        cloud = sample(spec, mode=Binomial(20000), seed=7)
        ring = np.hypot(cloud.points[:, 0], cloud.points[:, 1]) - spec.major
        cos_t = ring / spec.minor
        assert abs(cos_t.mean() - 0.25) < 0.02


class TestCustomDensity:
    def test_tilted_density_shifts_mean(self):
        spec = flat_torus(2)
        dens = DensitySpec.custom(
            "tilted", lambda x: (1.0 + x[:, 0]) / 1.5, f_max=4.0 / 3.0, f_min=2.0 / 3.0
        )
        cloud = sample(spec, dens, mode=Binomial(20000), seed=11)
        # E[x0] under (1 + x)/1.5 on [0,1] is 5/9
        assert abs(cloud.points[:, 0].mean() - 5.0 / 9.0) < 0.01

    def test_declared_bound_enforced(self):
        spec = flat_torus(1)
        dens = DensitySpec.custom("bad", lambda x: np.full(len(x), 2.0), f_max=1.0, f_min=1.0)
        with pytest.raises(ValueError):
            sample(spec, dens, mode=Binomial(100), seed=0)

    def test_stall_detection(self):
        spec = flat_torus(1)
        dens = DensitySpec.custom(
            "needle", lambda x: np.full(len(x), 1e-6), f_max=1.0, f_min=0.0
        )
        with pytest.raises(RejectionStallError):
            sample(spec, dens, mode=Binomial(50), seed=0)


class TestCoverageNet:
    @pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.kind + str(s.m))
    @pytest.mark.parametrize("eps", [0.3, 0.1])
    def test_net_covers_manifold(self, spec, eps):
        net = coverage_net(spec, eps)
        probe = sample(spec, mode=Binomial(2000), seed=13)
        worst = max(
            distance_to_set(x, net, period=spec.period) for x in probe.points
        )
        assert worst <= eps

    def test_net_scales_with_eps(self):
        big = coverage_net(sphere2(), 0.05)
        small = coverage_net(sphere2(), 0.2)
        assert len(big) > len(small)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        cloud = sample(embedded_torus(2.0, 1.0), mode=Poisson(80), seed=17)
        path = tmp_path / "cloud.json"
        cloud.save(path)
        back = PointCloud.load(path)
        assert np.allclose(back.points, cloud.points)
        assert back.spec == cloud.spec
        assert back.seed == cloud.seed
        assert back.mode == "poisson"
        assert back.n_param == 80

    def test_derive_seed_stable_and_distinct(self):
        assert derive_seed(5, 1, 2) == derive_seed(5, 1, 2)
        seen = {derive_seed(5, i, j) for i in range(20) for j in range(20)}
        assert len(seen) == 400
