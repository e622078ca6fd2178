"""Limiting constants for expected critical point counts.

For a Poisson sample of intensity n on the unit-volume flat m-torus and
a radius rule with occupancy lambda = n r^m, the expected number of
index-k critical points with value at most r satisfies
E[N_k] / n = gamma_k(lambda) exactly, with

    gamma_k(lambda) = (lambda^k / (k+1)!) *
        integral over (R^m)^k of h_1(0, y) exp(-lambda w_m R(0, y)^m) dy,

where h_1 is the indicator that the circumcenter of (0, y) lies in the
open convex hull with circumradius R at most 1, and w_m is the unit
ball volume.  In three dimensions the integrals evaluate in closed form
to scaled regularized incomplete gamma functions (implemented here);
for the general case and for the sparse-regime densities

    mu_k^c = 1/(k+1)! * integral of h^c(0, y) dy            (critical)
    mu_k^b = 1/(k+2)! * integral of h^b(0, y) dy            (cycles)

the integrals are estimated by Monte Carlo over their bounded supports.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy import special

from .errors import UnsupportedError
from .geometry import TOL_GEOM, circumsphere_batch, miniball_batch

_A3 = 4.0 * np.pi / 3.0  # decay rate in the occupancy variable for m = 3

# saturation levels gamma_k(infinity) for m = 3
_GAMMA3_LIMIT = {
    1: 4.0,
    2: 3.0 * (1.0 + np.pi**2 / 16.0),
    3: 3.0 * np.pi**2 / 16.0,
}


def ball_volume(m: int) -> float:
    """Volume of the unit ball in R^m."""
    if m < 1:
        raise ValueError("dimension must be positive")
    return float(np.pi ** (m / 2.0) / special.gamma(m / 2.0 + 1.0))


@dataclass(frozen=True)
class LimitConstants:
    """A limit constant with its estimation metadata."""

    m: int
    k: int
    lam: float | None
    value: float
    stderr: float
    method: str
    n_mc: int
    seed: int | None

    def csv_row(self) -> list:
        lam = "" if self.lam is None else self.lam
        seed = "" if self.seed is None else self.seed
        return [self.m, self.k, lam, self.value, self.stderr, self.method, self.n_mc, seed]


CSV_HEADER = ["m", "k", "lambda", "value", "stderr", "method", "n_mc", "seed"]


def constants_to_csv(rows: list[LimitConstants], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.csv_row())


def gamma_closed_form_m3(k: int, lam: float) -> float:
    """gamma_k(lambda) for the uniform three-dimensional case.

    Equals the saturation level times the regularized lower incomplete
    gamma function P(k, (4 pi / 3) lambda); accepts lambda = inf.
    """
    if k not in (1, 2, 3):
        raise ValueError("closed forms cover k in {1, 2, 3}")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if np.isinf(lam):
        return _GAMMA3_LIMIT[k]
    return float(_GAMMA3_LIMIT[k] * special.gammainc(k, _A3 * lam))


def gamma_rate_m3(k: int, lam: float) -> float:
    """Derivative of gamma_k with respect to the occupancy lambda (m = 3)."""
    if k not in (1, 2, 3):
        raise ValueError("closed forms cover k in {1, 2, 3}")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    coeff = _GAMMA3_LIMIT[k] * _A3**k / factorial(k - 1)
    return float(coeff * lam ** (k - 1) * np.exp(-_A3 * lam))


def euler_limit_curve_m3(lambdas) -> list[dict]:
    """Limiting Euler characteristic per point, 1 - g_1 + g_2 - g_3.

    Starts at 1 (isolated points) and decays to 0 (fully built complex);
    the sign changes in between track the dominant critical index.
    """
    out = []
    for lam in np.asarray(lambdas, dtype=np.float64):
        chi = 1.0 - sum(
            (-1) ** (k + 1) * gamma_closed_form_m3(k, lam) for k in (1, 2, 3)
        )
        out.append({"lambda": float(lam), "chi_per_point": float(chi)})
    return out


def _sample_ball(rng: np.random.Generator, count: int, m: int, radius: float) -> np.ndarray:
    g = rng.standard_normal((count, m))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    u = rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / m)
    return radius * u * g


def _mc_mean(values_fn, n_mc: int, seed: int, batch: int = 65536):
    """Streaming Monte Carlo mean and standard error."""
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_mc:
        b = min(batch, n_mc - done)
        vals = values_fn(rng, b)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += b
    mean = total / n_mc
    var = max(total_sq / n_mc - mean * mean, 0.0)
    return mean, float(np.sqrt(var / n_mc))


def _critical_indicator(configs: np.ndarray, tol_geom: float = TOL_GEOM):
    """CP1 indicator and circumradius for stacked (0, y) configurations."""
    _, r2, bary, good = circumsphere_batch(configs, tol_geom)
    cp1 = good & (bary > tol_geom).all(axis=1)
    return cp1, np.sqrt(np.where(r2 > 0, r2, 0.0))


def mu_c_estimate(m: int, k: int, n_mc: int = 200_000, seed: int = 0) -> LimitConstants:
    """Monte Carlo estimate of the critical point density constant mu_k^c.

    The integrand support is bounded: a configuration with circumradius
    at most 1 has every point within distance 2 of the first, so the
    integral runs over the ball of radius 2 around the origin.
    """
    if m < 1:
        raise UnsupportedError("dimension must be at least 1")
    if not 1 <= k <= m:
        raise ValueError("need 1 <= k <= m for affinely independent generators")
    vol = ball_volume(m) * 2.0**m  # sampling ball radius 2

    def draw(rng, count):
        configs = np.zeros((count, k + 1, m))
        configs[:, 1:, :] = _sample_ball(rng, count * k, m, 2.0).reshape(count, k, m)
        cp1, radius = _critical_indicator(configs)
        return (cp1 & (radius <= 1.0)).astype(np.float64)

    mean, se = _mc_mean(draw, n_mc, seed)
    scale = vol**k / factorial(k + 1)
    return LimitConstants(
        m=m, k=k, lam=None, value=mean * scale, stderr=se * scale,
        method="monte_carlo", n_mc=n_mc, seed=seed,
    )


def cycle_indicator(configs: np.ndarray, tol_geom: float = TOL_GEOM) -> np.ndarray:
    """Indicator that (k+2)-point configurations span a hollow k-cycle at
    radius 1: every facet's enclosing ball fits inside radius 1 while the
    whole set's does not."""
    count, s, m = configs.shape
    _, r2_all = miniball_batch(configs, tol_geom)
    ok = r2_all > 1.0
    for drop in range(s):
        cols = [j for j in range(s) if j != drop]
        _, r2 = miniball_batch(configs[:, cols, :], tol_geom)
        ok &= r2 <= 1.0
    return ok


def mu_b_estimate(m: int, k: int, n_mc: int = 200_000, seed: int = 0) -> LimitConstants:
    """Monte Carlo estimate of the k-cycle density constant mu_k^b.

    Needs k + 2 points; every pair shares a qualifying facet, so all
    points again lie within distance 2 of the first and the sampling
    ball of radius 2 captures the full support.
    """
    if m < 2:
        raise UnsupportedError("cycles need ambient dimension at least 2")
    if not 1 <= k <= m - 1:
        raise ValueError("need 1 <= k <= m - 1 for nontrivial cycles")
    vol = ball_volume(m) * 2.0**m

    def draw(rng, count):
        configs = np.zeros((count, k + 2, m))
        configs[:, 1:, :] = _sample_ball(rng, count * (k + 1), m, 2.0).reshape(
            count, k + 1, m
        )
        return cycle_indicator(configs).astype(np.float64)

    mean, se = _mc_mean(draw, n_mc, seed)
    scale = vol ** (k + 1) / factorial(k + 2)
    return LimitConstants(
        m=m, k=k, lam=None, value=mean * scale, stderr=se * scale,
        method="monte_carlo", n_mc=n_mc, seed=seed,
    )


def gamma_numeric(
    m: int, k: int, lam: float, n_mc: int = 200_000, seed: int = 0
) -> LimitConstants:
    """Monte Carlo estimate of gamma_k(lambda) for m in {1, 2, 3}.

    At finite lambda the support is the radius-2 ball (the value bound
    caps the circumradius at 1).  At lambda = inf the value bound drops
    and the void-probability factor exp(-w_m R^m) takes over; sampling
    then uses a radius-3 ball, whose truncation error exp(-w_m 1.5^m)
    is far below the Monte Carlo resolution.
    """
    if not 1 <= k <= m:
        raise ValueError("need 1 <= k <= m")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    w_m = ball_volume(m)
    infinite = np.isinf(lam)
    radius = 3.0 if infinite else 2.0
    vol = ball_volume(m) * radius**m

    def draw(rng, count):
        configs = np.zeros((count, k + 1, m))
        configs[:, 1:, :] = _sample_ball(rng, count * k, m, radius).reshape(count, k, m)
        cp1, r_c = _critical_indicator(configs)
        if infinite:
            return np.where(cp1, np.exp(-w_m * r_c**m), 0.0)
        keep = cp1 & (r_c <= 1.0)
        return np.where(keep, np.exp(-lam * w_m * r_c**m), 0.0)

    mean, se = _mc_mean(draw, n_mc, seed)
    scale = vol**k / factorial(k + 1)
    if not infinite:
        scale *= lam**k
    return LimitConstants(
        m=m, k=k, lam=float(lam), value=mean * scale, stderr=se * scale,
        method="monte_carlo", n_mc=n_mc, seed=seed,
    )
