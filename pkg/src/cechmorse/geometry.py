"""Geometric primitives in ambient Euclidean space.

Everything downstream (complex construction, critical point tests,
Monte Carlo integrands) reduces to a handful of predicates defined
here: circumspheres of affinely independent point sets, barycentric
membership in open convex hulls, minimum enclosing balls, and distances
to finite sets under an optional periodic metric.

Scalar functions validate their input and raise on degeneracies.  The
``*_batch`` variants trade checks for speed: they operate on stacked
configurations, return validity masks instead of raising, and are the
workhorses of the candidate-filtering pipelines.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DegenerateError

TOL_GEOM = 1e-9


@dataclass(frozen=True)
class Circumsphere:
    """Sphere through a set of affinely independent points.

    ``defining_subset`` holds the indices (into the input array) of the
    points the sphere actually passes through.
    """

    center: np.ndarray
    radius: float
    defining_subset: tuple[int, ...]


def _as_points(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError(f"expected a 2-d array of points, got shape {pts.shape}")
    return pts


def circumsphere(points: np.ndarray, tol_geom: float = TOL_GEOM) -> Circumsphere:
    """Unique sphere through k+1 affinely independent points in R^d, k <= d.

    The center satisfies ``|c - p_i| = |c - p_0|`` for all i, i.e. the
    linear system ``2 A c' = diag(A A^T)`` with ``A_i = p_i - p_0`` and
    ``c = p_0 + c'`` restricted to the affine hull of the input.

    Raises
    ------
    DegenerateError
        If the points are affinely dependent or the system conditioning
        exceeds ``1 / tol_geom``.
    """
    pts = _as_points(points)
    k = pts.shape[0] - 1
    if k < 1:
        raise ValueError("need at least 2 points")
    if k > pts.shape[1]:
        raise DegenerateError(
            f"{k + 1} points in R^{pts.shape[1]} are affinely dependent"
        )
    a = pts[1:] - pts[0]
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s[0] <= 0.0 or s[-1] <= tol_geom * s[0]:
        raise DegenerateError("affinely dependent or ill-conditioned configuration")
    b = 0.5 * np.einsum("ij,ij->i", a, a)
    # solve A A^T w = b through the SVD, center = p_0 + w A
    w = u @ ((u.T @ b) / (s * s))
    center = pts[0] + w @ a
    radius = float(np.linalg.norm(center - pts[0]))
    return Circumsphere(center=center, radius=radius, defining_subset=tuple(range(k + 1)))


def barycentric_coordinates(
    center: np.ndarray, points: np.ndarray, tol_geom: float = TOL_GEOM
) -> np.ndarray:
    """Affine coordinates of ``center`` with respect to ``points``.

    ``center`` must lie in the affine hull of the points; coordinates
    sum to one by construction.
    """
    pts = _as_points(points)
    c = np.asarray(center, dtype=np.float64)
    a = pts[1:] - pts[0]
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    w, _, rank, sv = np.linalg.lstsq(a.T, c - pts[0], rcond=None)
    if rank < a.shape[0]:
        raise DegenerateError("affinely dependent points")
    residual = np.linalg.norm(a.T @ w - (c - pts[0]))
    if residual > 1e3 * tol_geom * scale:
        raise DegenerateError("center is not in the affine hull of the points")
    return np.concatenate(([1.0 - w.sum()], w))


def in_open_convex_hull(
    center: np.ndarray, points: np.ndarray, tol_geom: float = TOL_GEOM
) -> bool:
    """True iff ``center`` lies strictly inside conv(points).

    Strictness uses a tolerance margin: every barycentric coordinate
    must exceed ``tol_geom``.
    """
    bary = barycentric_coordinates(center, points, tol_geom)
    return bool(np.all(bary > tol_geom))


def _boundary_ball(
    pts: np.ndarray, boundary: list[int], tol_geom: float
) -> tuple[np.ndarray | None, float]:
    """Smallest sphere through the boundary points, center in their affine hull."""
    nb = len(boundary)
    if nb == 0:
        return None, -1.0
    p0 = pts[boundary[0]]
    if nb == 1:
        return p0, 0.0
    a = pts[boundary[1:]] - p0
    b = 0.5 * np.einsum("ij,ij->i", a, a)
    # minimum-norm solution keeps the center in the affine hull
    c, _, _, _ = np.linalg.lstsq(a, b, rcond=None)
    scale = max(1.0, float(np.abs(a).max()))
    if np.linalg.norm(a @ c - b) > 1e3 * tol_geom * scale * scale:
        return None, -1.0  # no sphere through these points; cannot be a support set
    return p0 + c, float(c @ c)


def _welzl(
    pts: np.ndarray,
    order: list[int],
    pos: int,
    boundary: list[int],
    tol_geom: float,
) -> tuple[np.ndarray | None, float]:
    d = pts.shape[1]
    if pos == len(order) or len(boundary) == d + 1:
        return _boundary_ball(pts, boundary, tol_geom)
    i = order[pos]
    center, r2 = _welzl(pts, order, pos + 1, boundary, tol_geom)
    if center is not None:
        diff = pts[i] - center
        if diff @ diff <= r2 + tol_geom * (1.0 + r2):
            return center, r2
    return _welzl(pts, order, pos + 1, boundary + [i], tol_geom)


def min_enclosing_ball(
    points: np.ndarray, tol_geom: float = TOL_GEOM, seed: int = 0
) -> tuple[np.ndarray, float]:
    """Center and radius of the smallest ball containing all points.

    Welzl's randomized recursion over support sets of size at most d+1.
    The shuffle is seeded so results are reproducible; the ball itself
    is unique regardless of order.
    """
    pts = _as_points(points)
    n = pts.shape[0]
    if n == 0:
        raise ValueError("need at least one point")
    if n == 1:
        return pts[0].copy(), 0.0
    order = list(range(n))
    random.Random(seed).shuffle(order)
    center, r2 = _welzl(pts, order, 0, [], tol_geom)
    if center is None:
        raise DegenerateError("minimum enclosing ball construction failed")
    return center, float(np.sqrt(max(r2, 0.0)))


def min_image(diff: np.ndarray, period: float | None) -> np.ndarray:
    """Wrap coordinate differences into (-period/2, period/2]."""
    if period is None:
        return diff
    return diff - period * np.round(diff / period)


def unwrap_min_image(configs: np.ndarray, period: float | None) -> np.ndarray:
    """Replace each point by its minimum image relative to the first vertex.

    ``configs`` has shape (..., s, d).  Valid as a local isometry when
    every configuration has diameter below period/4.
    """
    if period is None:
        return configs
    rel = configs - configs[..., :1, :]
    return configs[..., :1, :] + min_image(rel, period)


def distance_to_set(x: np.ndarray, cloud, period: float | None = None) -> float:
    """Distance from ``x`` to the nearest point of a finite set.

    ``cloud`` may be a bare (n, d) array or any object exposing
    ``points`` and ``period`` attributes.  Returns ``inf`` for an empty
    set.
    """
    pts = np.asarray(getattr(cloud, "points", cloud), dtype=np.float64)
    per = getattr(cloud, "period", period)
    if pts.size == 0:
        return float("inf")
    diff = min_image(pts - np.asarray(x, dtype=np.float64), per)
    return float(np.sqrt(np.einsum("ij,ij->i", diff, diff).min()))


# ---------------------------------------------------------------------------
# batched variants over stacked configurations
# ---------------------------------------------------------------------------


def circumsphere_batch(
    configs: np.ndarray, tol_geom: float = TOL_GEOM
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Circumspheres of N stacked (s, d) configurations, s - 1 <= d.

    Returns ``(centers, r2, bary, good)`` where ``bary`` holds the
    barycentric coordinates of each center with respect to its
    configuration and ``good`` flags rows whose normalized Gram system
    was well-conditioned.  Bad rows carry unspecified values.
    """
    p = np.asarray(configs, dtype=np.float64)
    n, s, d = p.shape
    k = s - 1
    centers = np.zeros((n, d))
    r2 = np.zeros(n)
    bary = np.zeros((n, s))
    if n == 0:
        return centers, r2, bary, np.zeros(0, dtype=bool)
    a = p[:, 1:, :] - p[:, :1, :]
    gram = a @ a.transpose(0, 2, 1)
    diag = np.einsum("nii->ni", gram)
    # scale-free conditioning proxy: determinant of the normalized Gram matrix
    denom = np.sqrt(np.clip(diag, 1e-300, None))
    norm_gram = gram / (denom[:, :, None] * denom[:, None, :])
    good = (diag.min(axis=1) > 0.0) & (np.linalg.det(norm_gram) > tol_geom)
    if good.any():
        b = 0.5 * diag[good]
        w = np.linalg.solve(gram[good], b[:, :, None])[:, :, 0]
        rel = np.einsum("nk,nkd->nd", w, a[good])
        centers[good] = p[good, 0, :] + rel
        r2[good] = np.einsum("nd,nd->n", rel, rel)
        bary[good, 0] = 1.0 - w.sum(axis=1)
        bary[good, 1:] = w
    return centers, r2, bary, good


def miniball_batch(
    configs: np.ndarray, tol_geom: float = TOL_GEOM
) -> tuple[np.ndarray, np.ndarray]:
    """Minimum enclosing balls of N stacked (s, d) configurations.

    Enumerates circumspheres of all subsets of size 2..min(s, d+1) and
    keeps, per row, the smallest one enclosing every point.  Exact for
    point sets in general position; intended for small s (the complex
    builders use s <= d + 1 by a Helly reduction).
    """
    p = np.asarray(configs, dtype=np.float64)
    n, s, d = p.shape
    best_c = np.zeros((n, d))
    best_r2 = np.full(n, np.inf)
    if n == 0:
        return best_c, best_r2
    for size in range(2, min(s, d + 1) + 1):
        for sub in combinations(range(s), size):
            c, r2, _, good = circumsphere_batch(p[:, sub, :], tol_geom)
            diff = p - c[:, None, :]
            d2 = np.einsum("nsd,nsd->ns", diff, diff)
            atol = tol_geom * (1.0 + r2)
            enclosing = good & (d2.max(axis=1) <= r2 + atol) & (r2 < best_r2)
            best_c[enclosing] = c[enclosing]
            best_r2[enclosing] = r2[enclosing]
    return best_c, best_r2
