"""Critical points of the distance function to a point cloud.

The distance field d_P(x) = min_p |x - p| is a min-type function.  Its
local minima are the cloud points themselves (index 0); every other
nondegenerate critical point of index k is generated by a subset Y of
k+1 points and sits at the center C(Y) of the unique sphere through Y
with center in their affine hull, subject to three conditions:

* CP1: C(Y) lies in the open convex hull of Y;
* CP2: the open ball B(C(Y), R(Y)) contains no cloud point;
* CP3: the critical value R(Y) is at most the query radius r.

Under CP1 the sphere through Y is the minimum enclosing ball of Y, so
every generator with value <= r spans a Cech simplex at radius r; and
under CP2 the generator is a Delaunay face.  Those two facts drive the
two candidate strategies: clique expansion (exact, efficient when the
neighbor graph is sparse) and Delaunay faces (efficient at dense
scales, exact for clouds in general position).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from . import _kernels
from .cech import _neighbor_grid, build_cech
from .errors import DegenerateError, DegeneracyWarning, MetricRangeError
from .geometry import (
    TOL_GEOM,
    circumsphere,
    circumsphere_batch,
    in_open_convex_hull,
    min_image,
    miniball_batch,
    unwrap_min_image,
)
from .grid import SpatialGrid

_DENSE_DEGREE = 24.0  # mean neighbor-graph degree above which Delaunay wins


@dataclass(frozen=True)
class CriticalPoint:
    """A critical point of the distance function.

    ``value`` is the distance level (the circumradius of the
    generators); ``center`` is wrapped into the fundamental box on
    periodic clouds.
    """

    k: int
    center: tuple[float, ...]
    value: float
    generators: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "center": list(self.center),
            "value": self.value,
            "generators": list(self.generators),
        }


def save_critical_points(
    points: list[CriticalPoint], path, extra: dict | None = None
) -> None:
    """JSON-lines: a metadata line, then one critical point per line."""
    meta = {"format": "cechmorse.critical.v1", "count": len(points)}
    if extra:
        meta.update(extra)
    with open(path, "w") as fh:
        fh.write(json.dumps(meta) + "\n")
        for cp in points:
            fh.write(json.dumps(cp.to_dict()) + "\n")


def load_critical_points(path) -> list[CriticalPoint]:
    out = []
    with open(path) as fh:
        fh.readline()  # metadata
        for line in fh:
            rec = json.loads(line)
            out.append(
                CriticalPoint(
                    k=rec["k"],
                    center=tuple(rec["center"]),
                    value=rec["value"],
                    generators=tuple(rec["generators"]),
                )
            )
    return out


def _resolve(cloud) -> tuple[np.ndarray, float | None]:
    pts = np.ascontiguousarray(getattr(cloud, "points", cloud), dtype=np.float64)
    return pts, getattr(cloud, "period", None)


def _tile_periodic(pts: np.ndarray, side: float, margin: float):
    """Copies of boundary-layer points shifted one period outward.

    A face of the Delaunay triangulation of the tiled set maps to its
    original vertex ids; faces touching a repeated id are artifacts of
    the tiling and are dropped by the caller.
    """
    n, d = pts.shape
    margin = min(margin, side)
    reps = [pts]
    ids = [np.arange(n, dtype=np.int64)]
    base = np.arange(n, dtype=np.int64)
    for offset in product((-1, 0, 1), repeat=d):
        if not any(offset):
            continue
        mask = np.ones(n, dtype=bool)
        for c, s in enumerate(offset):
            if s == 1:
                mask &= pts[:, c] < margin
            elif s == -1:
                mask &= pts[:, c] > side - margin
        if mask.any():
            reps.append(pts[mask] + side * np.asarray(offset, dtype=np.float64))
            ids.append(base[mask])
    return np.concatenate(reps), np.concatenate(ids)


def _delaunay_candidates(
    pts: np.ndarray, period: float | None, r: float, max_size: int
) -> dict[int, np.ndarray]:
    from scipy.spatial import Delaunay

    if period is not None:
        tiled, orig = _tile_periodic(pts, period, margin=2.5 * r)
    else:
        tiled, orig = pts, np.arange(len(pts), dtype=np.int64)
    tri = Delaunay(tiled)
    cells = orig[tri.simplices]
    out: dict[int, np.ndarray] = {}
    s_cell = cells.shape[1]
    for size in range(2, min(max_size, s_cell) + 1):
        rows = [cells[:, list(sub)] for sub in combinations(range(s_cell), size)]
        cand = np.sort(np.concatenate(rows), axis=1)
        cand = cand[(np.diff(cand, axis=1) > 0).all(axis=1)]  # drop tiling artifacts
        out[size] = np.unique(cand, axis=0).astype(np.int32)
    return out


def _expansion_candidates(cloud, r: float, max_size: int) -> dict[int, np.ndarray]:
    # generators have miniball radius <= r, so they span Cech simplices at r
    pts, _ = _resolve(cloud)
    d = pts.shape[1]
    cx = build_cech(cloud, r, max_dim=min(max_size - 1, d))
    return {k + 1: cx.simplices[k] for k in range(1, cx.max_dim + 1) if k in cx.simplices}


def _evaluate_candidates(
    pts: np.ndarray,
    period: float | None,
    grid: SpatialGrid,
    cand: np.ndarray,
    r: float,
    tol_geom: float,
):
    """Apply CP1-CP3 to candidate generator sets; returns accepted rows."""
    configs = unwrap_min_image(pts[cand], period)
    centers, r2, bary, good = circumsphere_batch(configs, tol_geom)
    radius_bound = r + tol_geom * (1.0 + r)
    bound2 = radius_bound * radius_bound
    n_degenerate = 0
    bad = ~good
    if bad.any():
        # nearly affinely dependent generators: the circumradius is never
        # below the enclosing-ball radius, so rows whose enclosing ball
        # already exceeds the value bound cannot be critical and are
        # dropped silently; only the rest count as genuinely ambiguous
        bad_cfg = configs[bad]
        if bad_cfg.shape[1] <= 4:
            mini = _kernels.miniball_r2_small(bad_cfg)
            retry = mini < 0
            if retry.any():
                _, mini[retry] = miniball_batch(bad_cfg[retry], tol_geom)
        else:
            _, mini = miniball_batch(bad_cfg, tol_geom)
        n_degenerate = int((mini <= bound2).sum())
    sel = good & (bary > tol_geom).all(axis=1) & (r2 <= bound2)
    if not sel.any():
        return cand[:0], centers[:0], np.empty(0), n_degenerate
    c_sel = centers[sel]
    if period is not None:
        c_sel = np.mod(c_sel, period)
    radii = np.sqrt(r2[sel])
    atols = tol_geom * (1.0 + radii)
    pts_g, order, start, shape, origin, cellw, per = grid.packed()
    strides = grid._strides
    n_inside, n_shell = _kernels.count_ball_occupancy(
        pts_g, order, start, shape, strides, origin, cellw, per,
        np.ascontiguousarray(c_sel), radii, atols,
    )
    s = cand.shape[1]
    empty = n_inside == 0
    clean = n_shell == s  # exactly the generators on the sphere
    n_degenerate += int((empty & ~clean & (n_shell > s)).sum())
    accept = empty & clean
    idx = np.nonzero(sel)[0][accept]
    return cand[idx], c_sel[accept], radii[accept], n_degenerate


def enumerate_critical_points(
    cloud,
    r: float,
    max_index: int | None = None,
    method: str = "auto",
    tol_geom: float = TOL_GEOM,
) -> list[CriticalPoint]:
    """All critical points of the distance function with value <= r.

    Index-0 points (the cloud points, value 0) are included.  Output is
    sorted by (index, value).  Candidates whose defining sphere is
    ill-conditioned, or with a non-generator cloud point inside the
    tolerance shell of the sphere, are skipped; a DegeneracyWarning
    reports how many.

    ``method`` picks the candidate strategy: ``expansion`` (neighbor
    graph cliques), ``delaunay`` (faces of the Delaunay triangulation,
    clouds in general position), ``brute`` (all subsets), or ``auto``.
    """
    pts, period = _resolve(cloud)
    n, d = pts.shape
    if r <= 0:
        raise ValueError("r must be positive")
    if period is not None and r >= period / 4.0:
        raise MetricRangeError(
            f"radius {r} is not below a quarter period ({period / 4.0})"
        )
    if max_index is None:
        max_index = d
    if method == "brute":
        return enumerate_critical_points_brute(cloud, r, max_index, tol_geom)
    out = [
        CriticalPoint(k=0, center=tuple(p), value=0.0, generators=(i,))
        for i, p in enumerate(pts)
    ]
    if max_index < 1 or n < 2:
        return out
    max_size = min(max_index, d) + 1
    grid = _neighbor_grid(pts, max(2.0 * r, 1e-12), period)
    if method == "auto":
        edges, _ = grid.close_pairs(2.0 * r)
        dense = len(edges) > _DENSE_DEGREE * n / 2.0
        method = "delaunay" if dense and d in (2, 3) and n > d + 1 else "expansion"
    if method == "delaunay":
        candidates = _delaunay_candidates(pts, period, r, max_size)
    elif method == "expansion":
        candidates = _expansion_candidates(cloud, r, max_size)
    else:
        raise ValueError(f"unknown method {method!r}")
    n_degenerate = 0
    for size in range(2, max_size + 1):
        cand = candidates.get(size)
        if cand is None or len(cand) == 0:
            continue
        rows, centers, values, n_deg = _evaluate_candidates(
            pts, period, grid, cand, r, tol_geom
        )
        n_degenerate += n_deg
        for row, c, v in zip(rows, centers, values):
            out.append(
                CriticalPoint(
                    k=size - 1,
                    center=tuple(c),
                    value=float(v),
                    generators=tuple(int(x) for x in row),
                )
            )
    if n_degenerate:
        warnings.warn(
            DegeneracyWarning(
                f"skipped {n_degenerate} degenerate critical point candidate(s)"
            )
        )
    out.sort(key=lambda cp: (cp.k, cp.value, cp.generators))
    return out


def enumerate_critical_points_brute(
    cloud, r: float, max_index: int | None = None, tol_geom: float = TOL_GEOM
) -> list[CriticalPoint]:
    """Subset-enumeration reference implementation for small clouds.

    Tests every subset with the scalar geometry predicates and a full
    distance scan for ball emptiness; independent of the grid, clique
    and Delaunay machinery.
    """
    pts, period = _resolve(cloud)
    n, d = pts.shape
    if period is not None and r >= period / 4.0:
        raise MetricRangeError(
            f"radius {r} is not below a quarter period ({period / 4.0})"
        )
    if max_index is None:
        max_index = d
    out = [
        CriticalPoint(k=0, center=tuple(p), value=0.0, generators=(i,))
        for i, p in enumerate(pts)
    ]
    n_degenerate = 0
    radius_bound = r + tol_geom * (1.0 + r)
    for k in range(1, min(max_index, d) + 1):
        for sub in combinations(range(n), k + 1):
            config = unwrap_min_image(pts[list(sub)], period)
            try:
                cs = circumsphere(config, tol_geom)
                if not in_open_convex_hull(cs.center, config, tol_geom):
                    continue
            except DegenerateError:
                n_degenerate += 1
                continue
            if cs.radius > radius_bound:
                continue
            diff = min_image(pts - (np.mod(cs.center, period) if period else cs.center), period)
            dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
            atol = tol_geom * (1.0 + cs.radius)
            if (dist < cs.radius - atol).any():
                continue
            shell = int((np.abs(dist - cs.radius) <= atol).sum())
            if shell != k + 1:
                n_degenerate += 1
                continue
            center = np.mod(cs.center, period) if period is not None else cs.center
            out.append(
                CriticalPoint(
                    k=k,
                    center=tuple(center),
                    value=float(cs.radius),
                    generators=tuple(sub),
                )
            )
    if n_degenerate:
        warnings.warn(
            DegeneracyWarning(
                f"skipped {n_degenerate} degenerate critical point candidate(s)"
            )
        )
    out.sort(key=lambda cp: (cp.k, cp.value, cp.generators))
    return out


def critical_counts(
    cloud, r: float, max_index: int | None = None, method: str = "auto"
) -> tuple[int, ...]:
    """Counts N_0..N_max_index of critical points with value <= r."""
    pts, _ = _resolve(cloud)
    if max_index is None:
        max_index = pts.shape[1]
    points = enumerate_critical_points(cloud, r, max_index, method=method)
    counts = np.zeros(max_index + 1, dtype=np.int64)
    for cp in points:
        counts[cp.k] += 1
    return tuple(int(c) for c in counts)


def morse_euler(cloud, r: float, max_index: int | None = None, method: str = "auto") -> int:
    """Alternating sum of critical point counts up to ``max_index``.

    For radii where every critical value below r is counted, this
    equals the Euler characteristic of the sublevel set, hence of the
    Cech complex at radius r.
    """
    counts = critical_counts(cloud, r, max_index, method=method)
    return int(sum((-1) ** k * c for k, c in enumerate(counts)))
