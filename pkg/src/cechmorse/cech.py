"""Cech complex construction over point clouds.

A set of k+1 points spans a k-simplex at radius eps iff the balls of
radius eps around them share a common point, i.e. iff their minimum
enclosing ball has radius at most eps.  On the flat torus the balls
live in the quotient metric; configurations of diameter below half the
period lift isometrically to Euclidean space by unwrapping relative to
any member, so the same ball predicate applies to the lifted points.

Candidate simplices are cliques of the neighbor graph at cutoff 2 eps,
grown one vertex at a time.  In Euclidean space the ball predicate only
needs checking up to dimension d (simplices on at most d+1 points): by
Helly's theorem, balls in R^d intersect as soon as every d+1 of them
do, so higher candidates qualify exactly when all their facets are
present.  No such shortcut holds in the periodic box, where every
dimension is tested geometrically on the lifted configuration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import _kernels
from .errors import MetricRangeError
from .geometry import (
    TOL_GEOM,
    min_enclosing_ball,
    miniball_batch,
    unwrap_min_image,
)
from .grid import SpatialGrid

_CHUNK = 200_000
_MAX_GRID_CELLS = 4_000_000


@dataclass
class SimplicialComplex:
    """Simplices grouped by dimension, rows lexicographically sorted.

    ``simplices[k]`` is an (N_k, k+1) int32 array; dimension 0 is always
    the full vertex list.  ``max_dim`` is the dimension the complex was
    built to, which bounds the homology degrees that can be trusted.
    """

    n_vertices: int
    eps: float
    max_dim: int
    simplices: dict[int, np.ndarray] = field(default_factory=dict)

    def face_count(self, k: int) -> int:
        arr = self.simplices.get(k)
        return 0 if arr is None else arr.shape[0]

    @property
    def built_dims(self) -> list[int]:
        return sorted(self.simplices)

    def save(self, path, extra: dict | None = None) -> None:
        """JSON-lines: one metadata line, then {dim, vertices} per simplex
        sorted by (dim, lex)."""
        with open(path, "w") as fh:
            meta = {
                "format": "cechmorse.complex.v1",
                "n_vertices": self.n_vertices,
                "eps": self.eps,
                "max_dim": self.max_dim,
            }
            if extra:
                meta.update(extra)
            fh.write(json.dumps(meta) + "\n")
            for k in self.built_dims:
                for row in self.simplices[k]:
                    fh.write(
                        json.dumps({"dim": k, "vertices": [int(v) for v in row]}) + "\n"
                    )

    @staticmethod
    def load(path) -> "SimplicialComplex":
        rows: dict[int, list[list[int]]] = {}
        with open(path) as fh:
            meta = json.loads(fh.readline())
            for line in fh:
                rec = json.loads(line)
                rows.setdefault(rec["dim"], []).append(rec["vertices"])
        cx = SimplicialComplex(
            n_vertices=meta["n_vertices"], eps=meta["eps"], max_dim=meta["max_dim"]
        )
        for k, lst in rows.items():
            cx.simplices[k] = np.asarray(lst, dtype=np.int32).reshape(len(lst), k + 1)
        return cx


def face_counts(cx: SimplicialComplex) -> tuple[int, ...]:
    """Number of simplices in each built dimension, from 0 upward."""
    return tuple(cx.face_count(k) for k in range(cx.max_dim + 1))


def _resolve_cloud(cloud) -> tuple[np.ndarray, float | None, int | None]:
    pts = np.ascontiguousarray(getattr(cloud, "points", cloud), dtype=np.float64)
    period = getattr(cloud, "period", None)
    spec = getattr(cloud, "spec", None)
    m = spec.m if spec is not None else None
    return pts, period, m


def _check_metric_range(eps: float, period: float | None) -> None:
    if period is not None and eps >= period / 4.0:
        raise MetricRangeError(
            f"radius {eps} is not below a quarter period ({period / 4}); "
            "the periodic ball predicate is only valid below that bound"
        )


def _neighbor_grid(pts: np.ndarray, cutoff: float, period: float | None) -> SpatialGrid:
    """Grid with cells >= cutoff, capped to a bounded total cell count."""
    d = pts.shape[1]
    limit = int(np.ceil(_MAX_GRID_CELLS ** (1.0 / d)))
    if period is not None:
        cell = max(cutoff, period / limit)
    else:
        extent = float((pts.max(axis=0) - pts.min(axis=0)).max()) if len(pts) else 1.0
        cell = max(cutoff, extent / limit)
    return SpatialGrid(pts, cell_size=cell, period=period)


def _adjacency(n: int, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric CSR adjacency with sorted neighbor lists."""
    both = np.concatenate([edges, edges[:, ::-1]])
    order = np.lexsort((both[:, 1], both[:, 0]))
    both = both[order]
    counts = np.bincount(both[:, 0], minlength=n)
    indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    return indptr, both[:, 1].astype(np.int32)


def _facets_present(cand: np.ndarray, prev: np.ndarray) -> np.ndarray:
    """Rows of ``cand`` all of whose facets occur in ``prev``.

    The facet obtained by dropping the last vertex is the row the
    candidate was grown from, so only the remaining ones are checked.
    """
    m, s = cand.shape
    ok = np.ones(m, dtype=bool)
    for drop in range(s - 1):
        cols = [j for j in range(s) if j != drop]
        found = _kernels.find_rows(prev, np.ascontiguousarray(cand[:, cols]))
        ok &= found >= 0
    return ok


def _filter_candidates(
    cand: np.ndarray,
    prev: np.ndarray,
    pts: np.ndarray,
    period: float | None,
    eps: float,
    tol_geom: float,
    geometric: bool,
) -> np.ndarray:
    """Streaming facet-closure and ball filters, bounded peak memory."""
    s = cand.shape[1]
    bound = (eps + tol_geom * (1.0 + eps)) ** 2
    kept: list[np.ndarray] = []
    for lo in range(0, len(cand), _CHUNK):
        chunk = cand[lo : lo + _CHUNK]
        if s >= 4:
            # faces of a simplex are simplices: cheap necessary filter
            chunk = chunk[_facets_present(chunk, prev)]
        if geometric and len(chunk):
            configs = unwrap_min_image(pts[chunk], period)
            if s <= 4:
                r2 = _kernels.miniball_r2_small(configs)
                retry = r2 < 0
                if retry.any():
                    _, r2[retry] = miniball_batch(configs[retry], tol_geom)
            else:
                _, r2 = miniball_batch(configs, tol_geom)
            chunk = chunk[r2 <= bound]
        if len(chunk):
            kept.append(chunk)
    if not kept:
        return np.empty((0, s), dtype=cand.dtype)
    return np.ascontiguousarray(np.concatenate(kept))


def build_cech(
    cloud,
    eps: float,
    max_dim: int | None = None,
    tol_geom: float = TOL_GEOM,
) -> SimplicialComplex:
    """Cech complex of a cloud at ball radius ``eps`` up to ``max_dim``.

    ``max_dim`` defaults to m + 1 on an m-manifold cloud (one past the
    intrinsic dimension, enough for Betti numbers up to m) and to the
    full dimension n - 1 for bare point arrays.

    Raises
    ------
    MetricRangeError
        On periodic clouds with ``eps`` at or above a quarter period.
    """
    pts, period, m = _resolve_cloud(cloud)
    n, d = pts.shape
    _check_metric_range(eps, period)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if max_dim is None:
        max_dim = m + 1 if m is not None else max(n - 1, 0)
    max_dim = int(min(max_dim, max(n - 1, 0)))
    cx = SimplicialComplex(n_vertices=n, eps=float(eps), max_dim=max_dim)
    cx.simplices[0] = np.arange(n, dtype=np.int32).reshape(n, 1)
    if max_dim < 1 or n < 2:
        return cx
    grid = _neighbor_grid(pts, 2.0 * eps, period)
    edges, _ = grid.close_pairs(2.0 * eps)
    cx.simplices[1] = edges.astype(np.int32).reshape(-1, 2)
    if len(edges) == 0:
        for k in range(2, max_dim + 1):
            cx.simplices[k] = np.empty((0, k + 1), dtype=np.int32)
        return cx
    indptr, indices = _adjacency(n, cx.simplices[1])
    for k in range(2, max_dim + 1):
        prev = cx.simplices[k - 1]
        if len(prev) == 0:
            cx.simplices[k] = np.empty((0, k + 1), dtype=np.int32)
            continue
        cand = _kernels.clique_extensions(prev, indptr, indices)
        if len(cand) == 0:
            cx.simplices[k] = np.empty((0, k + 1), dtype=np.int32)
            continue
        # Helly: beyond d+1 vertices in Euclidean space, facet closure
        # already implies a common ball point
        geometric = not (period is None and k + 1 >= d + 2)
        cx.simplices[k] = _filter_candidates(
            cand, prev, pts, period, eps, tol_geom, geometric
        )
    return cx


def build_cech_brute(
    points: np.ndarray,
    eps: float,
    max_dim: int | None = None,
    period: float | None = None,
    tol_geom: float = TOL_GEOM,
) -> SimplicialComplex:
    """Subset-enumeration reference builder for small clouds.

    Independent of the grid and clique machinery: every subset of size
    up to ``max_dim + 1`` is tested directly with the scalar minimum
    enclosing ball.  Intended for cross-validation.
    """
    pts, per, m = _resolve_cloud(points)
    if per is None:
        per = period
    _check_metric_range(eps, per)
    n = pts.shape[0]
    if max_dim is None:
        max_dim = max(n - 1, 0)
    max_dim = int(min(max_dim, max(n - 1, 0)))
    cx = SimplicialComplex(n_vertices=n, eps=float(eps), max_dim=max_dim)
    cx.simplices[0] = np.arange(n, dtype=np.int32).reshape(n, 1)
    bound = eps + tol_geom * (1.0 + eps)
    for k in range(1, max_dim + 1):
        rows = []
        for sub in combinations(range(n), k + 1):
            cfg = unwrap_min_image(pts[list(sub)], per)
            _, r = min_enclosing_ball(cfg, tol_geom)
            if r <= bound:
                rows.append(sub)
        cx.simplices[k] = np.asarray(rows, dtype=np.int32).reshape(len(rows), k + 1)
        if not rows:
            for k2 in range(k + 1, max_dim + 1):
                cx.simplices[k2] = np.empty((0, k2 + 1), dtype=np.int32)
            break
    return cx


def euler_characteristic_full(cloud, eps: float, tol_geom: float = TOL_GEOM) -> int:
    """Euler characteristic of the full-dimensional Cech complex.

    Sums (-1)^k over all qualifying simplices without materializing
    them, by depth-first traversal of the clique tree.  Subtrees whose
    entire candidate set qualifies as one simplex contribute zero (the
    alternating sum over a nonempty power set vanishes) and are pruned,
    which keeps dense clusters cheap.  Worst-case exponential; intended
    for moderate cloud sizes and audits.
    """
    pts, period, _ = _resolve_cloud(cloud)
    n, d = pts.shape
    _check_metric_range(eps, period)
    if n == 0:
        return 0
    grid = _neighbor_grid(pts, 2.0 * eps, period)
    edges, _ = grid.close_pairs(2.0 * eps)
    indptr, indices = _adjacency(n, edges.astype(np.int32))
    bound = (eps + tol_geom * (1.0 + eps)) ** 2

    def qualifies(config: np.ndarray) -> bool:
        _, r2 = miniball_batch(config[None, :, :])
        return bool(r2[0] <= bound)

    def visit(lifted: np.ndarray, r_rows: list[int], cand: np.ndarray) -> int:
        if cand.size:
            if qualifies(lifted[r_rows + list(cand)]):
                return 0
        total = -1 if len(r_rows) % 2 == 0 else 1
        for t in range(cand.size):
            c = int(cand[t])
            rest = cand[t + 1 :]
            if rest.size:
                cfgs = np.empty((rest.size, len(r_rows) + 2, d))
                cfgs[:, :-2, :] = lifted[r_rows]
                cfgs[:, -2, :] = lifted[c]
                cfgs[:, -1, :] = lifted[rest]
                _, r2 = miniball_batch(cfgs)
                child_cand = rest[r2 <= bound]
            else:
                child_cand = rest
            total += visit(lifted, r_rows + [c], child_cand)
        return total

    chi = 0
    for i in range(n):
        nbrs = indices[indptr[i] : indptr[i + 1]]
        nbrs = nbrs[nbrs > i].astype(np.int64)
        group = np.concatenate(([i], nbrs))
        lifted_group = unwrap_min_image(pts[group], period)
        # scatter lifted coordinates back so candidate indices stay global
        lifted = np.zeros_like(pts)
        lifted[group] = lifted_group
        chi += visit(lifted, [i], nbrs)
    return chi
