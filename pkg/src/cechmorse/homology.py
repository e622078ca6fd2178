"""Betti numbers of simplicial complexes over the two-element field.

The k-th Betti number is F_k - rank(d_k) - rank(d_{k+1}) for the
boundary maps d over GF(2).  Boundary matrices of geometric complexes
are huge but collapse well, so ranks are computed in three stages:

1. free-face collapses from the top dimension down (a cell with a
   unique proper coface is removed together with it);
2. coreductions from the bottom up (a cell whose boundary has a single
   surviving facet is removed together with it), seeded by deleting one
   vertex per connected component;
3. Gaussian elimination on whatever small residue is left, with columns
   as arbitrary-precision bit masks.

Stages 1 and 2 cancel unit entries of the boundary matrix whose row or
column is a singleton, which changes no other matrix entry, so homology
in degrees >= 1 is preserved; the vertex deletions in stage 2 remove
exactly the component count from degree 0, which is computed separately
by union-find.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from . import _kernels
from .cech import SimplicialComplex, build_cech_brute
from .errors import InsufficientDimensionError


def connected_components(n_vertices: int, edges: np.ndarray) -> tuple[int, np.ndarray]:
    """Component count and per-vertex labels by union-find."""
    parent = np.arange(n_vertices, dtype=np.int64)

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in np.asarray(edges, dtype=np.int64).reshape(-1, 2):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[ri] = rj
    labels = np.array([find(int(v)) for v in range(n_vertices)], dtype=np.int64)
    return len(np.unique(labels)) if n_vertices else 0, labels


def boundary_index(cx: SimplicialComplex, k: int) -> np.ndarray:
    """(N_k, k+1) array of facet row indices into dimension k-1."""
    simp = cx.simplices[k]
    prev = cx.simplices[k - 1]
    n, s = simp.shape
    out = np.empty((n, s), dtype=np.int64)
    for drop in range(s):
        cols = [j for j in range(s) if j != drop]
        idx = _kernels.find_rows(prev, np.ascontiguousarray(simp[:, cols]))
        if (idx < 0).any():
            raise ValueError("complex is not closed under taking faces")
        out[:, drop] = idx
    return out


def _coface_csr(bnd: np.ndarray, n_low: int) -> tuple[np.ndarray, np.ndarray]:
    """CSR of cofaces: for each low cell, the top cells it bounds."""
    n_top, s = bnd.shape
    flat = bnd.ravel()
    order = np.argsort(flat, kind="stable")
    tops = np.repeat(np.arange(n_top, dtype=np.int64), s)[order]
    counts = np.bincount(flat, minlength=n_low)
    indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    return indptr, tops


def _bitset_rank(columns: list[int]) -> int:
    """Rank over GF(2) of columns given as integer bit masks."""
    pivots: dict[int, int] = {}
    rank = 0
    for col in columns:
        while col:
            low = col.bit_length() - 1
            other = pivots.get(low)
            if other is None:
                pivots[low] = col
                rank += 1
                break
            col ^= other
    return rank


def _residual_rank(bnd: np.ndarray, alive_top: np.ndarray, alive_low: np.ndarray) -> int:
    """Rank of the boundary map restricted to surviving cells."""
    tops = np.nonzero(alive_top)[0]
    if tops.size == 0:
        return 0
    low_index = np.cumsum(alive_low) - 1  # local row ids for alive facets
    cols = []
    for t in tops:
        mask = 0
        for f in bnd[t]:
            if alive_low[f]:
                mask |= 1 << int(low_index[f])
        cols.append(mask)
    return _bitset_rank(cols)


def _reduce_complex(
    cx: SimplicialComplex, top_dim: int
) -> tuple[dict[int, np.ndarray], dict[int, np.ndarray]]:
    """Collapse + coreduce dimensions 0..top_dim; return boundaries and flags."""
    bnd = {k: boundary_index(cx, k) for k in range(1, top_dim + 1) if cx.face_count(k)}
    alive = {k: np.ones(cx.face_count(k), dtype=bool) for k in range(top_dim + 1)}

    # stage 1: free-face collapse sweeps, top dimension first
    for k in range(top_dim, 0, -1):
        if k not in bnd:
            continue
        while _kernels.collapse_round(bnd[k], alive[k], alive[k - 1]) > 0:
            pass

    # stage 2: coreduction with one seed vertex per surviving component
    facet_count = {k: np.full(cx.face_count(k), k + 1, dtype=np.int64) for k in bnd}
    cof = {k: _coface_csr(bnd[k], cx.face_count(k - 1)) for k in bnd}
    queue: deque[tuple[int, int]] = deque()

    def drop_coface_counts(low_dim: int, cell: int) -> None:
        up = low_dim + 1
        if up not in bnd:
            return
        indptr, tops = cof[up]
        for t in tops[indptr[cell] : indptr[cell + 1]]:
            if alive[up][t]:
                facet_count[up][t] -= 1
                if facet_count[up][t] == 1:
                    queue.append((up, int(t)))

    if 1 in bnd:
        edges_alive = cx.simplices[1][alive[1]]
        verts_alive = np.nonzero(alive[0])[0]
        _, labels = connected_components(cx.n_vertices, edges_alive)
        seen: set[int] = set()
        for v in verts_alive:
            root = int(labels[v])
            if root not in seen:
                seen.add(root)
                alive[0][v] = False
                drop_coface_counts(0, int(v))
        while queue:
            k, cell = queue.popleft()
            if not alive[k][cell] or facet_count[k][cell] != 1:
                continue
            facet = -1
            for f in bnd[k][cell]:
                if alive[k - 1][f]:
                    facet = int(f)
                    break
            alive[k][cell] = False
            alive[k - 1][facet] = False
            drop_coface_counts(k, cell)
            drop_coface_counts(k - 1, facet)
    return bnd, alive


def betti_numbers(cx: SimplicialComplex, max_k: int | None = None) -> tuple[int, ...]:
    """Betti numbers beta_0..beta_max_k over GF(2).

    Requires the complex to be built through dimension ``max_k + 1``,
    since rank(d_{max_k+1}) enters the top requested number.

    Raises
    ------
    InsufficientDimensionError
        If the complex was not built deep enough.
    """
    if max_k is None:
        max_k = cx.max_dim - 1
    if max_k < 0:
        raise ValueError("max_k must be nonnegative")
    if cx.max_dim < max_k + 1:
        raise InsufficientDimensionError(
            f"betti_{max_k} needs simplices of dimension {max_k + 1}; "
            f"complex was built to dimension {cx.max_dim}"
        )
    beta0, _ = connected_components(cx.n_vertices, cx.simplices.get(1, np.empty((0, 2))))
    if max_k == 0:
        return (beta0,)
    bnd, alive = _reduce_complex(cx, max_k + 1)
    ranks = {}
    for k in range(1, max_k + 2):
        if k in bnd:
            ranks[k] = _residual_rank(bnd[k], alive[k], alive[k - 1])
        else:
            ranks[k] = 0
    out = [beta0]
    for k in range(1, max_k + 1):
        f_k = int(alive[k].sum()) if k in alive else 0
        out.append(f_k - ranks[k] - ranks[k + 1])
    return tuple(out)


def euler_characteristic(cx: SimplicialComplex) -> int:
    """Alternating sum of face counts over the built dimensions.

    Equals the homological Euler characteristic when the complex is
    built to its full dimension.
    """
    return sum((-1) ** k * cx.face_count(k) for k in cx.built_dims)


def is_nontrivial_k_cycle(
    points: np.ndarray,
    eps: float,
    k: int | None = None,
    period: float | None = None,
) -> bool:
    """Whether a small configuration carries a k-dimensional hole.

    Builds the full Cech complex on the points at radius ``eps`` and
    reports beta_k == 1.  ``k`` defaults to two less than the number of
    points, the degree where a hollow simplex boundary has its cycle.
    """
    pts = np.asarray(points, dtype=np.float64)
    if k is None:
        k = pts.shape[0] - 2
    if k < 0:
        raise ValueError("need at least two points")
    cx = build_cech_brute(pts, eps, period=period)
    if cx.max_dim < k + 1:
        return False
    return betti_numbers(cx, k)[k] == 1
