"""Uniform spatial grid for fixed-radius neighbor queries.

Points are bucketed into lattice cells at least as wide as the query
cutoff, so all neighbors of a point live in the 3^d surrounding cells.
The grid supports an optional periodic wrap for the flat torus metric;
cell sizes then divide the period exactly.
"""

from __future__ import annotations

import numpy as np

from .geometry import min_image


class SpatialGrid:
    """Cell map over a point set supporting radius-bounded queries.

    ``cell_size`` is a lower bound: actual cells may be larger (for
    periodic grids the period is split into an integer number of cells).
    Pair queries require the cutoff to stay within the realized cell
    width.
    """

    def __init__(self, points: np.ndarray, cell_size: float, period: float | None = None):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError("points must be a 2-d array")
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        n, d = pts.shape
        self.points = pts
        self.period = period
        if period is not None:
            per_axis = max(1, int(np.floor(period / cell_size)))
            self.shape = np.full(d, per_axis, dtype=np.int64)
            self.origin = np.zeros(d)
            self.cell = np.full(d, period / per_axis)
            coords = np.floor(pts / self.cell).astype(np.int64) % per_axis
        else:
            lo = pts.min(axis=0) if n else np.zeros(d)
            hi = pts.max(axis=0) if n else np.zeros(d)
            counts = np.maximum(1, np.ceil((hi - lo) / cell_size - 1e-12).astype(np.int64))
            self.shape = counts
            self.origin = lo
            self.cell = np.full(d, cell_size)
            coords = np.clip(
                np.floor((pts - lo) / cell_size).astype(np.int64), 0, counts - 1
            )
        # row-major: strides[i] is the product of trailing axis counts
        self._strides = np.append(np.cumprod(self.shape[::-1])[::-1][1:], 1).astype(np.int64)
        flat = coords @ self._strides
        self.n_cells = int(self.shape.prod())
        order = np.argsort(flat, kind="stable")
        self.order = order.astype(np.int64)
        counts = np.bincount(flat, minlength=self.n_cells)
        self.start = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        self._flat = flat

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def _cell_members(self, flat_idx: int) -> np.ndarray:
        return self.order[self.start[flat_idx] : self.start[flat_idx + 1]]

    def _neighbor_cells(self, coord: np.ndarray) -> list[int]:
        """Flat indices of the 3^d block around ``coord`` (deduplicated)."""
        d = self.dim
        offsets = np.stack(
            np.meshgrid(*([np.array([-1, 0, 1])] * d), indexing="ij"), axis=-1
        ).reshape(-1, d)
        nbr = coord + offsets
        if self.period is not None:
            nbr %= self.shape
        else:
            ok = np.all((nbr >= 0) & (nbr < self.shape), axis=1)
            nbr = nbr[ok]
        flat = np.unique(nbr @ self._strides)
        return [int(f) for f in flat]

    def close_pairs(self, cutoff: float) -> tuple[np.ndarray, np.ndarray]:
        """All index pairs (i, j), i < j, with distance at most ``cutoff``.

        Returns the pairs as an (E, 2) array sorted lexicographically,
        along with the squared distances.
        """
        if cutoff > self.cell.min() * (1 + 1e-12):
            raise ValueError("cutoff exceeds grid cell size")
        pts, period = self.points, self.period
        out_pairs: list[np.ndarray] = []
        out_d2: list[np.ndarray] = []
        c2 = cutoff * cutoff
        occupied = np.nonzero(np.diff(self.start))[0]
        for flat in occupied:
            a = self._cell_members(flat)
            coord = self._unflatten(flat)
            # same-cell pairs
            if a.size > 1:
                diff = min_image(pts[a][:, None, :] - pts[a][None, :, :], period)
                d2 = np.einsum("ijk,ijk->ij", diff, diff)
                iu, ju = np.triu_indices(a.size, k=1)
                keep = d2[iu, ju] <= c2
                if keep.any():
                    pi, pj = a[iu[keep]], a[ju[keep]]
                    lo = np.minimum(pi, pj)
                    hi = np.maximum(pi, pj)
                    out_pairs.append(np.column_stack([lo, hi]))
                    out_d2.append(d2[iu, ju][keep])
            # neighbor cells, visited once per unordered cell pair
            for nf in self._neighbor_cells(coord):
                if nf <= flat:
                    continue
                b = self._cell_members(nf)
                if b.size == 0:
                    continue
                diff = min_image(pts[a][:, None, :] - pts[b][None, :, :], period)
                d2 = np.einsum("ijk,ijk->ij", diff, diff)
                ii, jj = np.nonzero(d2 <= c2)
                if ii.size:
                    pi, pj = a[ii], b[jj]
                    lo = np.minimum(pi, pj)
                    hi = np.maximum(pi, pj)
                    out_pairs.append(np.column_stack([lo, hi]))
                    out_d2.append(d2[ii, jj])
        if not out_pairs:
            return np.empty((0, 2), dtype=np.int64), np.empty(0)
        pairs = np.concatenate(out_pairs)
        d2 = np.concatenate(out_d2)
        key = np.lexsort((pairs[:, 1], pairs[:, 0]))
        return pairs[key], d2[key]

    def _unflatten(self, flat: int) -> np.ndarray:
        coord = np.empty(self.dim, dtype=np.int64)
        rem = int(flat)
        for i, s in enumerate(self._strides):
            coord[i], rem = divmod(rem, int(s))
        return coord

    def query_ball(self, center: np.ndarray, radius: float) -> np.ndarray:
        """Indices of all points within ``radius`` of ``center``."""
        c = np.asarray(center, dtype=np.float64)
        lo = np.floor((c - radius - self.origin) / self.cell).astype(np.int64)
        hi = np.floor((c + radius - self.origin) / self.cell).astype(np.int64)
        if self.period is None:
            lo = np.clip(lo, 0, self.shape - 1)
            hi = np.clip(hi, 0, self.shape - 1)
        ranges = [np.arange(l, h + 1) for l, h in zip(lo, hi)]
        mesh = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, self.dim)
        if self.period is not None:
            mesh %= self.shape
        flats = np.unique(mesh @ self._strides)
        cand: list[np.ndarray] = [self._cell_members(int(f)) for f in flats]
        idx = np.concatenate(cand) if cand else np.empty(0, dtype=np.int64)
        if idx.size == 0:
            return idx
        diff = min_image(self.points[idx] - c, self.period)
        d2 = np.einsum("ij,ij->i", diff, diff)
        return np.sort(idx[d2 <= radius * radius])

    def packed(self) -> tuple:
        """Flat arrays (points, order, start, shape, origin, cell, period)
        for consumption by compiled kernels."""
        per = self.period if self.period is not None else 0.0
        return (
            self.points,
            self.order,
            self.start,
            self.shape,
            self.origin,
            self.cell,
            float(per),
        )
