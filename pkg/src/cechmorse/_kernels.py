"""Compiled inner loops for complex construction and reduction.

All functions are written as plain nopython-compatible loops and jitted
when numba is importable; without it they still run (slowly) as pure
Python, which keeps the package importable in minimal environments.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def _njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


@_njit(cache=True)
def _row_extensions(row, indptr, indices, buf_a, buf_b):
    """Common neighbors of all vertices in ``row`` that exceed its last entry.

    Returns the count; survivors are left in ``buf_a[:count]``.
    """
    k = row.shape[0]
    last = row[k - 1]
    v0 = row[0]
    lo, hi = indptr[v0], indptr[v0 + 1]
    # skip to neighbors beyond the last vertex to keep rows sorted and unique
    while lo < hi and indices[lo] <= last:
        lo += 1
    count = 0
    for t in range(lo, hi):
        buf_a[count] = indices[t]
        count += 1
    for i in range(1, k):
        if count == 0:
            return 0
        vi = row[i]
        lo, hi = indptr[vi], indptr[vi + 1]
        while lo < hi and indices[lo] <= last:
            lo += 1
        m = 0
        a = 0
        b = lo
        while a < count and b < hi:
            x = buf_a[a]
            y = indices[b]
            if x == y:
                buf_b[m] = x
                m += 1
                a += 1
                b += 1
            elif x < y:
                a += 1
            else:
                b += 1
        for t in range(m):
            buf_a[t] = buf_b[t]
        count = m
    return count


@_njit(cache=True)
def clique_extensions(prev, indptr, indices):
    """Expand (N, k) sorted simplex rows to (M, k+1) clique candidates.

    A candidate appends a vertex adjacent to every vertex of the row and
    larger than its maximum, so each clique is emitted exactly once.
    """
    n, k = prev.shape
    max_deg = 0
    for v in range(indptr.shape[0] - 1):
        deg = indptr[v + 1] - indptr[v]
        if deg > max_deg:
            max_deg = deg
    buf_a = np.empty(max_deg, dtype=indices.dtype)
    buf_b = np.empty(max_deg, dtype=indices.dtype)
    counts = np.empty(n, dtype=np.int64)
    for r in range(n):
        counts[r] = _row_extensions(prev[r], indptr, indices, buf_a, buf_b)
    total = 0
    for r in range(n):
        total += counts[r]
    out = np.empty((total, k + 1), dtype=prev.dtype)
    pos = 0
    for r in range(n):
        c = _row_extensions(prev[r], indptr, indices, buf_a, buf_b)
        for t in range(c):
            for j in range(k):
                out[pos, j] = prev[r, j]
            out[pos, k] = buf_a[t]
            pos += 1
    return out


@_njit(cache=True)
def find_rows(haystack, needles):
    """Index of each needle row in a lexicographically sorted row array.

    Returns -1 for rows that are absent.
    """
    n, k = haystack.shape
    m = needles.shape[0]
    out = np.empty(m, dtype=np.int64)
    for i in range(m):
        lo = 0
        hi = n
        found = np.int64(-1)
        while lo < hi:
            mid = (lo + hi) // 2
            cmp = 0
            for j in range(k):
                a = haystack[mid, j]
                b = needles[i, j]
                if a < b:
                    cmp = -1
                    break
                if a > b:
                    cmp = 1
                    break
            if cmp == 0:
                found = mid
                break
            if cmp < 0:
                lo = mid + 1
            else:
                hi = mid
        out[i] = found
    return out


@_njit(cache=True)
def count_ball_occupancy(
    pts, order, start, shape, strides, origin, cellw, period,
    centers, radii, atols,
):
    """Occupancy of open balls against a packed spatial grid.

    For each center/radius pair, counts cloud points strictly inside the
    shrunken ball (distance < r - atol) and points in the closed
    tolerance shell (|distance - r| <= atol).  ``period`` of zero means
    the plain Euclidean metric.
    """
    m, d = centers.shape
    n_inside = np.zeros(m, dtype=np.int64)
    n_shell = np.zeros(m, dtype=np.int64)
    lo_cell = np.empty(d, dtype=np.int64)
    span = np.empty(d, dtype=np.int64)
    coord = np.empty(d, dtype=np.int64)
    for q in range(m):
        r = radii[q]
        atol = atols[q]
        r_in = r - atol
        if r_in < 0.0:
            r_in = 0.0
        r_out = r + atol
        in2 = r_in * r_in
        out2 = r_out * r_out
        total = 1
        for j in range(d):
            lo = int(np.floor((centers[q, j] - r_out - origin[j]) / cellw[j]))
            hi = int(np.floor((centers[q, j] + r_out - origin[j]) / cellw[j]))
            if period == 0.0:
                if lo < 0:
                    lo = 0
                if hi > shape[j] - 1:
                    hi = shape[j] - 1
            else:
                if hi - lo + 1 >= shape[j]:
                    lo = 0
                    hi = shape[j] - 1
            lo_cell[j] = lo
            span[j] = hi - lo + 1
            total *= span[j]
        for t in range(total):
            rem = t
            for j in range(d - 1, -1, -1):
                coord[j] = lo_cell[j] + rem % span[j]
                rem //= span[j]
            flat = 0
            for j in range(d):
                c = coord[j]
                if period != 0.0:
                    c = c % shape[j]
                    if c < 0:
                        c += shape[j]
                flat += c * strides[j]
            for t2 in range(start[flat], start[flat + 1]):
                p = order[t2]
                d2 = 0.0
                for j in range(d):
                    diff = pts[p, j] - centers[q, j]
                    if period != 0.0:
                        diff -= period * np.round(diff / period)
                    d2 += diff * diff
                if d2 < in2:
                    n_inside[q] += 1
                elif d2 <= out2:
                    n_shell[q] += 1
    return n_inside, n_shell


@_njit(cache=True)
def miniball_r2_small(cfg):
    """Squared smallest-enclosing-ball radius per row of 2 to 4 points.

    Enumerates the candidate boundary subsets (pairs, triples, and the
    full quadruple), keeps the smallest candidate ball containing the
    whole row; exact for up to four points in any ambient dimension.
    Rows whose candidates all fail the containment slack (which needs
    adversarial rounding) return -1 so the caller can fall back.
    """
    n, s, d = cfg.shape
    out = np.empty(n)
    c = np.empty(d)
    for row in range(n):
        best = np.inf
        for i in range(s - 1):
            for j in range(i + 1, s):
                r2 = 0.0
                for t in range(d):
                    half = 0.5 * (cfg[row, i, t] - cfg[row, j, t])
                    r2 += half * half
                    c[t] = 0.5 * (cfg[row, i, t] + cfg[row, j, t])
                if r2 < best:
                    lim = r2 * (1.0 + 1e-9)
                    ok = True
                    for p in range(s):
                        if p == i or p == j:
                            continue
                        d2 = 0.0
                        for t in range(d):
                            diff = cfg[row, p, t] - c[t]
                            d2 += diff * diff
                        if d2 > lim:
                            ok = False
                            break
                    if ok:
                        best = r2
        if s >= 3:
            for i in range(s - 2):
                for j in range(i + 1, s - 1):
                    for k in range(j + 1, s):
                        aa = 0.0
                        ab = 0.0
                        bb = 0.0
                        for t in range(d):
                            a_t = cfg[row, j, t] - cfg[row, i, t]
                            b_t = cfg[row, k, t] - cfg[row, i, t]
                            aa += a_t * a_t
                            ab += a_t * b_t
                            bb += b_t * b_t
                        det = aa * bb - ab * ab
                        if det <= 1e-14 * aa * bb:
                            continue  # collinear: pair candidates cover it
                        al = 0.5 * bb * (aa - ab) / det
                        be = 0.5 * aa * (bb - ab) / det
                        r2 = al * al * aa + 2.0 * al * be * ab + be * be * bb
                        if r2 < best:
                            for t in range(d):
                                c[t] = (
                                    cfg[row, i, t]
                                    + al * (cfg[row, j, t] - cfg[row, i, t])
                                    + be * (cfg[row, k, t] - cfg[row, i, t])
                                )
                            lim = r2 * (1.0 + 1e-9)
                            ok = True
                            for p in range(s):
                                if p == i or p == j or p == k:
                                    continue
                                d2 = 0.0
                                for t in range(d):
                                    diff = cfg[row, p, t] - c[t]
                                    d2 += diff * diff
                                if d2 > lim:
                                    ok = False
                                    break
                            if ok:
                                best = r2
        if s == 4:
            g00 = 0.0
            g01 = 0.0
            g02 = 0.0
            g11 = 0.0
            g12 = 0.0
            g22 = 0.0
            for t in range(d):
                a0 = cfg[row, 1, t] - cfg[row, 0, t]
                a1 = cfg[row, 2, t] - cfg[row, 0, t]
                a2 = cfg[row, 3, t] - cfg[row, 0, t]
                g00 += a0 * a0
                g01 += a0 * a1
                g02 += a0 * a2
                g11 += a1 * a1
                g12 += a1 * a2
                g22 += a2 * a2
            det = (
                g00 * (g11 * g22 - g12 * g12)
                - g01 * (g01 * g22 - g12 * g02)
                + g02 * (g01 * g12 - g11 * g02)
            )
            if det > 1e-14 * g00 * g11 * g22:
                h0 = 0.5 * g00
                h1 = 0.5 * g11
                h2 = 0.5 * g22
                x0 = (
                    h0 * (g11 * g22 - g12 * g12)
                    - g01 * (h1 * g22 - g12 * h2)
                    + g02 * (h1 * g12 - g11 * h2)
                ) / det
                x1 = (
                    g00 * (h1 * g22 - g12 * h2)
                    - h0 * (g01 * g22 - g12 * g02)
                    + g02 * (g01 * h2 - h1 * g02)
                ) / det
                x2 = (
                    g00 * (g11 * h2 - h1 * g12)
                    - g01 * (g01 * h2 - h1 * g02)
                    + h0 * (g01 * g12 - g11 * g02)
                ) / det
                r2 = 0.0
                for t in range(d):
                    u = (
                        x0 * (cfg[row, 1, t] - cfg[row, 0, t])
                        + x1 * (cfg[row, 2, t] - cfg[row, 0, t])
                        + x2 * (cfg[row, 3, t] - cfg[row, 0, t])
                    )
                    r2 += u * u
                if r2 < best:
                    best = r2
        out[row] = best if best < np.inf else -1.0
    return out


@_njit(cache=True)
def collapse_round(bnd, alive_top, alive_low):
    """One round of free-face collapses between adjacent dimensions.

    ``bnd`` maps each top cell to its facet indices.  A low cell with
    exactly one living coface is removed together with that coface.
    Returns the number of removed pairs.
    """
    n_top, s = bnd.shape
    n_low = alive_low.shape[0]
    counts = np.zeros(n_low, dtype=np.int64)
    owner = np.full(n_low, -1, dtype=np.int64)
    for i in range(n_top):
        if alive_top[i]:
            for j in range(s):
                f = bnd[i, j]
                counts[f] += 1
                owner[f] = i
    removed = 0
    for f in range(n_low):
        if alive_low[f] and counts[f] == 1:
            top = owner[f]
            if alive_top[top]:
                alive_top[top] = False
                alive_low[f] = False
                removed += 1
    return removed
