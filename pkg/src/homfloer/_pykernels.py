"""Pure numpy implementations of the hot kernels.

These define the reference semantics; ``_ckernels.pyx`` mirrors them
loop-for-loop and is selected by :mod:`homfloer.kernels` when compiled.
"""

from __future__ import annotations

import numpy as np

LINEAR = 0
STANDARD = 1
CUBIC_HENON = 2
PENDULUM_VERLET = 3

TWO_PI = 2.0 * np.pi


def step(model_id, params, q, p, inverse=False):
    """One application of the model map (or its inverse) to arrays ``q, p``."""
    if model_id == STANDARD:
        k = params[0]
        if inverse:
            q0 = q - p
            return q0, p - k / TWO_PI * np.sin(TWO_PI * q0)
        p1 = p + k / TWO_PI * np.sin(TWO_PI * q)
        return q + p1, p1
    if model_id == CUBIC_HENON:
        a = params[0]
        if inverse:
            return -p + (2.0 + a) * q - a * q**3, q
        return p, -q + (2.0 + a) * p - a * p**3
    if model_id == PENDULUM_VERLET:
        tau, nsteps = params[0], int(params[1])
        h = 0.5 * tau
        if inverse:
            for _ in range(nsteps):
                ph = p + h * np.sin(q)
                q = q - tau * ph
                p = ph + h * np.sin(q)
            return q, p
        for _ in range(nsteps):
            ph = p - h * np.sin(q)
            q = q + tau * ph
            p = ph - h * np.sin(q)
        return q, p
    if model_id == LINEAR:
        a, b, c, d = params[0], params[1], params[2], params[3]
        if inverse:
            det = a * d - b * c
            return (d * q - b * p) / det, (-c * q + a * p) / det
        return a * q + b * p, c * q + d * p
    raise ValueError(f"unknown kernel model id {model_id}")


def iterate(model_id, params, q, p, counts, inverse, bbox, repeat=1):
    """Apply the map ``counts[i] * repeat`` times to point ``i``.

    Points that leave ``bbox = (xmin, xmax, ymin, ymax)`` are frozen at their
    last in-box position and flagged in the returned ``escaped`` mask.
    """
    q = np.array(q, dtype=float, copy=True)
    p = np.array(p, dtype=float, copy=True)
    counts = np.asarray(counts, dtype=np.int64) * int(repeat)
    escaped = np.zeros(q.shape, dtype=bool)
    nmax = int(counts.max()) if counts.size else 0
    xmin, xmax, ymin, ymax = bbox
    for j in range(nmax):
        act = (counts > j) & ~escaped
        if not act.any():
            break
        idx = np.nonzero(act)[0]
        q2, p2 = step(model_id, params, q[idx], p[idx], inverse)
        out = (q2 < xmin) | (q2 > xmax) | (p2 < ymin) | (p2 > ymax) | ~np.isfinite(q2) | ~np.isfinite(p2)
        escaped[idx[out]] = True
        keep = idx[~out]
        q[keep] = q2[~out]
        p[keep] = p2[~out]
    return q, p, escaped


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def crossing_mask(ax, ay, bx, by, i, j):
    """Vectorized proper-crossing predicate for segment pairs ``(i, j)``.

    Orientation zero is treated as negative, so a curve passing exactly
    through a shared vertex is reported by exactly one segment pair.
    """
    a0x, a0y, a1x, a1y = ax[i], ay[i], ax[i + 1], ay[i + 1]
    b0x, b0y, b1x, b1y = bx[j], by[j], bx[j + 1], by[j + 1]
    s1 = _orient(a0x, a0y, a1x, a1y, b0x, b0y) > 0
    s2 = _orient(a0x, a0y, a1x, a1y, b1x, b1y) > 0
    s3 = _orient(b0x, b0y, b1x, b1y, a0x, a0y) > 0
    s4 = _orient(b0x, b0y, b1x, b1y, a1x, a1y) > 0
    return (s1 != s2) & (s3 != s4)


def _grid_cell(ax, ay, bx, by):
    ext = 0.0
    lo_x = min(ax.min(), bx.min())
    hi_x = max(ax.max(), bx.max())
    lo_y = min(ay.min(), by.min())
    hi_y = max(ay.max(), by.max())
    for x, y in ((ax, ay), (bx, by)):
        ext = max(ext, np.abs(np.diff(x)).max(), np.abs(np.diff(y)).max())
    span = max(hi_x - lo_x, hi_y - lo_y)
    h = max(ext, span / 1024.0, 1e-300)
    return h, lo_x, lo_y


def _cells(x, y, h, x0, y0, ny):
    xmin = np.minimum(x[:-1], x[1:])
    xmax = np.maximum(x[:-1], x[1:])
    ymin = np.minimum(y[:-1], y[1:])
    ymax = np.maximum(y[:-1], y[1:])
    ix0 = np.floor((xmin - x0) / h).astype(np.int64)
    ix1 = np.floor((xmax - x0) / h).astype(np.int64)
    iy0 = np.floor((ymin - y0) / h).astype(np.int64)
    iy1 = np.floor((ymax - y0) / h).astype(np.int64)
    seg = np.arange(len(xmin), dtype=np.int64)
    keys, ids = [], []
    # segment extent <= h, so at most two cells per axis
    for dx in (0, 1):
        for dy in (0, 1):
            ok = (ix0 + dx <= ix1) & (iy0 + dy <= iy1)
            keys.append((ix0[ok] + dx) * ny + (iy0[ok] + dy))
            ids.append(seg[ok])
    return np.concatenate(keys), np.concatenate(ids)


def segment_pairs(ax, ay, bx, by):
    """All properly crossing segment pairs between polylines A and B.

    Grid hashing with cell size at least the longest segment extent; returns
    index arrays ``(i, j)`` sorted lexicographically.
    """
    ax, ay, bx, by = (np.ascontiguousarray(v, dtype=float) for v in (ax, ay, bx, by))
    empty = np.zeros(0, dtype=np.int64)
    if len(ax) < 2 or len(bx) < 2:
        return empty, empty.copy()
    h, x0, y0 = _grid_cell(ax, ay, bx, by)
    ny = int(np.floor((max(ay.max(), by.max()) - y0) / h)) + 3
    ka, ia = _cells(ax, ay, h, x0, y0, ny)
    kb, jb = _cells(bx, by, h, x0, y0, ny)
    order = np.argsort(kb, kind="stable")
    kb, jb = kb[order], jb[order]
    lo = np.searchsorted(kb, ka, side="left")
    hi = np.searchsorted(kb, ka, side="right")
    n = hi - lo
    if n.sum() == 0:
        return empty, empty.copy()
    rep_i = np.repeat(ia, n)
    starts = np.repeat(lo - np.concatenate(([0], np.cumsum(n)[:-1])), n)
    rep_j = jb[np.arange(n.sum()) + starts]
    code = np.unique(rep_i * (len(bx) - 1) + rep_j)
    i = code // (len(bx) - 1)
    j = code % (len(bx) - 1)
    m = crossing_mask(ax, ay, bx, by, i, j)
    return i[m], j[m]
