"""Transverse crossings between an unstable and a stable branch.

Candidate segment pairs come from the grid-hashed kernel; each one is then
refined by Newton's method on the exact branch charts, so the refined point
solves ``P_u(a) = P_s(b)`` in orbit coordinates rather than on the chords.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import AmbiguousMatch, OrbitEscaped
from .maps import MapModel, iterate_points
from .tracer import BranchCurve

logger = logging.getLogger(__name__)

ALPHA_MIN = 1e-3
DEDUP_TOL = 1e-9
RESIDUAL_TOL = 1e-10
MATCH_TOL = 1e-6
MATCH_T_TOL = 1e-6


@dataclass(frozen=True)
class RawCrossing:
    u_segment_index: int
    s_segment_index: int
    approx_point: tuple[float, float]
    angle: float


@dataclass(frozen=True)
class HomoclinicPoint:
    """A refined transverse intersection of one unstable and one stable branch.

    ``u_param``/``s_param`` are arclengths from x; ``t_u``/``t_s`` are the
    orbit coordinates, on which ``phi`` acts by ``(t_u + 1, t_s - 1)``.
    """

    position: tuple[float, float]
    u_param: float
    s_param: float
    crossing_sign: int
    angle: float
    branch_pair: tuple[int, int]
    t_u: float
    t_s: float
    residual: float
    tangent_u: tuple[float, float] = field(repr=False)
    tangent_s: tuple[float, float] = field(repr=False)
    accuracy: str = "high"
    window_truncated: bool = False

    @property
    def xy(self) -> np.ndarray:
        return np.asarray(self.position)

    @property
    def orbit_invariant(self) -> float:
        return self.t_u + self.t_s


def pair_label(pair: tuple[int, int]) -> str:
    return "".join("+" if s > 0 else "-" for s in pair)


def _segment_geometry(u: BranchCurve, s: BranchCurve, i, j):
    a0, a1 = u.xy[i], u.xy[i + 1]
    b0, b1 = s.xy[j], s.xy[j + 1]
    da, db = a1 - a0, b1 - b0
    den = da[..., 0] * db[..., 1] - da[..., 1] * db[..., 0]
    w = b0 - a0
    alpha = (w[..., 0] * db[..., 1] - w[..., 1] * db[..., 0]) / den
    beta = (w[..., 0] * da[..., 1] - w[..., 1] * da[..., 0]) / den
    point = a0 + alpha[..., None] * da
    cosang = (da * db).sum(-1) / (np.hypot(*da.T) * np.hypot(*db.T))
    return point, alpha, beta, np.arccos(np.clip(cosang, -1.0, 1.0))


def _transverse(angle: float) -> float:
    return min(angle, math.pi - angle)


def find_crossings(u: BranchCurve, s: BranchCurve, alpha_min: float = ALPHA_MIN):
    """Properly crossing segment pairs of ``u`` and ``s``.

    Returns ``(crossings, near_tangent)``; pairs whose chord angle is within
    ``alpha_min`` of 0 or pi go to the second list and are not refined.
    """
    i, j = kernels.segment_pairs(u.xy[:, 0], u.xy[:, 1], s.xy[:, 0], s.xy[:, 1])
    if len(i) == 0:
        return [], []
    pts, _, _, ang = _segment_geometry(u, s, i, j)
    good, rejected = [], []
    for k in range(len(i)):
        rc = RawCrossing(int(i[k]), int(j[k]), (float(pts[k, 0]), float(pts[k, 1])), float(ang[k]))
        (good if _transverse(rc.angle) >= alpha_min else rejected).append(rc)
    if rejected:
        logger.warning("%d near-tangent segment pairs excluded (angle < %g)", len(rejected), alpha_min)
    return good, rejected


def brute_force_crossings(u: BranchCurve, s: BranchCurve, chunk: int = 512) -> set[tuple[int, int]]:
    """All-pairs O(mn) test with the same crossing predicate; a reference oracle."""
    out = set()
    nb = len(s.xy) - 1
    jj = np.arange(nb)
    for start in range(0, len(u.xy) - 1, chunk):
        ii = np.arange(start, min(start + chunk, len(u.xy) - 1))
        I, J = np.meshgrid(ii, jj, indexing="ij")
        I, J = I.ravel(), J.ravel()
        m = kernels.crossing_mask(u.xy[:, 0], u.xy[:, 1], s.xy[:, 0], s.xy[:, 1], I, J)
        out.update(zip(I[m].tolist(), J[m].tolist()))
    return out


def _subdivide(u: BranchCurve, s: BranchCurve, ta, tb, levels: int = 50):
    """Bisection fallback: halve both parameter intervals, keep the crossing chord pair."""
    for _ in range(levels):
        am, bm = 0.5 * (ta[0] + ta[1]), 0.5 * (tb[0] + tb[1])
        A = u.chart.points(np.array([ta[0], am, ta[1]]))[0]
        B = s.chart.points(np.array([tb[0], bm, tb[1]]))[0]
        found = False
        for ia in (0, 1):
            for ib in (0, 1):
                ok = kernels.crossing_mask(A[:, 0], A[:, 1], B[:, 0], B[:, 1], np.array([ia]), np.array([ib]))
                if ok[0]:
                    ta = (ta[0], am) if ia == 0 else (am, ta[1])
                    tb = (tb[0], bm) if ib == 0 else (bm, tb[1])
                    found = True
                    break
            if found:
                break
        if not found:
            break
    return 0.5 * (ta[0] + ta[1]), 0.5 * (tb[0] + tb[1])


def _newton_batch(u: BranchCurve, s: BranchCurve, a, b, lo_a, hi_a, lo_b, hi_b, max_iter: int):
    """Vectorized Newton on ``P_u(a) - P_s(b) = 0``; returns ``(a, b, ok)``."""
    a, b = a.copy(), b.copy()
    ok = np.zeros(len(a), dtype=bool)
    live = np.ones(len(a), dtype=bool)
    for _ in range(max_iter):
        idx = np.nonzero(live)[0]
        if idx.size == 0:
            break
        P, dP = u.chart.points_and_tangents(a[idx])
        Q, dQ = s.chart.points_and_tangents(b[idx])
        F = P - Q
        scale = np.maximum(1.0, np.abs(P).max(axis=1))
        done = np.hypot(F[:, 0], F[:, 1]) < 1e-14 * scale
        det = -dP[:, 0] * dQ[:, 1] + dP[:, 1] * dQ[:, 0]
        bad = ~np.isfinite(det) | (det == 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            # solve [dP, -dQ] (da, db) = -F by Cramer's rule
            da = (-F[:, 0] * -dQ[:, 1] - -dQ[:, 0] * -F[:, 1]) / det
            db = (dP[:, 0] * -F[:, 1] - dP[:, 1] * -F[:, 0]) / det
        step = ~done & ~bad
        a[idx[step]] += da[step]
        b[idx[step]] += db[step]
        tiny = step & (np.abs(da) < 1e-15 * np.maximum(1.0, np.abs(a[idx]))) & (np.abs(db) < 1e-15 * np.maximum(1.0, np.abs(b[idx])))
        ok[idx[done | tiny]] = True
        out = (a[idx] < lo_a[idx]) | (a[idx] > hi_a[idx]) | (b[idx] < lo_b[idx]) | (b[idx] > hi_b[idx])
        live[idx[done | tiny | bad | out]] = False
    inside = (a >= lo_a) & (a <= hi_a) & (b >= lo_b) & (b <= hi_b)
    return a, b, ok & inside


def _polish_extended(u: BranchCurve, s: BranchCurve, a, b, max_iter: int = 8):
    """Newton polish of ``P_u(a) = P_s(b)`` with values in extended precision.

    Derivatives come from the double-precision charts; only the residual and
    the orbit coordinates are carried in longdouble. Returns ``(a, b,
    residual, position)``, with the best iterate kept for every point.
    """
    a = np.asarray(a, dtype=np.longdouble).copy()
    b = np.asarray(b, dtype=np.longdouble).copy()
    try:
        P, Q = u.chart.points_extended(a), s.chart.points_extended(b)
    except NotImplementedError:
        P, _ = u.chart.points_and_tangents(a.astype(float))
        Q, _ = s.chart.points_and_tangents(b.astype(float))
        return a, b, np.hypot(*(P - Q).T).astype(float), 0.5 * (P + Q)
    F = P - Q
    best = np.hypot(*F.T.astype(float))
    best_a, best_b, best_pos = a.copy(), b.copy(), (0.5 * (P + Q)).astype(float)
    live = np.arange(len(a))
    for _ in range(max_iter):
        if live.size == 0:
            break
        aa, bb, f = best_a[live], best_b[live], F[live]
        _, dP = u.chart.points_and_tangents(aa.astype(float))
        _, dQ = s.chart.points_and_tangents(bb.astype(float))
        det = (-dP[:, 0] * dQ[:, 1] + dP[:, 1] * dQ[:, 0]).astype(np.longdouble)
        ok = np.isfinite(det) & (det != 0)
        det[~ok] = 1.0
        da = (f[:, 0] * dQ[:, 1] - dQ[:, 0] * f[:, 1]) / det
        db = (dP[:, 0] * f[:, 1] - dP[:, 1] * f[:, 0]) / det
        aa = aa + np.where(ok, da, 0)
        bb = bb - np.where(ok, db, 0)
        P, Q = u.chart.points_extended(aa), s.chart.points_extended(bb)
        f = P - Q
        r = np.hypot(*f.T.astype(float))
        better = r < best[live]
        idx = live[better]
        best[idx], best_a[idx], best_b[idx] = r[better], aa[better], bb[better]
        best_pos[idx] = (0.5 * (P + Q)).astype(float)[better]
        F[idx] = f[better]
        # points already at the precision floor stop here
        live = idx[r[better] > 1e-3 * RESIDUAL_TOL]
    return best_a, best_b, best, best_pos


def refine_crossings(u: BranchCurve, s: BranchCurve, raws: list[RawCrossing], max_iter: int = 30) -> list[HomoclinicPoint]:
    """Newton refinement of many raw crossings at once.

    Each start point is the chord intersection mapped to orbit coordinates.
    Newton runs in double precision and is then polished with residuals in
    extended precision. Iterates that wander more than one segment away from
    their segment pair, or stay above ``RESIDUAL_TOL``, are redone by
    subdivision and polished again; any still above tolerance are flagged
    ``accuracy='low'``.
    """
    if not raws:
        return []
    i = np.array([r.u_segment_index for r in raws])
    j = np.array([r.s_segment_index for r in raws])
    _, alpha, beta, _ = _segment_geometry(u, s, i, j)
    ta0, ta1, tb0, tb1 = u.t[i], u.t[i + 1], s.t[j], s.t[j + 1]
    a = ta0 + alpha * (ta1 - ta0)
    b = tb0 + beta * (tb1 - tb0)
    lo_a, hi_a = ta0 - (ta1 - ta0), ta1 + (ta1 - ta0)
    lo_b, hi_b = tb0 - (tb1 - tb0), tb1 + (tb1 - tb0)
    a, b, ok = _newton_batch(u, s, a, b, lo_a, hi_a, lo_b, hi_b, max_iter)
    inside = (a >= lo_a) & (a <= hi_a) & (b >= lo_b) & (b <= hi_b)
    a, b, res, pos = _polish_extended(u, s, a, b)
    low = ~inside | ~(res < RESIDUAL_TOL)
    if low.any():
        for k in np.nonzero(low)[0]:
            logger.debug("segment pair (%d, %d) redone by subdivision", i[k], j[k])
            a[k], b[k] = _subdivide(u, s, (ta0[k], ta1[k]), (tb0[k], tb1[k]))
        a2, b2, r2, p2 = _polish_extended(u, s, a[low], b[low])
        a[low], b[low], res[low], pos[low] = a2, b2, r2, p2
        low[low] = ~(r2 < RESIDUAL_TOL)
    _, dP = u.chart.points_and_tangents(a.astype(float))
    _, dQ = s.chart.points_and_tangents(b.astype(float))
    cross = dP[:, 0] * dQ[:, 1] - dP[:, 1] * dQ[:, 0]
    angle = np.arctan2(np.abs(cross), (dP * dQ).sum(1))
    up = u.param_at_t(a.astype(float))
    sp = s.param_at_t(b.astype(float))
    return [
        HomoclinicPoint(
            position=(float(pos[k, 0]), float(pos[k, 1])),
            u_param=float(up[k]),
            s_param=float(sp[k]),
            crossing_sign=1 if cross[k] > 0 else -1,
            angle=float(angle[k]),
            branch_pair=(u.side, s.side),
            t_u=float(a[k]),
            t_s=float(b[k]),
            residual=float(res[k]),
            tangent_u=(float(dP[k, 0]), float(dP[k, 1])),
            tangent_s=(float(dQ[k, 0]), float(dQ[k, 1])),
            accuracy="low" if low[k] else "high",
        )
        for k in range(len(raws))
    ]


def refine_crossing(model: MapModel | None, u: BranchCurve, s: BranchCurve, raw: RawCrossing, max_iter: int = 30) -> HomoclinicPoint:
    """Refine one raw crossing; see ``refine_crossings``."""
    return refine_crossings(u, s, [raw], max_iter)[0]


def _flag_window(p: HomoclinicPoint, u: BranchCurve, s: BranchCurve, margin: float) -> HomoclinicPoint:
    near = (
        p.u_param - u.param[0] < margin
        or u.param[-1] - p.u_param < margin
        or p.s_param - s.param[0] < margin
        or s.param[-1] - p.s_param < margin
    )
    if near == p.window_truncated:
        return p
    return HomoclinicPoint(**{**p.__dict__, "window_truncated": near})


def dedup(points: list[HomoclinicPoint], tol: float = DEDUP_TOL) -> list[HomoclinicPoint]:
    """Merge points within ``tol`` in both params, keeping the smaller residual."""
    pts = sorted(points, key=lambda p: (p.u_param, p.s_param))
    out: list[HomoclinicPoint] = []
    for p in pts:
        q = out[-1] if out else None
        if q is not None and abs(p.u_param - q.u_param) < tol and abs(p.s_param - q.s_param) < tol:
            if p.residual < q.residual:
                out[-1] = p
            continue
        out.append(p)
    return out


@dataclass
class CrossingReport:
    points: list[HomoclinicPoint]
    truncated: list[HomoclinicPoint]
    near_tangent: list[RawCrossing]
    low_accuracy: int


def detect(model: MapModel | None, u: BranchCurve, s: BranchCurve, alpha_min: float = ALPHA_MIN) -> CrossingReport:
    """Find, refine, deduplicate and window-filter all crossings of one branch pair."""
    raws, rejected = find_crossings(u, s, alpha_min)
    refined = dedup(refine_crossings(u, s, raws))
    margin = u.seed_delta
    kept, cut = [], []
    extra_tangent = []
    for p in refined:
        p = _flag_window(p, u, s, margin)
        if _transverse(p.angle) < alpha_min:
            extra_tangent.append(p)
            continue
        (cut if p.window_truncated else kept).append(p)
    if extra_tangent:
        logger.warning("%d refined crossings fell below the transversality threshold", len(extra_tangent))
    low = sum(p.accuracy == "low" for p in kept)
    kept.sort(key=lambda p: p.u_param)
    return CrossingReport(kept, cut, rejected, low)


def match_phi_action(points: list[HomoclinicPoint], model: MapModel, tol: float = MATCH_TOL, t_tol: float = MATCH_T_TOL) -> list[int | None]:
    """Index of the detected point matching ``phi(p)`` for every ``p`` (None if outside).

    Candidates are looked up by orbit coordinates, where ``phi`` is the exact
    shift ``(t_u + 1, t_s - 1)``; the image position must then agree within
    ``tol``. Deep in the tangle distinct crossings can be closer than ``tol``
    in the plane, which is why position alone is not used for the lookup.
    Raises ``AmbiguousMatch`` on two candidates or a non-injective table.
    """
    if not points:
        return []
    xy = np.array([p.position for p in points])
    tu = np.array([p.t_u for p in points])
    ts = np.array([p.t_s for p in points])
    q, pp, esc = iterate_points(model, xy[:, 0], xy[:, 1], np.ones(len(points), dtype=np.int64))
    order = np.argsort(tu, kind="stable")
    tus = tu[order]
    lo = np.searchsorted(tus, tu + 1.0 - t_tol, side="left")
    hi = np.searchsorted(tus, tu + 1.0 + t_tol, side="right")
    table: list[int | None] = []
    used: dict[int, int] = {}
    for k in range(len(points)):
        cand = [int(order[c]) for c in range(lo[k], hi[k]) if abs(ts[order[c]] - (ts[k] - 1.0)) < t_tol]
        if len(cand) > 1:
            raise AmbiguousMatch(f"{len(cand)} candidates within {t_tol} of phi(point {k}) in orbit coordinates")
        if not cand or esc[k]:
            table.append(None)
            continue
        j = cand[0]
        dist = math.hypot(xy[j, 0] - q[k], xy[j, 1] - pp[k])
        if dist >= tol:
            raise AmbiguousMatch(f"point {j} matches phi(point {k}) in orbit coordinates but lies {dist:.3g} away")
        if j in used:
            raise AmbiguousMatch(f"points {used[j]} and {k} map onto point {j}")
        used[j] = k
        table.append(j)
    return table


def to_csv(points: list[HomoclinicPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["branch_pair", "x", "y", "u_param", "s_param", "sign", "angle"])
        for p in points:
            w.writerow([pair_label(p.branch_pair), *(f"{v:.17g}" for v in (*p.position, p.u_param, p.s_param)), p.crossing_sign, f"{p.angle:.17g}"])
