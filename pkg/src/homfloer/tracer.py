"""Adaptive polyline approximation of the branches of W^s and W^u.

Each branch is parametrized by an orbit coordinate ``t``::

    P(t) = phi^(floor(t)+m) (x + delta * lam^(t - floor(t) - m) * e)

so that ``phi(P(t)) = P(t + 1)`` on unstable branches.  Stable branches are
unstable branches of the inverse map, on which ``phi`` acts as ``t -> t - 1``.
The ``m`` extra iterations project the seed segment from deep inside the
linear regime back onto the manifold.  Refinement inserts vertices at
parameter midpoints, so every vertex is a genuine manifold point.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _pykernels
from .errors import DeltaTooLarge, ImageBeyondTrace, OrbitEscaped, RefinementBudgetExceeded
from .maps import HyperbolicFixedPoint, MapModel, inverse_jacobian, iterate_points

logger = logging.getLogger(__name__)

UNSTABLE = "unstable"
STABLE = "stable"


@dataclass(frozen=True)
class Chart:
    """Exact evaluation of one branch in its orbit coordinate."""

    model: MapModel = field(repr=False)
    fp: HyperbolicFixedPoint = field(repr=False)
    kind: str
    side: int
    delta: float
    m: int

    @property
    def direction(self) -> np.ndarray:
        e = self.fp.unstable_dir if self.kind == UNSTABLE else self.fp.stable_dir
        return self.side * e

    @property
    def inverse(self) -> bool:
        return self.kind == STABLE

    def _seed(self, t):
        t = np.asarray(t, dtype=float)
        n = np.floor(t).astype(np.int64) + self.m
        if np.any(n < 0):
            raise ValueError(f"orbit coordinate below {-self.m} is outside the chart")
        s = self.delta * self.fp.lam ** (t - n)
        e = self.direction
        x = self.fp.location
        return x[0] + s * e[0], x[1] + s * e[1], n, s

    def points(self, t):
        """Vertices ``P(t)`` and an escaped-bounding-box mask."""
        q0, p0, n, _ = self._seed(t)
        q, p, esc = iterate_points(self.model, q0, p0, n, inverse=self.inverse)
        return np.column_stack([q, p]), esc

    def points_extended(self, t):
        """``P(t)`` in extended precision (numpy longdouble), for polishing crossings.

        Uses the reference numpy step, which is dtype-generic; ``t`` should be
        a longdouble array so that deep orbit coordinates are not quantized.
        """
        if self.model.kernel is None:
            raise NotImplementedError("extended evaluation needs a kernel model")
        mid, kp = self.model.kernel
        kp = np.asarray(kp, dtype=np.longdouble)
        t = np.atleast_1d(np.asarray(t, dtype=np.longdouble))
        n = np.floor(t).astype(np.int64) + self.m
        s = np.longdouble(self.delta) * np.longdouble(self.fp.lam) ** (t - n)
        e = self.direction.astype(np.longdouble)
        x = self.fp.location.astype(np.longdouble)
        q, p = x[0] + s * e[0], x[1] + s * e[1]
        counts = n * int(self.model.repeat)
        for j in range(int(counts.max()) if counts.size else 0):
            act = counts > j
            q[act], p[act] = _pykernels.step(mid, kp, q[act], p[act], self.inverse)
        return np.column_stack([q, p])

    def points_and_tangents(self, t):
        """``P(t)`` and ``dP/dt`` by propagating the seed tangent through exact Jacobians."""
        q, p, n, s = self._seed(np.atleast_1d(t))
        e = self.direction
        ln = math.log(self.fp.lam)
        vq, vp = s * ln * e[0], s * ln * e[1]
        step = self.model.inverse if self.inverse else self.model.forward
        for j in range(int(n.max()) if n.size else 0):
            act = n > j
            if not act.any():
                break
            if self.inverse:
                a, b, c, d = inverse_jacobian(self.model, q[act], p[act])
            else:
                a, b, c, d = self.model.jacobian(q[act], p[act])
            wq, wp = vq[act], vp[act]
            vq[act], vp[act] = a * wq + b * wp, c * wq + d * wp
            q[act], p[act] = step(q[act], p[act])
        return np.column_stack([q, p]), np.column_stack([vq, vp])


def make_chart(model: MapModel, fp: HyperbolicFixedPoint, kind: str, side: int, delta: float) -> Chart:
    """Chart with the number of projection iterations chosen from ``delta``.

    The seed depth keeps ``delta * lam^-m`` above the level where round-off
    in ``x + s e`` would jitter the parametrization (relevant when x != 0).
    """
    if kind not in (UNSTABLE, STABLE) or side not in (1, -1):
        raise ValueError(f"bad branch {kind!r} {side!r}")
    s_min = max(1e-7, 1e-5 * float(np.max(np.abs(fp.location))))
    m = max(1, int(math.floor(math.log(max(delta / s_min, 1.0)) / math.log(fp.lam))))
    return Chart(model, fp, kind, side, float(delta), m)


def check_linear_regime(model: MapModel, fp: HyperbolicFixedPoint, kind: str, side: int, delta: float, c: float = 1.0):
    """Raise ``DeltaTooLarge`` unless ``|phi(x + d e) - (x + lam d e)| < c d^2``."""
    e = side * (fp.unstable_dir if kind == UNSTABLE else fp.stable_dir)
    z = fp.location + delta * e
    f = model.inverse if kind == STABLE else model.forward
    q, p = f(np.array([z[0]]), np.array([z[1]]))
    err = float(np.hypot(q[0] - (fp.location[0] + fp.lam * delta * e[0]), p[0] - (fp.location[1] + fp.lam * delta * e[1])))
    if not err < c * delta * delta:
        raise DeltaTooLarge(f"linearization error {err:.3g} >= {c}*delta^2 = {c * delta * delta:.3g} at delta={delta}")
    return err


def seed_fundamental_segment(model, fp, kind: str, side: int, delta: float, m_pts: int) -> np.ndarray:
    """``m_pts`` manifold points spanning one fundamental domain ``[x+de, phi(x+de)]``."""
    check_linear_regime(model, fp, kind, side, delta)
    chart = make_chart(model, fp, kind, side, delta)
    xy, esc = chart.points(np.linspace(0.0, 1.0, m_pts))
    if esc.any():
        raise OrbitEscaped("seed segment left the bounding box")
    return xy


@dataclass(frozen=True)
class BranchCurve:
    """Refined polyline of one branch; ``param`` is cumulative arclength from x."""

    kind: str
    side: int
    t: np.ndarray = field(repr=False)
    xy: np.ndarray = field(repr=False)
    param: np.ndarray = field(repr=False)
    depth: int
    seed_delta: float
    chart: Chart = field(repr=False)
    truncated: bool = False
    unresolved: int = 0

    @property
    def n_vertices(self) -> int:
        return len(self.t)

    @property
    def fixed_point(self) -> np.ndarray:
        return self.chart.fp.location

    @property
    def t_range(self) -> tuple[float, float]:
        return float(self.t[0]), float(self.t[-1])

    def segment_of_t(self, t) -> np.ndarray:
        i = np.searchsorted(self.t, t, side="right") - 1
        return np.clip(i, 0, len(self.t) - 2)

    def param_at_t(self, t):
        """Arclength at orbit coordinate ``t`` (chord distance inside a segment)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        i = self.segment_of_t(t)
        xy, _ = self.chart.points(t)
        return self.param[i] + np.hypot(*(xy - self.xy[i]).T)

    def t_at_param(self, s: float) -> float:
        """Inverse of ``param_at_t`` by bisection inside the bracketing segment."""
        i = int(np.clip(np.searchsorted(self.param, s, side="right") - 1, 0, len(self.t) - 2))
        lo, hi = self.t[i], self.t[i + 1]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self.param_at_t(mid)[0] < s:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def point_at_t(self, t: float) -> np.ndarray:
        xy, _ = self.chart.points(np.array([t]))
        return xy[0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "side", "index", "x", "y", "param"])
            for i, ((x, y), s) in enumerate(zip(self.xy, self.param)):
                w.writerow([self.kind, "+" if self.side > 0 else "-", i, f"{x:.17g}", f"{y:.17g}", f"{s:.17g}"])


def _turn_angles(xy: np.ndarray) -> np.ndarray:
    d = np.diff(xy, axis=0)
    ang = np.arctan2(d[:, 1], d[:, 0])
    return np.abs((np.diff(ang) + np.pi) % (2 * np.pi) - np.pi)


def trace_branch(
    model: MapModel,
    fp: HyperbolicFixedPoint,
    kind: str,
    side: int,
    depth: int,
    h_max: float = 1e-2,
    theta_max: float = 0.1,
    *,
    delta: float = 1e-4,
    per_domain: int = 32,
    max_vertices: int = 2_000_000,
    min_dt: float = 1e-12,
    truncate_at_box: bool = True,
    check_delta: bool = True,
) -> BranchCurve:
    """Trace ``depth`` fundamental domains beyond the seed domain ``t in [0, 1]``.

    Vertices are added at parameter midpoints until every chord is at most
    ``h_max`` long and every turn angle is at most ``theta_max``.  Intervals
    shorter than ``min_dt`` are left alone and counted in ``unresolved``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if check_delta:
        check_linear_regime(model, fp, kind, side, delta)
    chart = make_chart(model, fp, kind, side, delta)
    n0 = (depth + 1) * per_domain + 1
    if n0 > max_vertices:
        raise RefinementBudgetExceeded(f"{kind} branch needs {n0} vertices before refinement, cap is {max_vertices}")
    t = np.linspace(0.0, depth + 1.0, n0)
    xy, esc = chart.points(t)
    truncated = False
    while True:
        if esc.any():
            if not truncate_at_box:
                raise OrbitEscaped(f"{kind} branch {side:+d} left the bounding box {model.bbox}")
            cut = int(np.argmax(esc))
            if cut < 2:
                raise OrbitEscaped(f"{kind} branch {side:+d} leaves the bounding box immediately")
            t, xy, truncated = t[:cut], xy[:cut], True
            esc = np.zeros(len(t), dtype=bool)
        seg = np.hypot(*np.diff(xy, axis=0).T)
        bad = seg > h_max
        turn = _turn_angles(xy) > theta_max
        bad[:-1] |= turn
        bad[1:] |= turn
        small = np.diff(t) < min_dt
        unresolved = int((bad & small).sum())
        bad &= ~small
        if not bad.any():
            break
        if len(t) + int(bad.sum()) > max_vertices:
            raise RefinementBudgetExceeded(f"{kind} branch would exceed {max_vertices} vertices")
        tn = 0.5 * (t[:-1][bad] + t[1:][bad])
        xn, en = chart.points(tn)
        t = np.concatenate([t, tn])
        order = np.argsort(t, kind="stable")
        t = t[order]
        xy = np.concatenate([xy, xn])[order]
        esc = np.concatenate([np.zeros(len(order) - len(tn), dtype=bool), en])[order]
    if truncated:
        logger.warning("%s branch %+d truncated at the bounding box (t <= %.3f)", kind, side, t[-1])
    if unresolved:
        logger.warning("%s branch %+d: %d intervals at the min_dt floor", kind, side, unresolved)
    seg = np.hypot(*np.diff(xy, axis=0).T)
    param = np.concatenate([[np.hypot(*(xy[0] - fp.location))], np.hypot(*(xy[0] - fp.location)) + np.cumsum(seg)])
    return BranchCurve(kind, side, t, xy, param, int(depth), float(delta), chart, truncated, unresolved)


def orbit_shift(kind: str, n: int) -> int:
    """Change of orbit coordinate under ``phi^n`` on a branch of the given kind."""
    return n if kind == UNSTABLE else -n


def project_to_curve(curve: BranchCurve, z, t_hint: float | None = None, iters: int = 8):
    """Closest curve point to ``z``: polyline projection polished by Newton on the chart.

    Returns ``(t, residual)``.
    """
    z = np.asarray(z, dtype=float)
    if t_hint is None:
        a, b = curve.xy[:-1], curve.xy[1:]
        d = b - a
        L2 = np.maximum((d * d).sum(1), 1e-300)
        u = np.clip(((z - a) * d).sum(1) / L2, 0.0, 1.0)
        dist = np.hypot(*(a + u[:, None] * d - z).T)
        i = int(np.argmin(dist))
        t = curve.t[i] + u[i] * (curve.t[i + 1] - curve.t[i])
    else:
        t = float(t_hint)
    lo, hi = curve.t[0], curve.t[-1]
    for _ in range(iters):
        xy, v = curve.chart.points_and_tangents(np.array([t]))
        r = z - xy[0]
        vv = float(v[0] @ v[0])
        if vv == 0.0:
            break
        dt = float(r @ v[0]) / vv
        t = min(max(t + dt, lo), hi)
        if abs(dt) < 1e-15 * max(1.0, abs(t)):
            break
    xy, _ = curve.chart.points(np.array([t]))
    return t, float(np.hypot(*(xy[0] - z)))


def param_of_iterate(curve: BranchCurve, param: float, n: int, model: MapModel | None = None, fp=None, proj_tol: float = 1e-6) -> float:
    """Arclength parameter of ``phi^n`` of the curve point at ``param``.

    The mapped point is projected back onto the traced curve; a residual of
    ``proj_tol`` or more means the image lies beyond the traced portion.
    ``model``/``fp`` default to the curve's own chart.
    """
    if n == 0:
        return float(param)
    model = model or curve.chart.model
    t0 = curve.t_at_param(param)
    z = curve.point_at_t(t0)
    q, p, esc = iterate_points(model, [z[0]], [z[1]], [abs(n)], inverse=n < 0)
    if esc[0]:
        raise ImageBeyondTrace("image left the bounding box")
    w = np.array([q[0], p[0]])
    t_pred = t0 + orbit_shift(curve.kind, n)
    if curve.t[0] <= t_pred <= curve.t[-1]:
        t, res = project_to_curve(curve, w, t_hint=t_pred)
        if res >= proj_tol:
            t, res = project_to_curve(curve, w)
    else:
        t, res = project_to_curve(curve, w)
    if res >= proj_tol:
        raise ImageBeyondTrace(f"projection residual {res:.3g} >= {proj_tol}")
    return float(curve.param_at_t(t)[0])


class BranchOrder:
    """Jump-direction order on one branch, in terms of arclength parameters.

    Unstable: farther from x is larger.  Stable: closer to x is larger.
    """

    def __init__(self, kind: str):
        self.kind = kind

    def less(self, a: float, b: float) -> bool:
        return a < b if self.kind == UNSTABLE else a > b

    def key(self, s: float) -> float:
        return s if self.kind == UNSTABLE else -s


@dataclass(frozen=True)
class Manifold:
    """Both branches of one invariant manifold joined through x.

    The signed coordinate ``w = side * param`` orders the whole curve, with
    x at ``w = 0``.
    """

    kind: str
    plus: BranchCurve
    minus: BranchCurve

    def branch(self, side: int) -> BranchCurve:
        return self.plus if side > 0 else self.minus

    @property
    def fixed_point(self) -> np.ndarray:
        return self.plus.fixed_point

    def arc(self, w_from: float, w_to: float) -> np.ndarray:
        """Interior polyline vertices strictly between signed coordinates, in travel order.

        Includes x when the arc passes through it; endpoints are not included.
        """
        lo, hi = min(w_from, w_to), max(w_from, w_to)
        pieces = []
        mw = -self.minus.param[::-1]
        sel = (mw > lo) & (mw < hi)
        pieces.append(self.minus.xy[::-1][sel])
        if lo < 0.0 < hi:
            pieces.append(self.fixed_point[None, :])
        pw = self.plus.param
        sel = (pw > lo) & (pw < hi)
        pieces.append(self.plus.xy[sel])
        pts = np.concatenate(pieces) if pieces else np.zeros((0, 2))
        return pts if w_to >= w_from else pts[::-1]

    def covers(self, w: float) -> bool:
        b = self.plus if w >= 0 else self.minus
        return abs(w) <= b.param[-1]
