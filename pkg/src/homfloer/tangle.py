"""Orderings, orbits, primary classification and Maslov grading of crossings.

Points on the whole of ``W^u`` (both branches) are located by the signed
coordinate ``wu = side_u * u_param``; likewise ``ws`` on ``W^s``.  The
fixed point sits at ``w = 0`` on both, so open segments ``]p, q[`` are open
intervals in these coordinates even when they run through x.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DifferentBranches, NoIntersection, TurningNotInteger, WindowInsufficient
from .intersect import HomoclinicPoint, match_phi_action
from .maps import MapModel
from .tracer import STABLE, UNSTABLE, BranchCurve, BranchOrder, Manifold

TURNING_TOL = 0.1


def wu(p: HomoclinicPoint) -> float:
    return p.branch_pair[0] * p.u_param


def ws(p: HomoclinicPoint) -> float:
    return p.branch_pair[1] * p.s_param


def between(w, a: float, b: float):
    """Strict betweenness of ``w`` in the open interval spanned by ``a`` and ``b``."""
    lo, hi = (a, b) if a <= b else (b, a)
    return (w > lo) & (w < hi)


@dataclass
class Tangle:
    """Detected crossings of one branch pair with their orbit structure."""

    pair: tuple[int, int]
    points: list[HomoclinicPoint]
    u: BranchCurve = field(repr=False)
    s: BranchCurve = field(repr=False)
    action: list[int | None] = field(repr=False)
    primary: np.ndarray = field(repr=False)
    orbit: np.ndarray = field(repr=False)
    shift: np.ndarray = field(repr=False)
    order_u: BranchOrder = field(default_factory=lambda: BranchOrder(UNSTABLE), repr=False)
    order_s: BranchOrder = field(default_factory=lambda: BranchOrder(STABLE), repr=False)

    @property
    def window(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return (float(self.u.param[0]), float(self.u.param[-1])), (float(self.s.param[0]), float(self.s.param[-1]))

    @property
    def params(self) -> tuple[np.ndarray, np.ndarray]:
        """``(u_param, s_param)`` of all points as arrays."""
        if getattr(self, "_params", None) is None or len(self._params[0]) != len(self.points):
            self._params = (np.array([p.u_param for p in self.points], dtype=float),
                            np.array([p.s_param for p in self.points], dtype=float))
        return self._params

    def index_of(self, p: HomoclinicPoint) -> int:
        for k, q in enumerate(self.points):
            if q is p:
                return k
        for k, q in enumerate(self.points):
            if q.u_param == p.u_param and q.s_param == p.s_param:
                return k
        raise KeyError("point not in tangle")

    def orbit_members(self, k: int) -> list[int]:
        """Indices in the orbit of point ``k``, sorted by shift."""
        idx = np.nonzero(self.orbit == self.orbit[k])[0]
        return [int(i) for i in idx[np.argsort(self.shift[idx])]]

    def find_member(self, k: int, n: int) -> int | None:
        """Detected index of ``phi^n`` of point ``k``, or None."""
        target = self.shift[k] + n
        hit = np.nonzero((self.orbit == self.orbit[k]) & (self.shift == target))[0]
        return int(hit[0]) if len(hit) else None


def primary_mask(points: list[HomoclinicPoint]) -> np.ndarray:
    """Primary flags by a sweep in ``u_param`` with a running minimum of ``s_param``.

    ``p`` is primary iff no other point is closer to x on both branches.
    """
    n = len(points)
    out = np.zeros(n, dtype=bool)
    if n == 0:
        return out
    u = np.array([p.u_param for p in points])
    s = np.array([p.s_param for p in points])
    order = np.lexsort((s, u))
    best = math.inf
    start = 0
    # points sharing a u_param cannot dominate each other, so the running
    # minimum is only updated once a whole group of equal u has been flagged
    while start < n:
        stop = start
        while stop < n and u[order[stop]] == u[order[start]]:
            stop += 1
        group = order[start:stop]
        out[group] = s[group] <= best
        best = min(best, float(s[group].min()))
        start = stop
    return out


def primary_mask_bruteforce(points: list[HomoclinicPoint]) -> np.ndarray:
    """Direct O(n^2) evaluation of the definition; a reference oracle."""
    u = np.array([p.u_param for p in points], dtype=float)
    s = np.array([p.s_param for p in points], dtype=float)
    out = np.ones(len(points), dtype=bool)
    for start in range(0, len(points), 1024):
        sl = slice(start, start + 1024)
        dominated = (u[None, :] < u[sl, None]) & (s[None, :] < s[sl, None])
        out[sl] = ~dominated.any(axis=1)
    return out


def _orbits(points: list[HomoclinicPoint], action: list[int | None]):
    n = len(points)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for k, j in enumerate(action):
        if j is not None:
            parent[find(k)] = find(j)
    roots = np.array([find(k) for k in range(n)], dtype=np.int64)
    tu = np.array([p.t_u for p in points], dtype=float)
    uniq, inv = np.unique(roots, return_inverse=True)
    base = np.full(len(uniq), np.inf)
    np.minimum.at(base, inv, tu)
    # orbit ids ordered by the earliest member along W^u
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.lexsort((uniq, base))] = np.arange(len(uniq))
    orbit = rank[inv]
    shift = np.rint(tu - base[inv]).astype(np.int64)
    return orbit, shift


def build_tangle(model: MapModel, u: BranchCurve, s: BranchCurve, points: list[HomoclinicPoint], match_tol: float = 1e-6) -> Tangle:
    if u.kind != UNSTABLE or s.kind != STABLE:
        raise ValueError("build_tangle needs an unstable and a stable curve")
    pts = sorted(points, key=lambda p: p.u_param)
    action = match_phi_action(pts, model, match_tol)
    orbit, shift = _orbits(pts, action)
    return Tangle((u.side, s.side), pts, u, s, action, primary_mask(pts), orbit, shift)


def _param(p: HomoclinicPoint | None, kind: str) -> float:
    if p is None:
        return 0.0
    return p.u_param if kind == UNSTABLE else p.s_param


def segment_contains(tangle: Tangle, a, b, kind: str, q, open: bool = True) -> bool:
    """Whether ``q`` lies in the segment between ``a`` and ``b`` on one branch.

    ``None`` stands for the fixed point x.  Points must share the branch of
    the given kind, otherwise ``DifferentBranches``.
    """
    axis = 0 if kind == UNSTABLE else 1
    sides = {p.branch_pair[axis] for p in (a, b, q) if p is not None}
    if len(sides) > 1:
        raise DifferentBranches(f"points lie on different {kind} branches")
    pa, pb, pq = _param(a, kind), _param(b, kind), _param(q, kind)
    lo, hi = min(pa, pb), max(pa, pb)
    return lo < pq < hi if open else lo <= pq <= hi


def is_primary(tangle: Tangle, p: HomoclinicPoint) -> bool:
    """No other detected point lies in both ``]p, x[_u`` and ``]p, x[_s``."""
    (u0, u1), (s0, s1) = tangle.window
    if not (p.u_param <= u1 and p.s_param <= s1):
        raise WindowInsufficient("segments ]p, x[ leave the traced window")
    u, s = tangle.params
    return not bool(np.any((u < p.u_param) & (s < p.s_param)))


def first_intersection(points: list[HomoclinicPoint]) -> HomoclinicPoint:
    """Crossing reached first when both branches are traced outward together.

    Orbit coordinates count fundamental domains, so "first" minimizes
    ``max(t_u, t_s)``; ties go to the smaller ``t_u + t_s``.
    """
    if not points:
        raise NoIntersection("no intersection in window")
    return min(points, key=lambda p: (max(p.t_u, p.t_s), p.t_u + p.t_s))


@dataclass
class OrbitClass:
    orbit_id: int
    pair: tuple[int, int]
    representative: HomoclinicPoint
    members_in_window: list[HomoclinicPoint] = field(repr=False)
    maslov: int
    primary: bool
    rep_index: int = -1

    @property
    def label(self) -> str:
        return f"{'+' if self.pair[0] > 0 else '-'}{'+' if self.pair[1] > 0 else '-'}:{self.orbit_id}"


def fundamental_representatives(tangle: Tangle, p: HomoclinicPoint, manifolds: tuple[Manifold, Manifold] | None = None) -> list[OrbitClass]:
    """Primary classes with their member in ``]p, phi(p)]_s`` and ``]p, phi(p)]_u``.

    Raises ``WindowInsufficient`` when ``phi(p)`` was not detected, and
    ``TheoremViolation``-style ``AssertionError`` if an orbit appears twice.
    """
    k = tangle.index_of(p)
    if not tangle.primary[k]:
        raise ValueError("base point must be primary")
    j = tangle.action[k]
    if j is None:
        raise WindowInsufficient("phi(p) lies outside the traced window")
    fp = tangle.points[j]
    out: list[OrbitClass] = []
    seen: set[int] = set()
    for i, q in enumerate(tangle.points):
        if not tangle.primary[i]:
            continue
        if p.u_param < q.u_param <= fp.u_param and fp.s_param <= q.s_param < p.s_param:
            o = int(tangle.orbit[i])
            if o in seen:
                raise AssertionError(f"orbit {o} has two members in ]p, phi(p)]")
            seen.add(o)
            members = [tangle.points[m] for m in tangle.orbit_members(i)]
            mu = maslov_index(manifolds, q) if manifolds is not None else 0
            out.append(OrbitClass(o, tangle.pair, q, members, mu, True, i))
    return out


# ---------------------------------------------------------------- Maslov


def _turning(dirs: np.ndarray) -> float:
    if len(dirs) < 2:
        return 0.0
    ang = np.arctan2(dirs[:, 1], dirs[:, 0])
    d = np.diff(ang)
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return float(d.sum())


def _line_rot_ccw(a, b) -> float:
    """Counterclockwise rotation in (0, pi) taking the line of ``a`` to the line of ``b``."""
    ang = math.atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1]) % math.pi
    return ang


def loop_turning(dirs_u: np.ndarray, dirs_s: np.ndarray) -> float:
    """Total line rotation around ``[p -> q]_u`` then ``[q -> p]_s``, in radians.

    Arcs contribute their tangent turning; at q the line turns counterclockwise
    from ``W^u`` to ``W^s`` and at p clockwise from ``W^s`` back to ``W^u``.
    For perpendicular corners these are the +90 and -90 degree flips.
    """
    total = _turning(dirs_u) + _turning(dirs_s)
    total += _line_rot_ccw(dirs_u[-1], dirs_s[0])
    total += _line_rot_ccw(dirs_s[-1], dirs_u[0]) - math.pi
    return total


def index_from_turning(total: float, tol: float = TURNING_TOL) -> int:
    mu = total / math.pi
    r = round(mu)
    if abs(mu - r) >= tol:
        raise TurningNotInteger(f"turning/pi = {mu:.4f} is not near an integer")
    return int(r)


def _chords(pts: np.ndarray) -> np.ndarray:
    if len(pts) < 2:
        return np.zeros((0, 2))
    d = np.diff(pts, axis=0)
    n = np.hypot(d[:, 0], d[:, 1])
    return d[n > 0] / n[n > 0, None]


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.hypot(*v)


def arc_directions(man: Manifold, w_from: float, w_to: float, t_from, t_to) -> np.ndarray:
    """Travel directions along ``man`` from ``w_from`` to ``w_to``.

    ``t_from``/``t_to`` are unit tangents at the two ends, already oriented in
    the direction of travel.  Only chords between interior vertices are used,
    so a crossing sitting next to a vertex does not produce a degenerate chord.
    """
    inner = man.arc(w_from, w_to)
    return np.vstack([_unit(t_from)[None, :], _chords(inner), _unit(t_to)[None, :]])


def _travel_tangent(p: HomoclinicPoint, kind: str, forward: float) -> np.ndarray:
    side = p.branch_pair[0] if kind == UNSTABLE else p.branch_pair[1]
    t = p.tangent_u if kind == UNSTABLE else p.tangent_s
    return forward * side * _unit(t)


def maslov_turning(manifolds: tuple[Manifold, Manifold], p: HomoclinicPoint, q: HomoclinicPoint | None = None) -> float:
    """Turning of the loop ``[p -> q]_u [q -> p]_s``; ``q=None`` means q = x."""
    mu_, ms_ = manifolds
    if not (mu_.covers(wu(p)) and ms_.covers(ws(p)) and (q is None or (mu_.covers(wu(q)) and ms_.covers(ws(q))))):
        raise WindowInsufficient("loop leaves the traced window")
    eu = mu_.plus.chart.fp.unstable_dir
    es = mu_.plus.chart.fp.stable_dir
    a_u, a_s = wu(p), ws(p)
    b_u = 0.0 if q is None else wu(q)
    b_s = 0.0 if q is None else ws(q)
    du = 1.0 if b_u > a_u else -1.0
    ds = 1.0 if a_s > b_s else -1.0
    tu_p = _travel_tangent(p, UNSTABLE, du)
    ts_p = _travel_tangent(p, STABLE, ds)
    if q is None:
        tu_q = du * eu
        ts_q = ds * es
    else:
        tu_q = _travel_tangent(q, UNSTABLE, du)
        ts_q = _travel_tangent(q, STABLE, ds)
    dirs_u = arc_directions(mu_, a_u, b_u, tu_p, tu_q)
    dirs_s = arc_directions(ms_, b_s, a_s, ts_q, ts_p)
    return loop_turning(dirs_u, dirs_s)


def maslov_index(manifolds: tuple[Manifold, Manifold], p: HomoclinicPoint) -> int:
    """Grading ``mu(p) = mu(p, x)`` from the loop through p and x."""
    return index_from_turning(maslov_turning(manifolds, p))


def relative_index(mu_p: int, mu_q: int) -> int:
    """``mu(p, q) = mu(p) - mu(q)``."""
    return mu_p - mu_q


def classes_to_csv(classes: list[OrbitClass], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["orbit_id", "rep_x", "rep_y", "u_param", "s_param", "maslov", "primary"])
        for c in classes:
            r = c.representative
            w.writerow([c.label, f"{r.position[0]:.17g}", f"{r.position[1]:.17g}", f"{r.u_param:.17g}", f"{r.s_param:.17g}", c.maslov, int(c.primary)])
