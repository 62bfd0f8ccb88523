"""Bigons, signs and the graded boundary operator between primary classes.

A bigon from p to q is recognised combinatorially: index difference one, no
homoclinic point (x included) in both open segments, and a simple boundary
loop ``[p -> q]_u [q -> p]_s`` whose line-rotation index is one, which also
forces the counterclockwise, convex-cornered orientation of the disc.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BoundViolated, DSquaredNonzero, TurningNotInteger, WindowInsufficient
from .intersect import HomoclinicPoint, pair_label
from .tangle import OrbitClass, Tangle, between, index_from_turning, maslov_turning, ws, wu
from .tracer import STABLE, UNSTABLE, Manifold

logger = logging.getLogger(__name__)

DEGREES = (-3, -2, -1, 1, 2, 3)
N_SCAN = 5


@dataclass
class TangleSet:
    """All branch-pair tangles of one run plus the two joined manifolds."""

    manifolds: tuple[Manifold, Manifold]
    tangles: dict[tuple[int, int], Tangle]
    extra_points: list[HomoclinicPoint] = field(default_factory=list)

    def __post_init__(self):
        pts = [p for t in self.tangles.values() for p in t.points] + list(self.extra_points)
        self._wu = np.array([wu(p) for p in pts], dtype=float)
        self._ws = np.array([ws(p) for p in pts], dtype=float)

    def points_between(self, p: HomoclinicPoint, q: HomoclinicPoint) -> int:
        """Detected homoclinic points in ``]p, q[_u`` and ``]p, q[_s``; x counts too."""
        a_u, b_u, a_s, b_s = wu(p), wu(q), ws(p), ws(q)
        n = int(np.count_nonzero(between(self._wu, a_u, b_u) & between(self._ws, a_s, b_s)))
        if a_u * b_u < 0 and a_s * b_s < 0:
            n += 1
        return n

    def member(self, cls: OrbitClass, n: int) -> HomoclinicPoint | None:
        t = self.tangles[cls.pair]
        j = t.find_member(cls.rep_index, n)
        return None if j is None else t.points[j]

    def covers(self, pair, t_u: float, t_s: float) -> bool:
        t = self.tangles.get(pair)
        if t is None:
            return False
        m = t.u.seed_delta
        return t.u.t[0] < t_u < t.u.t[-1] - 1e-3 and t.s.t[0] < t_s < t.s.t[-1] - 1e-3 and m > 0


@dataclass(frozen=True)
class BigonQuery:
    p: HomoclinicPoint = field(repr=False)
    q: HomoclinicPoint = field(repr=False)
    exists: bool
    sign: int
    comparison_branch: str
    case: int
    loop_index: int | None
    in_place_window: bool
    reason: str


def segment_case(p: HomoclinicPoint, q: HomoclinicPoint) -> int:
    """Position case of x relative to the open segments: 1 neither, 2 only u, 3 only s, 4 both."""
    xu = wu(p) * wu(q) < 0
    xs = ws(p) * ws(q) < 0
    return {(False, False): 1, (True, False): 2, (False, True): 3, (True, True): 4}[(xu, xs)]


def in_place_window(p: HomoclinicPoint, q: HomoclinicPoint) -> bool:
    """Whether q sits in the one-iterate windows around p that its case prescribes."""
    case = segment_case(p, q)
    su = p.branch_pair[0] == q.branch_pair[0] and abs(q.t_u - p.t_u) < 1.0
    ss = p.branch_pair[1] == q.branch_pair[1] and abs(q.t_s - p.t_s) < 1.0
    return {1: su and ss, 2: ss, 3: su, 4: False}[case]


def sign_m(p: HomoclinicPoint, q: HomoclinicPoint) -> tuple[int, str]:
    """Orientation sign of the p -> q direction against the jump direction.

    Compared on the unstable segment unless it passes through x, then on the
    stable one.
    """
    if wu(p) * wu(q) > 0:
        return (1 if q.t_u > p.t_u else -1), UNSTABLE
    return (1 if q.t_s < p.t_s else -1), STABLE


def _arc_polyline(man: Manifold, a, b, w_a: float, w_b: float) -> np.ndarray:
    return np.vstack([np.asarray(a)[None, :], man.arc(w_a, w_b), np.asarray(b)[None, :]])


def loop_is_simple(tset: TangleSet, p: HomoclinicPoint, q: HomoclinicPoint) -> bool:
    """No crossing between ``[p -> q]_u`` and ``[q -> p]_s`` away from the shared corners."""
    mu_, ms_ = tset.manifolds
    U = _arc_polyline(mu_, p.position, q.position, wu(p), wu(q))
    S = _arc_polyline(ms_, q.position, p.position, ws(q), ws(p))
    i, j = kernels.segment_pairs(U[:, 0], U[:, 1], S[:, 0], S[:, 1])
    nu, ns = len(U) - 2, len(S) - 2
    for a, b in zip(i.tolist(), j.tolist()):
        if (a == 0 and b == ns) or (a == nu and b == 0):
            continue
        return False
    return True


def bigon_exists(tset: TangleSet, p: HomoclinicPoint, q: HomoclinicPoint, mu_p: int, mu_q: int) -> BigonQuery:
    """Operational bigon test; see the module docstring."""
    case = segment_case(p, q)
    place = in_place_window(p, q)
    branch = UNSTABLE if case in (1, 3) else STABLE
    if mu_p - mu_q != 1:
        return BigonQuery(p, q, False, 0, branch, case, None, place, "index")
    if tset.points_between(p, q):
        return BigonQuery(p, q, False, 0, branch, case, None, place, "occupied")
    try:
        lidx = index_from_turning(maslov_turning(tset.manifolds, p, q))
    except TurningNotInteger:
        raise
    if lidx != 1:
        return BigonQuery(p, q, False, 0, branch, case, lidx, place, "loop-index")
    if not loop_is_simple(tset, p, q):
        return BigonQuery(p, q, False, 0, branch, case, lidx, place, "not-simple")
    sgn, branch = sign_m(p, q)
    return BigonQuery(p, q, True, sgn, branch, case, lidx, place, "ok")


def shared_branches(P: OrbitClass, Q: OrbitClass) -> tuple[bool, bool]:
    return P.pair[0] == Q.pair[0], P.pair[1] == Q.pair[1]


def _member_shifts(P: OrbitClass, Q: OrbitClass, reach: float) -> list[int]:
    """Shifts n with ``phi^n(rep Q)`` within ``reach`` iterates of rep P on a shared branch."""
    p, q = P.representative, Q.representative
    su, ss = shared_branches(P, Q)
    ns: set[int] = set()
    if su:
        d = p.t_u - q.t_u
        ns.update(n for n in range(int(np.floor(d - reach)), int(np.ceil(d + reach)) + 1) if abs(q.t_u + n - p.t_u) < reach)
    if ss:
        d = q.t_s - p.t_s
        ns.update(n for n in range(int(np.floor(d - reach)), int(np.ceil(d + reach)) + 1) if abs(q.t_s - n - p.t_s) < reach)
    return sorted(ns)


def _require_member(tset: TangleSet, cls: OrbitClass, n: int) -> HomoclinicPoint:
    m = tset.member(cls, n)
    if m is not None:
        return m
    r = cls.representative
    t_u, t_s = r.t_u + n, r.t_s - n
    if tset.covers(cls.pair, t_u, t_s):
        raise WindowInsufficient(f"orbit member {cls.label}{n:+d} at t=({t_u:.3f}, {t_s:.3f}) lies in the window but was not detected")
    raise WindowInsufficient(f"orbit member {cls.label}{n:+d} at t=({t_u:.3f}, {t_s:.3f}) is outside the traced window")


@dataclass
class CoefficientResult:
    value: int
    terms: dict[int, BigonQuery]


def orbit_coefficient(tset: TangleSet, P: OrbitClass, Q: OrbitClass) -> CoefficientResult:
    """``m(<P>, <Q>)`` summed over the members of Q allowed by the one-iterate windows."""
    terms: dict[int, BigonQuery] = {}
    if P.maslov - Q.maslov != 1:
        return CoefficientResult(0, terms)
    for n in _member_shifts(P, Q, 1.0):
        q = _require_member(tset, Q, n)
        bq = bigon_exists(tset, P.representative, q, P.maslov, Q.maslov)
        if bq.exists:
            terms[n] = bq
    value = sum(b.sign for b in terms.values())
    found = sorted(terms)
    if len(found) > 2 or (len(found) == 2 and found[1] - found[0] != 1):
        raise BoundViolated(f"bigons {P.label} -> {Q.label} at shifts {found}")
    if len(found) == 2 and terms[found[0]].sign == terms[found[1]].sign:
        raise BoundViolated(f"bigons {P.label} -> {Q.label} at adjacent shifts have equal signs")
    return CoefficientResult(value, terms)


@dataclass
class ScanRecord:
    source: str
    target: str
    shifts: dict[int, int]
    production: int
    scan: int
    violations: list[str]


def wide_scan(tset: TangleSet, P: OrbitClass, Q: OrbitClass, production: CoefficientResult, n_scan: int = N_SCAN) -> ScanRecord:
    """Bigon search over ``phi^n(q)``, ``|n - n0| <= n_scan``, as an oracle for the production path.

    Each test is evaluated on the shifted pair ``(phi^-j p, phi^(n-j) q)``,
    with ``j`` chosen to keep both points central in the traced window.
    """
    violations: list[str] = []
    su, ss = shared_branches(P, Q)
    p, q = P.representative, Q.representative
    if su:
        n0 = int(round(p.t_u - q.t_u))
    elif ss:
        n0 = int(round(q.t_s - p.t_s))
    else:
        return ScanRecord(P.label, Q.label, {}, production.value, 0, violations)
    found: dict[int, BigonQuery] = {}
    for n in range(n0 - n_scan, n0 + n_scan + 1):
        qn_t = (q.t_u + n, q.t_s - n)
        j = int(round((max(p.t_u, qn_t[0]) - max(p.t_s, qn_t[1])) / 2.0))
        pp = tset.member(P, -j)
        qq = tset.member(Q, n - j)
        if pp is None or qq is None:
            raise WindowInsufficient(f"wide scan {P.label} -> {Q.label} shift {n}: shifted pair (j={j}) not in window")
        bq = bigon_exists(tset, pp, qq, P.maslov, Q.maslov)
        if bq.exists:
            found[n] = bq
            if not bq.in_place_window:
                violations.append(f"bigon at shift {n} outside its one-iterate window (case {bq.case})")
            if bq.case == 4:
                violations.append(f"bigon at shift {n} with x in both segments")
    ns = sorted(found)
    for a in ns:
        for b in ns:
            if abs(a - b) >= 2:
                violations.append(f"bigons at shifts {a} and {b} are {abs(a - b)} iterates apart")
    if len(ns) == 2 and found[ns[0]].sign == found[ns[1]].sign:
        violations.append(f"bigons at shifts {ns} have equal signs")
    scan_value = sum(b.sign for b in found.values())
    if set(production.terms) - set(found):
        violations.append(f"production shifts {sorted(production.terms)} not confirmed by scan {ns}")
    if scan_value != production.value:
        violations.append(f"coefficient {production.value} differs from scan value {scan_value}")
    return ScanRecord(P.label, Q.label, {n: b.sign for n, b in found.items()}, production.value, scan_value, sorted(set(violations)))


@dataclass
class ChainComplexData:
    generators: dict[int, list[OrbitClass]]
    boundary: dict[int, np.ndarray]
    bigons: list[BigonQuery] = field(default_factory=list, repr=False)
    scan: list[ScanRecord] = field(default_factory=list, repr=False)

    @property
    def ranks(self) -> dict[int, int]:
        return {k: len(self.generators.get(k, [])) for k in DEGREES}

    def matrix(self, k: int) -> np.ndarray:
        """``d_k : C_k -> C_{k-1}`` as a (rank C_{k-1}) x (rank C_k) integer array."""
        if k in self.boundary:
            return self.boundary[k]
        return np.zeros((self.ranks.get(k - 1, 0), self.ranks.get(k, 0)), dtype=object)

    def to_json(self) -> dict:
        return {
            "generators": {str(k): [c.label for c in self.generators.get(k, [])] for k in DEGREES},
            "boundary": {str(k): [[int(v) for v in row] for row in self.matrix(k)] for k in (*DEGREES, 0) if self.matrix(k).size or k in DEGREES},
            "shapes": {str(k): list(self.matrix(k).shape) for k in DEGREES},
        }

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)


def bucket(classes: list[OrbitClass]) -> dict[int, list[OrbitClass]]:
    gens: dict[int, list[OrbitClass]] = {k: [] for k in DEGREES}
    for c in classes:
        if c.maslov not in gens:
            raise BoundViolated(f"class {c.label} has Maslov index {c.maslov} outside +-1, +-2, +-3")
        gens[c.maslov].append(c)
    for k in gens:
        gens[k].sort(key=lambda c: (c.pair[0] < 0, c.pair[1] < 0, c.representative.t_u))
    return gens


def check_d_squared(cx: ChainComplexData) -> None:
    for k in DEGREES:
        a = cx.matrix(k)
        b = cx.matrix(k - 1)
        if a.size == 0 or b.size == 0:
            continue
        prod = b.dot(a)
        if np.any(prod != 0):
            r, c = map(int, np.argwhere(prod != 0)[0])
            src = cx.generators[k][c].label
            dst = cx.generators[k - 2][r].label
            raise DSquaredNonzero(f"d-squared nonzero: d_{k - 1} d_{k}: entry {prod[r, c]} from {src} to {dst}")


@dataclass
class Coefficient:
    """One nonzero or zero entry ``m(<P>, <Q>)`` of a boundary matrix."""

    source: str
    target: str
    degree: int
    value: int
    shifts: dict[int, int]

    def to_json(self) -> dict:
        return {"source": self.source, "target": self.target, "degree": self.degree,
                "value": self.value, "shifts": {str(n): s for n, s in sorted(self.shifts.items())}}

    @classmethod
    def from_json(cls, d: dict) -> "Coefficient":
        return cls(d["source"], d["target"], int(d["degree"]), int(d["value"]),
                   {int(n): int(s) for n, s in d["shifts"].items()})


def bigon_coefficients(tset: TangleSet, gens: dict[int, list[OrbitClass]], wide: bool = False, n_scan: int = N_SCAN):
    """Orbit coefficients for every generator pair of adjacent degree.

    Returns ``(coefficients, bigons, scans)``; the scan list is empty unless
    ``wide`` is set.
    """
    coeffs: list[Coefficient] = []
    bigons: list[BigonQuery] = []
    scans: list[ScanRecord] = []
    for k in DEGREES:
        for P in gens.get(k, []):
            for Q in gens.get(k - 1, []):
                res = orbit_coefficient(tset, P, Q)
                coeffs.append(Coefficient(P.label, Q.label, k, res.value, {n: b.sign for n, b in res.terms.items()}))
                bigons.extend(res.terms.values())
                if wide and any(shared_branches(P, Q)):
                    scans.append(wide_scan(tset, P, Q, res, n_scan))
    return coeffs, bigons, scans


def assemble_boundaries(labels: dict[int, list[str]], coeffs: list[Coefficient]) -> dict[int, np.ndarray]:
    """Dense boundary matrices from coefficient records, keyed by source degree."""
    boundary: dict[int, np.ndarray] = {}
    pos = {k: {lab: i for i, lab in enumerate(labels.get(k, []))} for k in (*DEGREES, 0, -4)}
    for k in DEGREES:
        boundary[k] = np.zeros((len(labels.get(k - 1, [])), len(labels.get(k, []))), dtype=object)
    for c in coeffs:
        boundary[c.degree][pos[c.degree - 1][c.target], pos[c.degree][c.source]] = c.value
    for k, mat in boundary.items():
        if mat.size and np.any(np.abs(mat.astype(np.int64)) > 1):
            raise BoundViolated(f"d_{k} has an entry outside -1, 0, 1")
    return boundary


def build_complex(tset: TangleSet, classes: list[OrbitClass], wide: bool = False, n_scan: int = N_SCAN) -> ChainComplexData:
    """Generators by Maslov index and boundary matrices from orbit coefficients."""
    gens = bucket(classes)
    coeffs, bigons, scans = bigon_coefficients(tset, gens, wide, n_scan)
    boundary = assemble_boundaries({k: [c.label for c in v] for k, v in gens.items()}, coeffs)
    cx = ChainComplexData(gens, boundary, bigons, scans)
    check_d_squared(cx)
    return cx


def describe_pair(P: OrbitClass) -> str:
    return pair_label(P.pair)
