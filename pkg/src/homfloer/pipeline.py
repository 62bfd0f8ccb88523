"""Seven-step orchestration from a run configuration to verified homology.

Step 0 prepares the model and fixed point. Steps 1 to 7 follow the algorithm:
first intersections, intersections in a fundamental window, primary
filtering, Maslov indices, bigons and signs, boundary matrices, homology and
rank inequalities. Every step writes its output under ``<out>/steps`` before
the next one starts; steps 6 and 7 read their input back from those files.
"""
from __future__ import annotations

import logging
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels, serialize
from .complex import (
    ChainComplexData,
    Coefficient,
    ScanRecord,
    TangleSet,
    assemble_boundaries,
    bigon_coefficients,
    bucket,
    check_d_squared,
)
from .config import RunConfig
from .errors import (
    ConfigError,
    HomFloerError,
    NoIntersection,
    TheoremViolation,
    TorsionFound,
    InequalityFailed,
    WindowInsufficient,
)
from .homology import DEGREES, HomologyResult, IntegerComplex, MorseReport, homology_json, homology_of, verify_morse_inequalities
from .intersect import HomoclinicPoint, detect, pair_label
from .maps import HyperbolicFixedPoint, MapModel, find_fixed_point, model_from_name, validate_symplectic
from .tangle import OrbitClass, Tangle, build_tangle, first_intersection, fundamental_representatives, is_primary, maslov_index
from .tracer import STABLE, UNSTABLE, BranchCurve, Manifold, trace_branch

logger = logging.getLogger(__name__)

PAIRS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
STEP_NAMES = {
    0: "model and fixed point",
    1: "first intersections",
    2: "intersections in the fundamental window",
    3: "primary filter",
    4: "Maslov indices",
    5: "bigons and signs",
    6: "boundary matrices",
    7: "homology and rank inequalities",
}
SEARCH_START = 6
SEARCH_STRIDE = 4
DET_TOL = 1e-9
RESIDUAL_TOL = 1e-10


class StepFailure(HomFloerError):
    """Wraps a module error with the step where it happened; keeps the exit code."""

    def __init__(self, step: int, err: HomFloerError):
        self.step = step
        self.error = err
        self.exit_code = err.exit_code
        kind = {2: "config error", 3: "window insufficient", 4: "theorem violation"}.get(err.exit_code, "error")
        super().__init__(f"{kind} at step {step} ({STEP_NAMES[step]}): {type(err).__name__}: {err}")


@contextmanager
def _step(n: int, timing: dict):
    t0 = time.perf_counter()
    try:
        yield
    except StepFailure:
        raise
    except HomFloerError as e:
        raise StepFailure(n, e) from e
    finally:
        timing[str(n)] = time.perf_counter() - t0


class _Collect(logging.Handler):
    def __init__(self, sink: list[str]):
        super().__init__(logging.WARNING)
        self.sink = sink

    def emit(self, record):
        self.sink.append(record.getMessage())


@dataclass
class RunReport:
    model: str
    params: dict[str, float]
    fixed_point: list[float]
    eigenvalue: float
    pair_points: dict[str, int]
    pair_primary_points: dict[str, int]
    pair_classes: dict[str, int]
    first_intersections: dict[str, dict]
    n_primary_classes: int
    c_k: dict[int, int]
    h_k: dict[int, int]
    torsion: dict[int, list[int]]
    inequalities_passed: bool
    d_squared_zero: bool
    geometry: dict
    oracle: dict
    timing: dict[str, float]
    warnings: list[str]
    backend: str
    extents: dict[str, float]
    stability: dict | None = None

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "params": self.params,
            "fixed_point": self.fixed_point,
            "eigenvalue": self.eigenvalue,
            "pair_points": self.pair_points,
            "pair_primary_points": self.pair_primary_points,
            "pair_classes": self.pair_classes,
            "first_intersections": self.first_intersections,
            "n_primary_classes": self.n_primary_classes,
            "c_k": {str(k): v for k, v in self.c_k.items()},
            "sum_c_k": sum(self.c_k.values()),
            "h_k": {str(k): v for k, v in self.h_k.items()},
            "torsion": {str(k): v for k, v in self.torsion.items()},
            "inequalities_passed": self.inequalities_passed,
            "d_squared_zero": self.d_squared_zero,
            "geometry": self.geometry,
            "oracle": self.oracle,
            "timing": self.timing,
            "warnings": self.warnings,
            "backend": self.backend,
            "extents": self.extents,
            "stability": self.stability,
        }


@dataclass
class PipelineResult:
    config: RunConfig
    model: MapModel
    fixed_point: HyperbolicFixedPoint
    curves: dict[tuple[str, int], BranchCurve] = field(default_factory=dict, repr=False)
    points: dict[tuple[int, int], list[HomoclinicPoint]] = field(default_factory=dict, repr=False)
    first: dict[tuple[int, int], HomoclinicPoint] = field(default_factory=dict, repr=False)
    tangles: dict[tuple[int, int], Tangle] = field(default_factory=dict, repr=False)
    classes: list[OrbitClass] = field(default_factory=list, repr=False)
    tangle_set: TangleSet | None = field(default=None, repr=False)
    coefficients: list[Coefficient] = field(default_factory=list, repr=False)
    scans: list[ScanRecord] = field(default_factory=list, repr=False)
    complex: ChainComplexData | None = field(default=None, repr=False)
    homology: HomologyResult | None = None
    morse: MorseReport | None = field(default=None, repr=False)
    report: RunReport | None = None
    warnings: list[str] = field(default_factory=list)
    timing: dict[str, float] = field(default_factory=dict)
    extents: dict[str, float] = field(default_factory=dict)
    symplectic_deviation: float = float("nan")

    @property
    def manifolds(self) -> tuple[Manifold, Manifold]:
        c = self.curves
        return Manifold(UNSTABLE, c[(UNSTABLE, 1)], c[(UNSTABLE, -1)]), Manifold(STABLE, c[(STABLE, 1)], c[(STABLE, -1)])

    @property
    def all_points(self) -> list[HomoclinicPoint]:
        return [p for pair in PAIRS for p in self.points.get(pair, [])]


def _branch_label(kind: str, side: int) -> str:
    return f"{kind}{'+' if side > 0 else '-'}"


def _point_json(p: HomoclinicPoint) -> dict:
    return {
        "pair": pair_label(p.branch_pair),
        "x": float(p.position[0]),
        "y": float(p.position[1]),
        "u_param": float(p.u_param),
        "s_param": float(p.s_param),
        "t_u": float(p.t_u),
        "t_s": float(p.t_s),
        "sign": int(p.crossing_sign),
        "angle": float(p.angle),
        "residual": float(p.residual),
    }


def _class_json(c: OrbitClass) -> dict:
    r = c.representative
    return {"label": c.label, "orbit_id": int(c.orbit_id), "pair": pair_label(c.pair), "maslov": int(c.maslov),
            "primary": bool(c.primary), "members_in_window": len(c.members_in_window),
            "rep": _point_json(r)}


def _trace(model, fp, cfg: RunConfig, kind: str, side: int, upto: int) -> BranchCurve:
    return trace_branch(model, fp, kind, side, max(1, upto - 1), cfg.h_max, cfg.theta_max, delta=cfg.delta)


def run_pipeline(cfg: RunConfig, out_dir=None, upto: int = 7, stability: bool | None = None) -> PipelineResult:
    """Run steps 0 to ``upto``; raise ``StepFailure`` on the first hard error."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    steps = out / "steps"
    steps.mkdir(parents=True, exist_ok=True)
    warnings: list[str] = []
    handler = _Collect(warnings)
    pkg_logger = logging.getLogger("homfloer")
    pkg_logger.addHandler(handler)
    old_level = pkg_logger.level
    if pkg_logger.getEffectiveLevel() > logging.WARNING:
        pkg_logger.setLevel(logging.WARNING)
    timing: dict[str, float] = {}
    try:
        res = _run(cfg, steps, upto, warnings, timing)
    finally:
        pkg_logger.removeHandler(handler)
        pkg_logger.setLevel(old_level)
    res.warnings = list(dict.fromkeys(warnings))
    res.timing = timing
    if upto >= 7:
        do_stab = cfg.stability_check if stability is None else stability
        stab = None
        if do_stab:
            stab = stability_check(cfg, res, out / "stability")
        res.report = _make_report(res, stab)
    return res


def _run(cfg: RunConfig, steps: Path, upto: int, warnings: list[str], timing: dict) -> PipelineResult:
    # step 0
    with _step(0, timing):
        try:
            model = model_from_name(cfg.model, cfg.params, bbox=cfg.bbox)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"model {cfg.model!r} with params {cfg.params}: {e}") from None
        fp = find_fixed_point(model, cfg.fixed_point_guess)
        sym = validate_symplectic(model, 1000)
        if sym.max_deviation >= DET_TOL:
            raise ConfigError(f"model is not area-preserving: |det J - 1| = {sym.max_deviation:.3g}")
        res = PipelineResult(cfg, model, fp, symplectic_deviation=sym.max_deviation)
        serialize.dump({
            "model": model.name, "params": dict(model.params), "bbox": list(model.bbox),
            "fixed_point": [float(v) for v in fp.location], "eigenvalues": [float(v) for v in fp.eigenvalues],
            "unstable_dir": [float(v) for v in fp.unstable_dir], "stable_dir": [float(v) for v in fp.stable_dir],
            "det_deviation": sym.max_deviation, "backend": kernels.BACKEND,
        }, steps / "step0_model.json")
    if upto < 1:
        return res

    # step 1: first intersection of every branch pair, tracing outward level by level
    with _step(1, timing):
        level = min(SEARCH_START, cfg.search_depth)
        while True:
            curves = {(k, s): _trace(model, fp, cfg, k, s, level + 1) for k in (UNSTABLE, STABLE) for s in (1, -1)}
            for pair in PAIRS:
                if pair in res.first:
                    continue
                rep = detect(model, curves[(UNSTABLE, pair[0])], curves[(STABLE, pair[1])], cfg.alpha_min)
                if rep.points:
                    res.first[pair] = first_intersection(rep.points)
            if len(res.first) == len(PAIRS) or level >= cfg.search_depth:
                break
            level = min(level + SEARCH_STRIDE, cfg.search_depth)
        for pair in PAIRS:
            if pair not in res.first:
                logger.warning("branch pair %s has no intersection up to orbit coordinate %d; it contributes no generators",
                               pair_label(pair), level + 1)
        if not res.first:
            raise NoIntersection(f"no branch pair intersects up to orbit coordinate {level + 1}; raise search_depth")
        res.curves = curves
        serialize.dump({pair_label(p): _point_json(q) for p, q in res.first.items()} | {"search_level": level + 1},
                       steps / "step1_first_intersections.json")
    if upto < 2:
        return res

    # step 2: retrace each branch to its extent and collect every crossing
    with _step(2, timing):
        need: dict[tuple[str, int], int] = {}
        for pair, p0 in res.first.items():
            lvl = math.ceil(max(p0.t_u, p0.t_s)) + cfg.depth
            for key in ((UNSTABLE, pair[0]), (STABLE, pair[1])):
                need[key] = max(need.get(key, 0), lvl)
        for key, upto_t in need.items():
            res.curves[key] = _trace(model, fp, cfg, key[0], key[1], upto_t)
        res.extents = {_branch_label(*k): float(c.t[-1]) for k, c in sorted(res.curves.items())}
        step2 = {"extents": res.extents, "pairs": {}}
        for pair, p0 in res.first.items():
            u, s = res.curves[(UNSTABLE, pair[0])], res.curves[(STABLE, pair[1])]
            rep = detect(model, u, s, cfg.alpha_min)
            if rep.near_tangent:
                logger.warning("pair %s: %d near-tangent crossings rejected (angle < alpha_min)", pair_label(pair), len(rep.near_tangent))
            if rep.low_accuracy:
                logger.warning("pair %s: %d crossings refined by subdivision only", pair_label(pair), rep.low_accuracy)
            # the step-1 point must be found again in the longer trace
            match = [q for q in rep.points if abs(q.t_u - p0.t_u) < 1e-6 and abs(q.t_s - p0.t_s) < 1e-6]
            if not match:
                raise WindowInsufficient(f"pair {pair_label(pair)}: first intersection lost after retracing")
            res.first[pair] = match[0]
            res.points[pair] = rep.points
            p0 = match[0]
            inside = [q for q in rep.points if p0.t_u < q.t_u < p0.t_u + 1 and p0.t_s - 1 < q.t_s < p0.t_s]
            if p0.t_u + 1 >= u.t[-1] or p0.t_s >= s.t[-1]:
                raise WindowInsufficient(f"pair {pair_label(pair)}: ]p, phi(p)[ is not covered by the trace")
            step2["pairs"][pair_label(pair)] = {
                "n_points": len(rep.points),
                "n_in_fundamental_window": len(inside),
                "truncated": len(rep.truncated),
                "near_tangent": len(rep.near_tangent),
                "in_fundamental_window": [_point_json(q) for q in inside],
            }
        serialize.dump(step2, steps / "step2_intersections.json")
    if upto < 3:
        return res

    # step 3: orbit structure, primary flags and one representative per primary orbit
    with _step(3, timing):
        step3 = {}
        for pair, pts in res.points.items():
            t = build_tangle(model, res.curves[(UNSTABLE, pair[0])], res.curves[(STABLE, pair[1])], pts, cfg.proj_tol)
            res.tangles[pair] = t
            p0 = res.first[pair]
            if not is_primary(t, p0):
                raise TheoremViolation(f"first intersection of pair {pair_label(pair)} is not primary")
            cls = fundamental_representatives(t, p0)
            res.classes.extend(cls)
            step3[pair_label(pair)] = {
                "n_primary_points": int(np.count_nonzero(t.primary)),
                "classes": [_class_json(c) | {"maslov": None} for c in cls],
            }
        serialize.dump(step3, steps / "step3_primary.json")
    if upto < 4:
        return res

    # step 4: Maslov index of each representative, checked on neighbouring orbit members
    with _step(4, timing):
        man = res.manifolds
        res.tangle_set = TangleSet(man, res.tangles)
        invariance = []
        for c in res.classes:
            c.maslov = maslov_index(man, c.representative)
            for n in (-1, 1):
                m = res.tangle_set.member(c, n)
                if m is None:
                    continue
                mu = maslov_index(man, m)
                invariance.append({"class": c.label, "shift": n, "maslov": mu, "equal": mu == c.maslov})
                if mu != c.maslov:
                    raise TheoremViolation(f"Maslov index of {c.label} changes under phi^{n}: {c.maslov} vs {mu}")
        serialize.dump({"classes": [_class_json(c) for c in res.classes], "invariance": invariance},
                       steps / "step4_maslov.json")
    if upto < 5:
        return res

    # step 5: bigon existence and signs for generator pairs of adjacent degree
    with _step(5, timing):
        gens = bucket(res.classes)
        coeffs, bigons, scans = bigon_coefficients(res.tangle_set, gens, cfg.wide_scan, cfg.n_scan)
        res.coefficients, res.scans = coeffs, scans
        bad = [f"{s.source} -> {s.target}: {v}" for s in scans for v in s.violations]
        serialize.dump({
            "generators": {str(k): [c.label for c in gens[k]] for k in DEGREES},
            "coefficients": [c.to_json() for c in coeffs],
            "bigons": [{"p": _point_json(b.p), "q": _point_json(b.q), "sign": b.sign, "case": b.case,
                        "comparison_branch": b.comparison_branch, "in_place_window": b.in_place_window} for b in bigons],
            "scan": [{"source": s.source, "target": s.target, "shifts": {str(n): v for n, v in sorted(s.shifts.items())},
                      "production": s.production, "scan": s.scan, "violations": s.violations} for s in scans],
        }, steps / "step5_bigons.json")
        outside = [b for b in bigons if not b.in_place_window or b.case == 4]
        if outside:
            raise TheoremViolation(f"{len(outside)} bigons violate the one-iterate place windows")
        if bad:
            raise TheoremViolation("wide scan disagrees with the sharp bound: " + "; ".join(bad[:5]))
    if upto < 6:
        return res

    # step 6: dense boundary matrices, rebuilt from the serialized coefficients
    with _step(6, timing):
        labels, cx_int = load_complex(steps / "step5_bigons.json")
        res.complex = ChainComplexData(gens, cx_int.boundary, bigons, scans)
        check_d_squared(res.complex)
        serialize.dump(res.complex.to_json(), steps / "step6_complex.json")
    if upto < 7:
        return res

    # step 7: homology, torsion and rank inequalities from the serialized matrices
    with _step(7, timing):
        _, cx_int = load_complex(steps / "step5_bigons.json")
        h = homology_of(cx_int)
        res.homology = h
        res.morse = verify_morse_inequalities(cx_int.ranks, h, len(res.classes))
        serialize.dump(homology_json(cx_int.ranks, h, res.morse), steps / "step7_homology.json")
        if h.rational_ranks != h.ranks:
            raise TheoremViolation(f"integer ranks {h.ranks} differ from rational ranks {h.rational_ranks}")
        if h.has_torsion:
            raise TorsionFound(f"torsion factors {h.torsion_factors}")
        if not res.morse.all_passed:
            f = res.morse.failures[0]
            raise InequalityFailed(f"{len(res.morse.failures)} inequality instances fail, first: item {f.item} "
                                   f"(j={f.j}, l={f.l}) {f.lhs} {f.relation} {f.rhs}")
    return res


def load_complex(path) -> tuple[dict[int, list[str]], IntegerComplex]:
    """Rebuild the integer complex from a serialized step-5 file."""
    data = serialize.load(path)
    labels = {int(k): list(v) for k, v in data["generators"].items()}
    coeffs = [Coefficient.from_json(c) for c in data["coefficients"]]
    boundary = assemble_boundaries(labels, coeffs)
    return labels, IntegerComplex({k: len(v) for k, v in labels.items()}, boundary)


def replay_algebra(out_dir) -> dict:
    """Recompute steps 6 and 7 from ``<out>/steps`` and return the homology JSON."""
    steps = Path(out_dir) / "steps"
    _, cx = load_complex(steps / "step5_bigons.json")
    n_primary = len(serialize.load(steps / "step4_maslov.json")["classes"])
    h = homology_of(cx)
    return homology_json(cx.ranks, h, verify_morse_inequalities(cx.ranks, h, n_primary))


def stability_check(cfg: RunConfig, base: PipelineResult, out: Path) -> dict:
    """Rerun with doubled depth and compare class count and homology ranks."""
    twin = run_pipeline(cfg.with_(depth=2 * cfg.depth, wide_scan=False, stability_check=False), out, stability=False)
    same = (len(twin.classes) == len(base.classes)) and twin.homology.ranks == base.homology.ranks
    rec = {"depth": cfg.depth, "doubled_depth": 2 * cfg.depth, "classes": len(base.classes),
           "classes_doubled": len(twin.classes), "h_k": {str(k): v for k, v in base.homology.ranks.items()},
           "h_k_doubled": {str(k): v for k, v in twin.homology.ranks.items()}, "stable": same}
    if not same:
        logger.warning("doubling the depth changed the result: %s", rec)
    return rec


def _make_report(res: PipelineResult, stab: dict | None) -> RunReport:
    pts = res.all_points
    geometry = {
        "n_points": len(pts),
        "max_residual": max((p.residual for p in pts), default=0.0),
        "min_angle": min((min(p.angle, math.pi - p.angle) for p in pts), default=math.pi / 2),
        "det_deviation": res.symplectic_deviation,
        "residual_ok": all(p.residual < RESIDUAL_TOL for p in pts),
        "angle_ok": all(min(p.angle, math.pi - p.angle) >= res.config.alpha_min for p in pts),
    }
    oracle = {
        "enabled": res.config.wide_scan,
        "n_scan": res.config.n_scan,
        "pairs_scanned": len(res.scans),
        "violations": [f"{s.source} -> {s.target}: {v}" for s in res.scans for v in s.violations],
    }
    per_pair_classes = {pair_label(p): sum(c.pair == p for c in res.classes) for p in res.tangles}
    return RunReport(
        model=res.model.name,
        params=dict(res.model.params),
        fixed_point=[float(v) for v in res.fixed_point.location],
        eigenvalue=float(res.fixed_point.lam),
        pair_points={pair_label(p): len(v) for p, v in res.points.items()},
        pair_primary_points={pair_label(p): int(np.count_nonzero(t.primary)) for p, t in res.tangles.items()},
        pair_classes=per_pair_classes,
        first_intersections={pair_label(p): _point_json(q) for p, q in res.first.items()},
        n_primary_classes=len(res.classes),
        c_k=dict(res.complex.ranks),
        h_k=dict(res.homology.ranks),
        torsion={k: list(v) for k, v in res.homology.torsion_factors.items()},
        inequalities_passed=res.morse.all_passed,
        d_squared_zero=True,
        geometry=geometry,
        oracle=oracle,
        timing=res.timing,
        warnings=res.warnings,
        backend=kernels.BACKEND,
        extents=res.extents,
        stability=stab,
    )
