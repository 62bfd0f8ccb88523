"""Compiled versus numpy kernels on tracing-sized inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Both implementations are imported directly, so the environment switch
HOMFLOER_PURE_PYTHON does not matter here. Results are checked for
agreement before timing.
"""
from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from homfloer import _pykernels
from homfloer.maps import standard_map, find_fixed_point
from homfloer.tracer import STABLE, UNSTABLE, trace_branch

try:
    from homfloer import _ckernels
except ImportError:
    _ckernels = None


def _iterate_case(n_points: int, n_iter: int):
    rng = np.random.default_rng(1)
    q = rng.uniform(-1e-4, 1e-4, n_points)
    p = rng.uniform(-1e-4, 1e-4, n_points)
    counts = rng.integers(n_iter // 2, n_iter, n_points)
    params = np.array([1.2])
    bbox = (-10.0, 10.0, -10.0, 10.0)

    def run(mod):
        return mod.iterate(_pykernels.STANDARD, params, q, p, counts, False, bbox, 1)

    return run


def _segment_case(depth: int):
    model = standard_map(1.2)
    fp = find_fixed_point(model, (0.0, 0.0))
    u = trace_branch(model, fp, UNSTABLE, 1, depth)
    s = trace_branch(model, fp, STABLE, 1, depth)

    def run(mod):
        return mod.segment_pairs(u.xy[:, 0], u.xy[:, 1], s.xy[:, 0], s.xy[:, 1])

    return run, u.n_vertices + s.n_vertices


def _time(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write results to this file")
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels are not built; run: pip install -e . --no-build-isolation", file=sys.stderr)
        return 1

    cases = []
    for n_points, n_iter in ((10_000, 20), (100_000, 20)):
        run = _iterate_case(n_points, n_iter)
        a, b = run(_pykernels), run(_ckernels)
        assert np.array_equal(a[2], b[2]) and np.allclose(a[0], b[0], atol=1e-9) and np.allclose(a[1], b[1], atol=1e-9), \
            "iterate backends disagree"
        cases.append((f"iterate {n_points} pts x {n_iter}", run))
    for depth in (12, 15):
        run, nv = _segment_case(depth)
        a, b = run(_pykernels), run(_ckernels)
        assert all(np.array_equal(x, y) for x, y in zip(a, b)), "segment_pairs backends disagree"
        cases.append((f"segment_pairs {nv} vertices", run))

    rows = []
    print(f"{'kernel':<36}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for name, run in cases:
        tp = _time(lambda: run(_pykernels), args.repeat)
        tc = _time(lambda: run(_ckernels), args.repeat)
        rows.append({"kernel": name, "python_s": tp, "cython_s": tc, "speedup": tp / tc})
        print(f"{name:<36}{tp:>12.4f}{tc:>12.4f}{tp / tc:>10.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
