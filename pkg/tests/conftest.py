"""Shared fixtures: cached pipeline runs of the acceptance cases, and a summary hook.

Full runs take tens of seconds, so each acceptance case is computed once per
session. The summary hook prints one PASS/FAIL line per acceptance criterion,
aggregated over the tests named ``test_criterion_<N>_...``.
"""
from __future__ import annotations

import re
import time
from pathlib import Path

import pytest

from homfloer.config import load_config
from homfloer.pipeline import run_pipeline

ROOT = Path(__file__).resolve().parents[1]
CONFIG_DIR = ROOT / "configs"

CASES = {
    "standard_k0.8": CONFIG_DIR / "standard_k0.8.cfg",
    "standard_k1.2": CONFIG_DIR / "standard_k1.2.cfg",
    "standard_k2.0": CONFIG_DIR / "standard_k2.0.cfg",
    "cubic_henon_a0.5": CONFIG_DIR / "cubic_henon_a0.5.cfg",
    "cubic_henon_a0.7": CONFIG_DIR / "cubic_henon_a0.7.cfg",
}
# production depth of the acceptance runs, and the shallower run it must agree with
FULL_DEPTH = 4
HALF_DEPTH = 2

CRITERIA = {
    1: "boundary squares to zero, under 60 s per case",
    2: "no bigons beyond one iterate, exclusivity of the n=0 and n=+-1 bigons",
    3: "bigon endpoints inside their place windows, case 4 never occurs",
    4: "Maslov indices in +-1, +-2, +-3 and invariant along orbits",
    5: "no torsion, integer ranks equal rational ranks",
    6: "rank inequalities, chain ranks sum to the class count",
    7: "primary flags equal the brute-force definition, first intersection is primary",
    8: "residual, angle and determinant gates; depth doubling is stable",
    9: "Smith normal form against a naive reduction on 1000 random matrices",
}


class _Run:
    """A finished pipeline run plus its wall time."""

    def __init__(self, res, seconds: float, out: Path):
        self.res = res
        self.seconds = seconds
        self.out = out


def _run_case(name: str, out: Path, **overrides) -> _Run:
    cfg = load_config(CASES[name]).with_(out_dir=str(out), **overrides)
    t0 = time.perf_counter()
    res = run_pipeline(cfg)
    return _Run(res, time.perf_counter() - t0, out)


@pytest.fixture(scope="session")
def acceptance_runs(tmp_path_factory):
    """Production runs with the wide scan on, computed lazily per case."""
    cache: dict[str, _Run] = {}
    base = tmp_path_factory.mktemp("acceptance")

    def get(name: str) -> _Run:
        if name not in cache:
            cache[name] = _run_case(name, base / name, depth=FULL_DEPTH, wide_scan=True, n_scan=5)
        return cache[name]

    return get


@pytest.fixture(scope="session")
def shallow_runs(tmp_path_factory):
    """Runs at half the production depth, without the scan."""
    cache: dict[str, _Run] = {}
    base = tmp_path_factory.mktemp("shallow")

    def get(name: str) -> _Run:
        if name not in cache:
            cache[name] = _run_case(name, base / name, depth=HALF_DEPTH, wide_scan=False)
        return cache[name]

    return get


@pytest.fixture(scope="session")
def henon_run(acceptance_runs):
    """The cheapest complete run, for tests that only need some real data."""
    return acceptance_runs("cubic_henon_a0.5")


_outcomes: dict[int, list[bool]] = {}
_CRIT_RE = re.compile(r"test_criterion_(\d+)_")


def pytest_runtest_logreport(report):
    m = _CRIT_RE.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes.setdefault(n, []).append(report.outcome == "passed")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, label in CRITERIA.items():
        res = _outcomes.get(n)
        if res is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(res) else "FAIL"
        tr.write_line(f"criterion {n}: {status}  {label}  ({sum(res or [])}/{len(res or [])} checks)")
