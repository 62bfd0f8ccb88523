import csv
import json
import re
from pathlib import Path

import numpy as np
import pytest

from homfloer import cli
from homfloer.errors import DSquaredNonzero, TorsionFound
from homfloer.pipeline import StepFailure, replay_algebra
from homfloer.report import emit_svg_tangle
from homfloer.serialize import load
from homfloer.tracer import STABLE, UNSTABLE, BranchCurve

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
HENON = CONFIGS / "cubic_henon_a0.5.cfg"


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert cli.main(["run", "--config", str(HENON), "--wide-scan", "--dump-curves", "--out", str(out)]) == 0
    return out


def test_run_artifacts(run_dir):
    for name in ("points.csv", "classes.csv", "complex.json", "homology.json", "report.json", "tangle.svg",
                 "curves.csv"):
        assert (run_dir / name).is_file(), name
    assert _rows(run_dir / "points.csv")[0] == ["branch_pair", "x", "y", "u_param", "s_param", "sign", "angle"]
    assert _rows(run_dir / "classes.csv")[0] == ["orbit_id", "rep_x", "rep_y", "u_param", "s_param", "maslov", "primary"]
    assert _rows(run_dir / "curves.csv")[0] == ["kind", "side", "index", "x", "y", "param"]
    assert sorted(p.name for p in (run_dir / "steps").iterdir())[:8] == [
        "step0_model.json", "step1_first_intersections.json", "step2_intersections.json", "step3_primary.json",
        "step4_maslov.json", "step5_bigons.json", "step6_complex.json", "step7_homology.json"]


def test_report_contents(run_dir):
    rep = load(run_dir / "report.json")
    n_classes = len(_rows(run_dir / "classes.csv")) - 1
    assert rep["sum_c_k"] == sum(rep["c_k"].values()) == rep["n_primary_classes"] == n_classes
    assert isinstance(rep["warnings"], list)
    assert rep["oracle"]["enabled"] is True
    assert rep["oracle"]["pairs_scanned"] > 0
    assert rep["oracle"]["violations"] == []
    assert rep["inequalities_passed"] and rep["d_squared_zero"]
    assert rep["geometry"]["residual_ok"] and rep["geometry"]["angle_ok"]


def test_svg_markers_match_points(run_dir):
    svg = (run_dir / "tangle.svg").read_text()
    n_points = len(_rows(run_dir / "points.csv")) - 1
    assert svg.count('class="marker') == n_points
    assert svg.count('class="curve') == 4
    assert 'class="fixed-point"' in svg and 'class="fixed-point-label"' in svg


def test_outputs_are_deterministic(run_dir, tmp_path):
    assert cli.main(["run", "--config", str(HENON), "--wide-scan", "--dump-curves", "--out", str(tmp_path)]) == 0
    for name in ("tangle.svg", "points.csv", "classes.csv", "curves.csv", "complex.json", "homology.json"):
        assert (tmp_path / name).read_bytes() == (run_dir / name).read_bytes(), name


def test_json_floats_have_17_digits(run_dir):
    text = (run_dir / "steps" / "step0_model.json").read_text()
    floats = re.findall(r"-?\d+\.\d+(?:e[-+]\d+)?", text)
    assert floats
    long = [f for f in floats if len(re.sub(r"[-.]|e.*", "", f).lstrip("0")) >= 16]
    assert long  # eigenvalues are irrational, so full precision shows
    data = json.loads((run_dir / "report.json").read_text())
    assert re.search(r'"eigenvalue": ' + re.escape(f"{data['eigenvalue']:.17g}"), (run_dir / "report.json").read_text())


def test_replay_reproduces_homology(run_dir):
    assert replay_algebra(run_dir) == load(run_dir / "homology.json")


def test_validate(tmp_path, capsys):
    assert cli.main(["validate", "--config", str(HENON), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "points.csv").is_file() and (tmp_path / "tangle.svg").is_file()
    assert not (tmp_path / "homology.json").exists()
    assert not (tmp_path / "steps" / "step4_maslov.json").exists()
    assert "primary" in capsys.readouterr().out


def _write_cfg(tmp_path, extra):
    text = HENON.read_text() + "\n" + extra + "\n"
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return path


def test_shallow_depth_exits_window_insufficient(tmp_path, capsys):
    path = _write_cfg(tmp_path, "depth = 1")
    text = path.read_text().replace("depth = 4\n", "")
    path.write_text(text)
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 3
    assert "step 5" in capsys.readouterr().err


def test_not_hyperbolic_is_config_error(tmp_path, capsys):
    path = tmp_path / "k0.cfg"
    path.write_text("model = standard\nparam.k = 0\n")
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "not hyperbolic" in err and "step 0" in err


def test_bad_config_exit_code(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("model = standard\nflavour = 3\n")
    assert cli.main(["run", "--config", str(path)]) == 2
    assert cli.main(["validate", "--config", str(tmp_path / "missing.cfg")]) == 2


@pytest.mark.parametrize("err", [DSquaredNonzero("d-squared nonzero"), TorsionFound("torsion")])
def test_theorem_violation_exit_code(monkeypatch, tmp_path, capsys, err):
    import homfloer.pipeline as pipeline

    def boom(*a, **k):
        raise StepFailure(7, err)

    monkeypatch.setattr(pipeline, "run_pipeline", boom)
    assert cli.main(["run", "--config", str(HENON), "--out", str(tmp_path)]) == 4
    assert "theorem violation at step 7" in capsys.readouterr().err


def test_snf_command(tmp_path, capsys):
    path = tmp_path / "m.json"
    path.write_text(json.dumps([[1, 1], [1, -1]]))
    assert cli.main(["snf", str(path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["invariant_factors"] == [1, 2] and out["rank"] == 2
    A = np.array([[1, 1], [1, -1]])
    assert (np.array(out["U"]) @ A @ np.array(out["V"])).tolist() == out["D"]
    path.write_text(json.dumps({"matrix": [[2, 0], [0, 0]]}))
    assert cli.main(["snf", str(path)]) == 0
    assert json.loads(capsys.readouterr().out)["invariant_factors"] == [2]
    path.write_text(json.dumps([[1, 2], [3]]))
    assert cli.main(["snf", str(path)]) == 2
    path.write_text("not json")
    assert cli.main(["snf", str(path)]) == 2


class _Chart:
    pass


def test_empty_point_set_svg(tmp_path):
    t = np.linspace(0, 1, 5)
    curves = {(UNSTABLE, 1): BranchCurve(UNSTABLE, 1, t, np.column_stack([t, 0 * t]), t, 1, 1e-4, _Chart()),
              (STABLE, 1): BranchCurve(STABLE, 1, t, np.column_stack([0 * t, t]), t, 1, 1e-4, _Chart())}
    path = tmp_path / "e.svg"
    assert emit_svg_tangle(curves, [], path) == 0
    svg = path.read_text()
    assert svg.count("<polyline") == 2 and "<circle" not in svg
    assert svg.startswith("<?xml") and svg.rstrip().endswith("</svg>")
