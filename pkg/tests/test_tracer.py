import math

import numpy as np
import pytest

from homfloer.errors import DeltaTooLarge, ImageBeyondTrace, RefinementBudgetExceeded
from homfloer.maps import find_fixed_point, iterate_points, linear_saddle, standard_map
from homfloer.tracer import (
    STABLE,
    UNSTABLE,
    BranchOrder,
    _turn_angles,
    param_of_iterate,
    seed_fundamental_segment,
    trace_branch,
)


@pytest.fixture(scope="module")
def std():
    m = standard_map(1.2)
    return m, find_fixed_point(m, (0.0, 0.0))


@pytest.fixture(scope="module")
def std_curves(std):
    m, fp = std
    return {kind: trace_branch(m, fp, kind, 1, 6) for kind in (UNSTABLE, STABLE)}


def test_linear_seed_segment_is_exact():
    m = linear_saddle(2.0)
    fp = find_fixed_point(m, (0.0, 0.0))
    xy = seed_fundamental_segment(m, fp, UNSTABLE, 1, 0.01, 16)
    assert np.all(xy[:, 1] == 0.0)
    assert xy[0, 0] == pytest.approx(0.01, rel=1e-14)
    assert xy[-1, 0] == pytest.approx(0.02, rel=1e-14)
    assert np.all(np.diff(xy[:, 0]) > 0)


def test_linear_trace_covers_lam_power():
    m = linear_saddle(2.0)
    fp = find_fixed_point(m, (0.0, 0.0))
    c = trace_branch(m, fp, UNSTABLE, 1, 3, delta=0.01)
    assert np.all(c.xy[:, 1] == 0.0)
    assert c.xy[0, 0] == pytest.approx(0.01, rel=1e-12)
    assert c.xy[-1, 0] == pytest.approx(0.01 * 2.0 ** 4, rel=1e-12)
    # param on the linear axis is the distance to x
    assert np.allclose(c.param, c.xy[:, 0], rtol=1e-12)
    s = trace_branch(m, fp, STABLE, -1, 3, delta=0.01)
    assert np.all(s.xy[:, 0] == 0.0) and np.all(s.xy[:, 1] < 0)


def test_linear_param_of_iterate_scales():
    m = linear_saddle(2.0)
    fp = find_fixed_point(m, (0.0, 0.0))
    c = trace_branch(m, fp, UNSTABLE, 1, 4, delta=0.01)
    assert param_of_iterate(c, 0.03, 0) == 0.03
    assert param_of_iterate(c, 0.03, 1) == pytest.approx(0.06, rel=1e-9)
    assert param_of_iterate(c, 0.06, -1) == pytest.approx(0.03, rel=1e-9)


def test_seed_points_on_manifold(std):
    m, fp = std
    xy = seed_fundamental_segment(m, fp, UNSTABLE, 1, 1e-4, 32)
    assert len(xy) == 32
    # backward iteration contracts onto x along the unstable direction
    q, p, _ = iterate_points(m, xy[:, 0], xy[:, 1], np.full(32, 8), inverse=True)
    back = np.column_stack([q, p])
    perp = np.array([-fp.unstable_dir[1], fp.unstable_dir[0]])
    dist = np.abs(back @ perp) * fp.lam ** 8
    assert dist.max() < 1e-10


def test_delta_too_large(std):
    m, fp = std
    with pytest.raises(DeltaTooLarge):
        seed_fundamental_segment(m, fp, UNSTABLE, 1, 0.5, 8)


def test_refinement_contract(std_curves):
    for c in std_curves.values():
        seg = np.hypot(*np.diff(c.xy, axis=0).T)
        small = np.diff(c.t) < 1e-12
        assert np.all((seg <= 1e-2) | small[: len(seg)])
        assert np.all(np.diff(c.param) > 0)
        assert np.all(np.diff(c.t) > 0)


def test_turn_angle_bound(std):
    m, fp = std
    c = trace_branch(m, fp, UNSTABLE, 1, 6, theta_max=0.05)
    assert _turn_angles(c.xy).max() <= 0.05


def test_first_vertex_near_x(std_curves, std):
    _, fp = std
    for c in std_curves.values():
        d = np.hypot(*(c.xy[0] - fp.location))
        assert d == pytest.approx(c.seed_delta, rel=1e-3)


def test_vertices_are_on_the_manifold(std_curves, std):
    """Backward (unstable) or forward (stable) iterates approach x monotonically."""
    m, fp = std
    for kind, c in std_curves.items():
        sel = c.xy[:: max(1, len(c.xy) // 400)]
        inv = kind == UNSTABLE
        d_prev = np.hypot(*(sel - fp.location).T)
        q, p = sel[:, 0].copy(), sel[:, 1].copy()
        for _ in range(3):
            q, p, _ = iterate_points(m, q, p, np.ones(len(q), dtype=np.int64), inverse=inv)
            d = np.hypot(q - fp.location[0], p - fp.location[1])
            assert np.all(d < d_prev)
            d_prev = d


def test_orbit_coordinate_is_conjugacy(std_curves):
    u = std_curves[UNSTABLE]
    t = np.linspace(1.0, 5.0, 9)
    a, _ = u.chart.points(t)
    b, _ = u.chart.points(t + 1.0)
    q, p, _ = iterate_points(u.chart.model, a[:, 0], a[:, 1], np.ones(len(t), dtype=np.int64))
    assert np.allclose(np.column_stack([q, p]), b, atol=1e-12)


def test_pushforward_moves_outward(std_curves):
    u = std_curves[UNSTABLE]
    for s in np.linspace(u.param[5], u.param[-1] * 0.3, 6):
        assert param_of_iterate(u, s, 1) > s


def test_image_beyond_trace(std_curves):
    u = std_curves[UNSTABLE]
    with pytest.raises(ImageBeyondTrace):
        param_of_iterate(u, float(u.param[-1]) * 0.999, 3)


def test_budget(std):
    m, fp = std
    with pytest.raises(RefinementBudgetExceeded):
        trace_branch(m, fp, UNSTABLE, 1, 6, max_vertices=100)
    with pytest.raises(RefinementBudgetExceeded):
        trace_branch(m, fp, UNSTABLE, 1, 16, max_vertices=2000)


def test_depth_doubling_keeps_the_curve(std):
    m, fp = std
    a = trace_branch(m, fp, UNSTABLE, 1, 3)
    b = trace_branch(m, fp, UNSTABLE, 1, 6)
    # every vertex of the short trace lies on the long one
    pts, _ = b.chart.points(a.t)
    assert np.allclose(pts, a.xy, atol=1e-12)


def test_branch_order():
    assert BranchOrder(UNSTABLE).less(1.0, 2.0)
    assert BranchOrder(STABLE).less(2.0, 1.0)
    assert not BranchOrder(STABLE).less(1.0, 2.0)


def test_csv_dump(tmp_path, std_curves):
    c = std_curves[STABLE]
    path = tmp_path / "c.csv"
    c.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "kind,side,index,x,y,param"
    assert len(lines) == c.n_vertices + 1
    x = float(lines[1].split(",")[3])
    assert x == c.xy[0, 0]


def test_lambda_spacing_on_linear_model():
    m = linear_saddle(3.0)
    fp = find_fixed_point(m, (0.0, 0.0))
    c = trace_branch(m, fp, UNSTABLE, -1, 2, delta=0.01)
    assert c.xy[-1, 0] == pytest.approx(-0.01 * 27.0, rel=1e-12)
    assert math.isclose(c.t_range[1], 3.0)
