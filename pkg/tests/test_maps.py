import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homfloer.errors import NotHyperbolic, OrbitEscaped, OrientationReversing
from homfloer.maps import (
    CATALOGUE,
    MapModel,
    cubic_henon,
    eval_forward,
    find_fixed_point,
    inverse_jacobian,
    jacobian_matrix,
    linear_saddle,
    model_from_name,
    pendulum_verlet,
    squared,
    standard_map,
    validate_symplectic,
)

from oracles import fd_jacobian, fd_newton_fixed_point

MODELS = [standard_map(0.8), standard_map(1.2), standard_map(2.0), cubic_henon(0.5), cubic_henon(0.7),
          pendulum_verlet(0.1), linear_saddle(2.0)]
IDS = [f"{m.name}-{dict(m.params)}" for m in MODELS]


def _scalar(model):
    def f(x, y):
        q, p = model.forward(np.array([x]), np.array([y]))
        return float(q[0]), float(p[0])
    return f


def test_standard_map_closed_form():
    k = 1.2
    z = eval_forward(standard_map(k), (0.1, 0.1), 1)
    p1 = 0.1 + k / (2 * math.pi) * math.sin(2 * math.pi * 0.1)
    assert z == pytest.approx([0.1 + p1, p1], abs=1e-15)


def test_fixed_point_is_fixed_and_identity_convention():
    m = standard_map(1.2)
    assert np.array_equal(eval_forward(m, (0.0, 0.0), 5), [0.0, 0.0])
    z = np.array([0.3, -0.2])
    assert np.array_equal(eval_forward(m, z, 0), z)


def test_standard_fixed_point_eigenvalue():
    k = 1.2
    fp = find_fixed_point(standard_map(k), (0.01, -0.01))
    assert np.allclose(fp.location, 0.0, atol=1e-14)
    lam = (2 + k + math.sqrt((2 + k) ** 2 - 4)) / 2
    assert fp.lam == pytest.approx(lam, rel=1e-13)
    assert fp.w_orientation_preserving
    J = jacobian_matrix(standard_map(k), fp.location)
    assert np.allclose(J @ fp.unstable_dir, lam * fp.unstable_dir, atol=1e-9)
    assert np.allclose(J @ fp.stable_dir, fp.stable_dir / lam, atol=1e-9)


def test_pendulum_fixed_point_matches_finite_difference_newton():
    model = pendulum_verlet(0.1)
    fp = find_fixed_point(model, (3.0, 0.05))
    ref = fd_newton_fixed_point(_scalar(model), (3.0, 0.05))
    assert fp.location == pytest.approx(ref, abs=1e-9)
    assert fp.location[0] == pytest.approx(math.pi, abs=1e-12)
    assert fp.lam > 1 > fp.eigenvalues[1] > 0


def test_k_zero_is_not_hyperbolic():
    with pytest.raises(NotHyperbolic, match="not hyperbolic"):
        find_fixed_point(standard_map(0.0), (0.0, 0.0))


def test_orientation_reversing_and_square():
    # k < -4 gives trace below -2: real negative eigenvalues
    m = standard_map(-5.0)
    with pytest.raises(OrientationReversing):
        find_fixed_point(m, (0.0, 0.0))
    fp = find_fixed_point(squared(m), (0.0, 0.0))
    assert fp.w_orientation_preserving and fp.lam > 1


@pytest.mark.parametrize("model", MODELS, ids=IDS)
def test_determinant_is_one(model):
    rep = validate_symplectic(model, 1000)
    assert rep.samples == 1000
    assert rep.max_deviation < 1e-9


def test_polynomial_models_exact_to_round_off():
    assert validate_symplectic(standard_map(1.2), 1000).max_deviation < 1e-12


def test_broken_map_deviation_is_one():
    def fwd(q, p):
        return np.asarray(q, float), 2.0 * np.asarray(p, float)

    def inv(q, p):
        return np.asarray(q, float), 0.5 * np.asarray(p, float)

    def jac(q, p):
        q = np.asarray(q, float)
        return np.ones_like(q), np.zeros_like(q), np.zeros_like(q), np.full_like(q, 2.0)

    broken = MapModel("broken", (), fwd, inv, jac)
    assert validate_symplectic(broken, 10).max_deviation == 1.0


@pytest.mark.parametrize("model", MODELS, ids=IDS)
def test_jacobian_matches_finite_differences(model):
    rng = np.random.default_rng(0)
    f = _scalar(model)
    for z in rng.uniform(-1.5, 1.5, size=(10, 2)):
        J = jacobian_matrix(model, z)
        assert J == pytest.approx(np.array(fd_jacobian(f, z)), abs=1e-6)


@pytest.mark.parametrize("model", MODELS[:6], ids=IDS[:6])
def test_inverse_jacobian(model):
    z = np.array([0.3, -0.4])
    w = eval_forward(model, z, 1)
    a, b, c, d = inverse_jacobian(model, [w[0]], [w[1]])
    Jinv = np.array([[a[0], b[0]], [c[0], d[0]]])
    assert Jinv @ jacobian_matrix(model, z) == pytest.approx(np.eye(2), abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(idx=st.integers(0, 5), x=st.floats(-1, 1), y=st.floats(-1, 1), n=st.integers(-10, 10))
def test_inverse_undoes_forward(idx, x, y, n):
    model = MODELS[idx]
    try:
        w = eval_forward(model, (x, y), n)
        z = eval_forward(model, w, -n)
    except OrbitEscaped:
        return
    assert np.allclose(z, (x, y), atol=1e-8)


def test_escape_is_reported():
    with pytest.raises(OrbitEscaped):
        eval_forward(linear_saddle(2.0), (1.0, 0.0), 10)


def test_catalogue_by_name():
    assert set(CATALOGUE) >= {"standard", "cubic_henon", "pendulum_verlet"}
    m = model_from_name("standard", {"k": 2.0})
    assert m.param("k") == 2.0
    with pytest.raises(ValueError):
        model_from_name("nope")
