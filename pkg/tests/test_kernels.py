"""The compiled core and the numpy fallback must agree.

Iterates agree to round-off (the C compiler may contract ``a*b + c``);
escape flags and segment pairs agree exactly.
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homfloer import _pykernels, kernels

ck = pytest.importorskip("homfloer._ckernels", reason="compiled kernels not built")

BBOX = (-10.0, 10.0, -10.0, 10.0)
MODELS = [
    (_pykernels.LINEAR, np.array([2.0, 0.0, 0.0, 0.5])),
    (_pykernels.STANDARD, np.array([1.2])),
    (_pykernels.CUBIC_HENON, np.array([0.5])),
    (_pykernels.PENDULUM_VERLET, np.array([0.1, 10.0])),
]


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("mid,params", MODELS)
@pytest.mark.parametrize("inverse", [False, True])
def test_iterate_parity(mid, params, inverse):
    rng = np.random.default_rng(mid)
    q = rng.uniform(-2, 2, 500)
    p = rng.uniform(-2, 2, 500)
    counts = rng.integers(0, 15, 500)
    a = _pykernels.iterate(mid, params, q, p, counts, inverse, BBOX, 1)
    b = ck.iterate(mid, params, q, p, counts, inverse, BBOX, 1)
    assert np.array_equal(a[2], b[2])
    live = ~np.asarray(a[2])
    assert np.allclose(a[0][live], b[0][live], rtol=0, atol=1e-9)
    assert np.allclose(a[1][live], b[1][live], rtol=0, atol=1e-9)


def test_iterate_repeat_is_composition():
    mid, params = MODELS[1]
    q, p = np.array([0.1, 0.2]), np.array([0.0, -0.1])
    a = ck.iterate(mid, params, q, p, np.array([3, 3]), False, BBOX, 2)
    b = ck.iterate(mid, params, q, p, np.array([6, 6]), False, BBOX, 1)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def _polyline(rng, n):
    return np.cumsum(rng.normal(size=(n, 2)), axis=0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 120), m=st.integers(2, 120))
def test_segment_pairs_parity_and_bruteforce(seed, n, m):
    rng = np.random.default_rng(seed)
    A, B = _polyline(rng, n), _polyline(rng, m)
    i1, j1 = _pykernels.segment_pairs(A[:, 0], A[:, 1], B[:, 0], B[:, 1])
    i2, j2 = ck.segment_pairs(A[:, 0], A[:, 1], B[:, 0], B[:, 1])
    assert np.array_equal(i1, i2) and np.array_equal(j1, j2)
    I, J = np.meshgrid(np.arange(n - 1), np.arange(m - 1), indexing="ij")
    I, J = I.ravel(), J.ravel()
    mask = _pykernels.crossing_mask(A[:, 0], A[:, 1], B[:, 0], B[:, 1], I, J)
    assert set(zip(I[mask].tolist(), J[mask].tolist())) == set(zip(i1.tolist(), j1.tolist()))


def test_segment_pairs_simple():
    ax, ay = np.array([-1.0, 1.0]), np.array([0.0, 0.0])
    bx, by = np.array([0.0, 0.0]), np.array([-1.0, 1.0])
    i, j = ck.segment_pairs(ax, ay, bx, by)
    assert list(i) == [0] and list(j) == [0]
    i, j = ck.segment_pairs(ax, ay, ax, ay + 1.0)
    assert len(i) == 0


def test_step_inverse_roundtrip():
    for mid, params in MODELS:
        q, p = np.array([0.3]), np.array([-0.2])
        q1, p1 = _pykernels.step(mid, params, q, p, False)
        q0, p0 = _pykernels.step(mid, params, q1, p1, True)
        assert np.allclose([q0[0], p0[0]], [0.3, -0.2], atol=1e-14)
