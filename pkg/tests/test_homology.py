import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homfloer.complex import DEGREES
from homfloer.errors import DSquaredNonzero
from homfloer.homology import (
    IntegerComplex,
    check_d_squared,
    homology_json,
    homology_of,
    matmul,
    rational_rank,
    smith_normal_form,
    snf_json,
    verify_morse_inequalities,
)

from oracles import det_int, naive_invariant_factors, rank_q, rational_homology


@pytest.mark.parametrize("A,factors", [
    ([[1, 0, 0], [0, 1, 0], [0, 0, 1]], [1, 1, 1]),
    ([[2, 0], [0, 0]], [2]),
    ([[1, 1], [1, -1]], [1, 2]),
    ([[2, 4, 4], [-6, 6, 12], [10, -4, -16]], [2, 6, 12]),
    ([[0, 0], [0, 0]], []),
    ([[6]], [6]),
    ([[-3]], [3]),
])
def test_snf_examples(A, factors):
    res = smith_normal_form(A)
    assert res.invariant_factors == factors
    assert matmul(matmul(res.U, A), res.V) == res.D


def test_snf_empty_shapes():
    for shape in ((0, 3), (3, 0), (0, 0)):
        res = smith_normal_form(np.zeros(shape, dtype=int))
        assert res.invariant_factors == [] and res.rank == 0


matrices = st.integers(1, 6).flatmap(lambda m: st.integers(1, 6).flatmap(
    lambda n: st.lists(st.lists(st.integers(-9, 9), min_size=n, max_size=n), min_size=m, max_size=m)))


@settings(max_examples=150, deadline=None)
@given(matrices)
def test_snf_properties(A):
    res = smith_normal_form(A)
    m, n = len(A), len(A[0])
    assert matmul(matmul(res.U, A), res.V) == res.D
    assert abs(det_int(res.U)) == 1 and abs(det_int(res.V)) == 1
    assert all(res.D[i][j] == 0 for i in range(m) for j in range(n) if i != j)
    f = res.invariant_factors
    assert all(f[i + 1] % f[i] == 0 for i in range(len(f) - 1))
    assert f == naive_invariant_factors(A)
    assert res.rank == rank_q(A) == rational_rank(A)


def test_snf_json_keys():
    js = snf_json(smith_normal_form([[2, 0], [0, 0]]))
    assert set(js) == {"U", "V", "D", "invariant_factors", "rank"}
    assert js["invariant_factors"] == [2] and js["rank"] == 1


def test_torsion_control():
    cx = IntegerComplex({2: 1, 1: 1}, {2: [[2]]})
    h = homology_of(cx)
    assert h.torsion_factors[1] == [2]
    assert h.ranks[1] == 0 and h.ranks[2] == 0
    assert h.has_torsion


def test_zero_boundary_gives_chain_ranks():
    dims = {-3: 1, -2: 2, -1: 0, 1: 3, 2: 1, 3: 2}
    h = homology_of(IntegerComplex(dims))
    assert h.ranks == {k: dims[k] for k in DEGREES}
    assert not h.has_torsion


def test_d_squared_guard():
    cx = IntegerComplex({3: 1, 2: 1, 1: 1}, {3: [[1]], 2: [[1]]})
    with pytest.raises(DSquaredNonzero):
        check_d_squared(cx)
    with pytest.raises(DSquaredNonzero):
        homology_of(cx)


def _unimodular(rng, n, steps=12):
    """Random unimodular matrix and its inverse from elementary operations."""
    G = np.eye(n, dtype=object)
    Gi = np.eye(n, dtype=object)
    for _ in range(steps if n > 1 else 0):
        i, j = rng.choice(n, 2, replace=False)
        q = int(rng.integers(-2, 3))
        E = np.eye(n, dtype=object)
        E[i, j] = q
        Ei = np.eye(n, dtype=object)
        Ei[i, j] = -q
        G, Gi = E.dot(G), Gi.dot(Ei)
    if n and rng.random() < 0.5:
        k = int(rng.integers(n))
        G[k], Gi[:, k] = -G[k], -Gi[:, k]
    return G, Gi


def _random_complex(seed):
    """Direct sum of single generators and pairs ``a: C_k -> C_{k-1}``, then mixed by base changes.

    Returns the complex and its known homology (free ranks and torsion).
    """
    rng = np.random.default_rng(seed)
    gens = {k: [] for k in DEGREES}  # entries: ("free",), ("top", id) or ("bottom", id)
    free = {k: 0 for k in DEGREES}
    torsion = {k: [] for k in DEGREES}
    pairs = []
    for k in DEGREES:
        for _ in range(int(rng.integers(0, 3))):
            gens[k].append(("free",))
            free[k] += 1
    for k in (3, 2, -1, -2):
        for _ in range(int(rng.integers(0, 3))):
            a = int(rng.choice([1, 1, 1, 2, 3]))
            pid = len(pairs)
            pairs.append((k, a))
            gens[k].append(("top", pid))
            gens[k - 1].append(("bottom", pid))
            if a > 1:
                torsion[k - 1].append(a)
    dims = {k: len(gens[k]) for k in DEGREES}
    boundary = {}
    for k in DEGREES:
        if k - 1 not in gens:
            continue
        d = np.zeros((dims[k - 1], dims[k]), dtype=object)
        for c, g in enumerate(gens[k]):
            if g[0] == "top":
                r = gens[k - 1].index(("bottom", g[1]))
                d[r, c] = pairs[g[1]][1]
        boundary[k] = d
    base = {k: _unimodular(rng, dims[k]) for k in DEGREES}
    mixed = {k: base[k - 1][0].dot(boundary[k]).dot(base[k][1]) for k in boundary}
    return dims, mixed, free, torsion


@pytest.mark.parametrize("seed", range(40))
def test_random_complexes(seed):
    dims, bd, free, torsion = _random_complex(seed)
    h = homology_of(IntegerComplex(dims, bd))
    assert h.ranks == free
    # Z/a + Z/b is presented by diag(a, b); compare in invariant factor form
    expected = {k: [f for f in naive_invariant_factors([[a if i == j else 0 for j in range(len(v))] for i, a in enumerate(v)])
                    if f > 1] if v else [] for k, v in torsion.items()}
    assert h.torsion_factors == expected
    rat = rational_homology(dims, {k: m.tolist() for k, m in bd.items()})
    assert {k: rat[k] for k in DEGREES} == free
    assert h.rational_ranks == free


def test_morse_zero_complex():
    h = homology_of(IntegerComplex({}))
    rep = verify_morse_inequalities({}, h, 0)
    assert rep.all_passed
    assert {i.item for i in rep.instances} == {1, 2, 3, 4}


def test_morse_detects_failures():
    h = homology_of(IntegerComplex({1: 2}))
    rep = verify_morse_inequalities({1: 2}, h, 3)
    bad = rep.failures
    assert [i.item for i in bad] == [2]
    # a homology larger than the chains breaks items 1 and 3
    h.ranks[2] = 1
    items = {i.item for i in verify_morse_inequalities({1: 2}, h, 2).failures}
    assert {1, 3} <= items


def test_homology_json():
    cx = IntegerComplex({2: 1, 1: 2}, {2: [[1], [0]]})
    h = homology_of(cx)
    rep = verify_morse_inequalities(cx.ranks, h, 3)
    js = homology_json(cx.ranks, h, rep)
    assert js["h_k"]["1"] == 1 and js["h_k"]["2"] == 0
    assert js["c_k"]["1"] == 2
    assert js["inequalities_passed"] is True
    assert sum(js["c_k"].values()) == 3
