"""Exact integer homology: Smith normal form, ranks, torsion, Morse checks.

All arithmetic uses Python ints (arbitrary precision). numpy object arrays are
accepted on input but converted to nested lists before any reduction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Protocol

import numpy as np

from .errors import DSquaredNonzero

DEGREES = (-3, -2, -1, 1, 2, 3)
FULL_RANGE = tuple(range(-3, 4))  # degree 0 included, always zero


def _as_int_rows(A) -> tuple[list[list[int]], int, int]:
    arr = np.asarray(A, dtype=object)
    if arr.ndim != 2:
        if arr.size == 0:
            return [], 0, 0
        raise ValueError(f"expected a 2-d integer matrix, got shape {arr.shape}")
    m, n = arr.shape
    rows = [[int(arr[i, j]) for j in range(n)] for i in range(m)]
    return rows, m, n


def _eye(n: int) -> list[list[int]]:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def matmul(A: list[list[int]], B: list[list[int]], inner: int | None = None) -> list[list[int]]:
    """Exact product of nested-list integer matrices."""
    if inner is None:
        inner = len(B)
    ncols = len(B[0]) if B else 0
    return [[sum(A[i][t] * B[t][j] for t in range(inner)) for j in range(ncols)] for i in range(len(A))]


@dataclass
class SNFResult:
    """``U @ A @ V == D`` with U, V unimodular and D diagonal."""

    U: list[list[int]]
    V: list[list[int]]
    D: list[list[int]]
    invariant_factors: list[int]
    V_inv: list[list[int]] = field(repr=False, default_factory=list)

    @property
    def rank(self) -> int:
        return len(self.invariant_factors)

    @property
    def torsion(self) -> list[int]:
        return [d for d in self.invariant_factors if d > 1]


def smith_normal_form(A) -> SNFResult:
    """Smith normal form by repeated smallest-pivot Euclidean reduction.

    The result is checked by exact multiplication before returning; an
    inconsistency raises ``AssertionError`` since it can only be a bug.
    """
    rows, m, n = _as_int_rows(A)
    D = [r[:] for r in rows]
    U = _eye(m)
    V = _eye(n)
    Vi = _eye(n)

    def swap_rows(a, b):
        D[a], D[b] = D[b], D[a]
        U[a], U[b] = U[b], U[a]

    def swap_cols(a, b):
        for r in D:
            r[a], r[b] = r[b], r[a]
        for r in V:
            r[a], r[b] = r[b], r[a]
        Vi[a], Vi[b] = Vi[b], Vi[a]

    def add_row(dst, src, q):
        # row_dst += q * row_src
        D[dst] = [x + q * y for x, y in zip(D[dst], D[src])]
        U[dst] = [x + q * y for x, y in zip(U[dst], U[src])]

    def add_col(dst, src, q):
        # col_dst += q * col_src; inverse update acts on rows of Vi
        for r in D:
            r[dst] += q * r[src]
        for r in V:
            r[dst] += q * r[src]
        Vi[src] = [x - q * y for x, y in zip(Vi[src], Vi[dst])]

    for t in range(min(m, n)):
        while True:
            best = None
            for i in range(t, m):
                for j in range(t, n):
                    v = D[i][j]
                    if v and (best is None or abs(v) < best[0]):
                        best = (abs(v), i, j)
                        if best[0] == 1:
                            break
                if best is not None and best[0] == 1:
                    break
            if best is None:
                break
            _, i, j = best
            if i != t:
                swap_rows(i, t)
            if j != t:
                swap_cols(j, t)
            piv = D[t][t]
            for i in range(t + 1, m):
                if D[i][t]:
                    add_row(i, t, -(D[i][t] // piv))
            for j in range(t + 1, n):
                if D[t][j]:
                    add_col(j, t, -(D[t][j] // piv))
            if any(D[i][t] for i in range(t + 1, m)) or any(D[t][j] for j in range(t + 1, n)):
                continue
            bad = next((i for i in range(t + 1, m) for j in range(t + 1, n) if D[i][j] % piv), None)
            if bad is None:
                break
            add_row(t, bad, 1)
        if t < m and t < n and D[t][t] < 0:
            D[t] = [-x for x in D[t]]
            U[t] = [-x for x in U[t]]

    factors = [D[i][i] for i in range(min(m, n)) if D[i][i]]
    res = SNFResult(U=U, V=V, D=D, invariant_factors=factors, V_inv=Vi)
    _verify(rows, res, m, n)
    return res


def _verify(A: list[list[int]], res: SNFResult, m: int, n: int) -> None:
    if m and n:
        prod = matmul(matmul(res.U, A, m), res.V, n)
        assert prod == res.D, "U A V != D"
        assert matmul(res.V, res.V_inv, n) == _eye(n), "V_inv is not the inverse of V"
    for i in range(m):
        for j in range(n):
            assert i == j or res.D[i][j] == 0, "D is not diagonal"
    f = res.invariant_factors
    assert all(d > 0 for d in f)
    assert all(f[i + 1] % f[i] == 0 for i in range(len(f) - 1)), "invariant factors do not divide"
    # nonzero diagonal entries must form a prefix
    assert all(res.D[i][i] == 0 for i in range(len(f), min(m, n)))


def rational_rank(A) -> int:
    """Rank over the rationals by fraction-exact Gaussian elimination."""
    rows, m, n = _as_int_rows(A)
    M = [[Fraction(x) for x in r] for r in rows]
    rank = 0
    for c in range(n):
        piv = next((i for i in range(rank, m) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[rank], M[piv] = M[piv], M[rank]
        for i in range(rank + 1, m):
            if M[i][c] != 0:
                f = M[i][c] / M[rank][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[rank])]
        rank += 1
    return rank


class GradedComplex(Protocol):
    @property
    def ranks(self) -> dict[int, int]: ...

    def matrix(self, k: int) -> np.ndarray: ...


@dataclass
class IntegerComplex:
    """Minimal graded complex given by chain ranks and boundary matrices.

    ``boundary[k]`` maps C_k to C_{k-1} and has shape (c_{k-1}, c_k).
    """

    dims: dict[int, int]
    boundary: dict[int, object] = field(default_factory=dict)

    @property
    def ranks(self) -> dict[int, int]:
        return {k: int(self.dims.get(k, 0)) for k in DEGREES}

    def matrix(self, k: int) -> np.ndarray:
        if k in self.boundary:
            return np.asarray(self.boundary[k], dtype=object).reshape(self.dims.get(k - 1, 0), self.dims.get(k, 0))
        return np.zeros((self.dims.get(k - 1, 0), self.dims.get(k, 0)), dtype=object)


@dataclass
class HomologyResult:
    ranks: dict[int, int]
    torsion_factors: dict[int, list[int]]
    euler: int
    boundary_ranks: dict[int, int]
    rational_ranks: dict[int, int] | None = None

    @property
    def has_torsion(self) -> bool:
        return any(self.torsion_factors.values())


def check_d_squared(cx: GradedComplex) -> None:
    """Raise ``DSquaredNonzero`` unless every composite boundary vanishes."""
    for k in DEGREES:
        a, b = cx.matrix(k - 1), cx.matrix(k)
        if a.size == 0 or b.size == 0:
            continue
        prod = a.dot(b)
        if np.any(prod != 0):
            i, j = map(int, np.argwhere(prod != 0)[0])
            raise DSquaredNonzero(f"d-squared nonzero: d_{k - 1} d_{k} has entry {prod[i, j]} at ({i}, {j})")


def homology_of(cx: GradedComplex, rational_check: bool = True) -> HomologyResult:
    """Integer homology via a two-step presentation per degree.

    A basis of ker d_k comes from the last columns of V in the SNF of d_k.
    Expressing d_{k+1} in that basis gives a presentation matrix of H_k whose
    invariant factors above 1 are the torsion coefficients.
    """
    check_d_squared(cx)
    c = cx.ranks
    snfs = {k: smith_normal_form(cx.matrix(k)) for k in DEGREES}
    ranks, torsion = {}, {}
    for k in DEGREES:
        ck, r_k = c.get(k, 0), snfs[k].rank
        rows, m, _ = _as_int_rows(cx.matrix(k + 1))
        Vi = snfs[k].V_inv
        # the image must lie in the kernel
        if any(any(row) for row in matmul(Vi[:r_k], rows, m)):
            raise DSquaredNonzero(f"d-squared nonzero: image of d_{k + 1} leaves ker d_{k}")
        pres = smith_normal_form(matmul(Vi[r_k:], rows, m))
        ranks[k] = ck - r_k - pres.rank
        torsion[k] = pres.torsion
        assert ranks[k] >= 0
    euler_c = sum((-1) ** (k % 2) * c.get(k, 0) for k in DEGREES)
    euler_h = sum((-1) ** (k % 2) * ranks[k] for k in DEGREES)
    if not any(torsion.values()):
        assert euler_c == euler_h, "Euler characteristic mismatch"
    rat = None
    if rational_check:
        rr = {k: rational_rank(cx.matrix(k)) for k in (*DEGREES, 0, 4)}
        rat = {k: c.get(k, 0) - rr[k] - rr[k + 1] for k in DEGREES}
    return HomologyResult(ranks=ranks, torsion_factors=torsion, euler=euler_c,
                          boundary_ranks={k: snfs[k].rank for k in DEGREES}, rational_ranks=rat)


@dataclass
class Inequality:
    item: int
    j: int
    l: int
    lhs: int
    rhs: int
    relation: str  # "<=" or "=="
    label: str

    @property
    def passed(self) -> bool:
        return self.lhs == self.rhs if self.relation == "==" else self.lhs <= self.rhs

    def to_json(self) -> dict:
        return {"item": self.item, "j": self.j, "l": self.l, "lhs": self.lhs, "rhs": self.rhs,
                "relation": self.relation, "label": self.label, "passed": self.passed}


@dataclass
class MorseReport:
    instances: list[Inequality]

    @property
    def all_passed(self) -> bool:
        return all(i.passed for i in self.instances)

    @property
    def failures(self) -> list[Inequality]:
        return [i for i in self.instances if not i.passed]


def verify_morse_inequalities(chain_ranks: dict[int, int], homology: HomologyResult, n_primary: int) -> MorseReport:
    """Evaluate the four families of rank inequalities.

    ``n_primary`` is the number of primary orbit classes counted before grading,
    so item 2 is a real consistency check rather than a tautology.
    """
    c = {k: int(chain_ranks.get(k, 0)) for k in FULL_RANGE}
    h = {k: int(homology.ranks.get(k, 0)) for k in FULL_RANGE}
    out: list[Inequality] = []
    for k in FULL_RANGE:
        out.append(Inequality(1, k, k, h[k], c[k], "<=", f"h_{k} <= c_{k}"))
    out.append(Inequality(2, -3, 3, sum(c.values()), n_primary, "==", "sum c_i == #primary classes"))
    for j in FULL_RANGE:
        for l in FULL_RANGE:
            if l < j:
                continue
            sh = sum(h[i] for i in range(j, l + 1))
            sc = sum(c[i] for i in range(j, l + 1))
            out.append(Inequality(3, j, l, sh, sc, "<=", f"sum h[{j}..{l}] <= sum c[{j}..{l}]"))
            out.append(Inequality(3, j, l, sc, n_primary, "<=", f"sum c[{j}..{l}] <= #primary classes"))
    for l in FULL_RANGE:
        ah = sum((-1) ** ((l - i) % 2) * h[i] for i in range(-3, l + 1))
        ac = sum((-1) ** ((l - i) % 2) * c[i] for i in range(-3, l + 1))
        out.append(Inequality(4, -3, l, ah, ac, "<=", f"alternating sum h[-3..{l}] <= alternating sum c[-3..{l}]"))
    return MorseReport(out)


def homology_json(chain_ranks: dict[int, int], homology: HomologyResult, morse: MorseReport) -> dict:
    return {
        "c_k": {str(k): int(chain_ranks.get(k, 0)) for k in DEGREES},
        "h_k": {str(k): int(homology.ranks[k]) for k in DEGREES},
        "h_k_rational": {str(k): int(v) for k, v in (homology.rational_ranks or {}).items()},
        "torsion": {str(k): [int(d) for d in homology.torsion_factors[k]] for k in DEGREES},
        "boundary_ranks": {str(k): int(v) for k, v in homology.boundary_ranks.items()},
        "euler": int(homology.euler),
        "inequalities": [i.to_json() for i in morse.instances],
        "inequalities_passed": morse.all_passed,
    }


def snf_json(res: SNFResult) -> dict:
    return {"U": res.U, "V": res.V, "D": res.D, "invariant_factors": res.invariant_factors, "rank": res.rank}
