"""Reference computations written independently of the package code.

None of these import from ``homfloer``. They are slow and simple on purpose.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction


def naive_invariant_factors(A: list[list[int]]) -> list[int]:
    """Invariant factors by plain row/column reduction without tracking transforms.

    Each step moves the smallest nonzero entry of the remaining block to the
    pivot and takes remainders of its row and column against it until both
    are clear. The resulting diagonal is put in divisibility order by repeated
    ``(a, b) -> (gcd, lcm)`` on pairs.
    """
    M = [list(map(int, r)) for r in A]
    m = len(M)
    n = len(M[0]) if m else 0
    diag = []
    for t in range(min(m, n)):
        while True:
            cells = [(abs(M[i][j]), i, j) for i in range(t, m) for j in range(t, n) if M[i][j]]
            if not cells:
                break
            _, i0, j0 = min(cells)
            M[t], M[i0] = M[i0], M[t]
            for row in M:
                row[t], row[j0] = row[j0], row[t]
            p = M[t][t]
            for i in range(t + 1, m):
                q = M[i][t] // p
                if q:
                    M[i] = [a - q * b for a, b in zip(M[i], M[t])]
            for j in range(t + 1, n):
                q = M[t][j] // p
                if q:
                    for row in M:
                        row[j] -= q * row[t]
            if all(M[i][t] == 0 for i in range(t + 1, m)) and all(M[t][j] == 0 for j in range(t + 1, n)):
                break
        if not M[t][t]:
            break
        diag.append(abs(M[t][t]))
    for i in range(len(diag)):
        for j in range(i + 1, len(diag)):
            a, b = diag[i], diag[j]
            g = math.gcd(a, b)
            diag[i], diag[j] = g, a * b // g
    return diag


def det_int(A: list[list[int]]) -> int:
    """Exact determinant by fraction elimination."""
    n = len(A)
    M = [[Fraction(v) for v in r] for r in A]
    det = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c] != 0), None)
        if piv is None:
            return 0
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            det = -det
        det *= M[c][c]
        for i in range(c + 1, n):
            f = M[i][c] / M[c][c]
            M[i] = [a - f * b for a, b in zip(M[i], M[c])]
    return int(det)


def determinantal_factors(A: list[list[int]]) -> list[int]:
    """Invariant factors from gcds of k x k minors; only for tiny matrices."""
    m = len(A)
    n = len(A[0]) if m else 0
    divisors = [1]
    for k in range(1, min(m, n) + 1):
        g = 0
        for rows in itertools.combinations(range(m), k):
            for cols in itertools.combinations(range(n), k):
                g = math.gcd(g, det_int([[A[i][j] for j in cols] for i in rows]))
        if g == 0:
            break
        divisors.append(g)
    return [divisors[k] // divisors[k - 1] for k in range(1, len(divisors))]


def rank_q(A) -> int:
    """Rank over the rationals."""
    M = [[Fraction(int(v)) for v in r] for r in A]
    if not M or not M[0]:
        return 0
    rank, m, n = 0, len(M), len(M[0])
    for c in range(n):
        piv = next((i for i in range(rank, m) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[rank], M[piv] = M[piv], M[rank]
        for i in range(m):
            if i != rank and M[i][c] != 0:
                f = M[i][c] / M[rank][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[rank])]
        rank += 1
    return rank


def matmul(A, B):
    return [[sum(int(A[i][t]) * int(B[t][j]) for t in range(len(B))) for j in range(len(B[0]) if B else 0)]
            for i in range(len(A))]


def rational_homology(dims: dict[int, int], boundary: dict[int, list[list[int]]]) -> dict[int, int]:
    """Betti numbers over Q for boundary maps ``boundary[k]: C_k -> C_{k-1}``."""
    def r(k):
        M = boundary.get(k)
        return rank_q(M) if M and dims.get(k, 0) and dims.get(k - 1, 0) else 0
    return {k: dims.get(k, 0) - r(k) - r(k + 1) for k in dims}


def is_dominated(u: list[float], s: list[float], i: int) -> bool:
    """Definition check by double loop: another point is closer to x on both branches."""
    return any(j != i and u[j] < u[i] and s[j] < s[i] for j in range(len(u)))


def fd_jacobian(f, z, h: float = 1e-6):
    """Central finite-difference Jacobian of ``f: (x, y) -> (x', y')``."""
    x, y = z
    fx1, fx0 = f(x + h, y), f(x - h, y)
    fy1, fy0 = f(x, y + h), f(x, y - h)
    return [[(fx1[0] - fx0[0]) / (2 * h), (fy1[0] - fy0[0]) / (2 * h)],
            [(fx1[1] - fx0[1]) / (2 * h), (fy1[1] - fy0[1]) / (2 * h)]]


def fd_newton_fixed_point(f, guess, iters: int = 60, tol: float = 1e-14):
    """Newton on ``f(z) - z`` with a finite-difference Jacobian and Cramer's rule."""
    x, y = guess
    for _ in range(iters):
        fx, fy = f(x, y)
        rx, ry = fx - x, fy - y
        J = fd_jacobian(f, (x, y))
        a, b, c, d = J[0][0] - 1.0, J[0][1], J[1][0], J[1][1] - 1.0
        det = a * d - b * c
        dx = (-rx * d + ry * b) / det
        dy = (-ry * a + rx * c) / det
        x, y = x + dx, y + dy
        if abs(dx) + abs(dy) < tol:
            break
    return x, y
