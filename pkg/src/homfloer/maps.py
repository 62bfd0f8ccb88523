"""Catalogue of area-preserving planar maps with a hyperbolic fixed point.

Every model carries analytic forward/inverse maps and an analytic Jacobian;
Newton refinement elsewhere relies on the latter being exact.  Arrays of
points are passed as separate coordinate arrays ``q, p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import kernels
from .errors import NoConvergence, NotHyperbolic, OrbitEscaped, OrientationReversing

Array = np.ndarray
PlanarMap = Callable[[Array, Array], tuple[Array, Array]]
JacobianField = Callable[[Array, Array], tuple[Array, Array, Array, Array]]

DEFAULT_BBOX = (-10.0, 10.0, -10.0, 10.0)
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class MapModel:
    """An analytic area-preserving map of the plane.

    ``jacobian(q, p)`` returns the entries ``(a, b, c, d)`` of
    ``[[dq'/dq, dq'/dp], [dp'/dq, dp'/dp]]``.  ``kernel`` names the compiled
    implementation (model id and numeric parameters) when one exists;
    ``repeat`` > 1 means the model is an iterate of that kernel map.
    """

    name: str
    params: tuple[tuple[str, float], ...]
    forward: PlanarMap = field(repr=False, compare=False)
    inverse: PlanarMap = field(repr=False, compare=False)
    jacobian: JacobianField = field(repr=False, compare=False)
    kernel: tuple[int, tuple[float, ...]] | None = None
    repeat: int = 1
    bbox: tuple[float, float, float, float] = DEFAULT_BBOX

    def param(self, key: str) -> float:
        return dict(self.params)[key]

    def with_bbox(self, bbox) -> "MapModel":
        return replace(self, bbox=tuple(float(v) for v in bbox))


def _kernel_model(name, params, model_id, kparams, jacobian, bbox=DEFAULT_BBOX) -> MapModel:
    kp = np.asarray(kparams, dtype=float)

    def forward(q, p):
        return kernels.step(model_id, kp, np.asarray(q, float), np.asarray(p, float))

    def inverse(q, p):
        return kernels.step(model_id, kp, np.asarray(q, float), np.asarray(p, float), inverse=True)

    return MapModel(name, tuple(params), forward, inverse, jacobian, (model_id, tuple(kparams)), 1, bbox)


def standard_map(k: float, bbox=DEFAULT_BBOX) -> MapModel:
    """Lift of the Chirikov standard map to the plane.

    ``p' = p + k/(2 pi) sin(2 pi q)``, ``q' = q + p'``; fixed point ``(0, 0)``
    with trace ``2 + k``.
    """

    def jac(q, p):
        c = k * np.cos(TWO_PI * np.asarray(q, float))
        one = np.ones_like(c)
        return 1.0 + c, one, c, one

    return _kernel_model("standard", [("k", float(k))], kernels.STANDARD, [float(k)], jac, bbox)


def cubic_henon(a: float, bbox=DEFAULT_BBOX) -> MapModel:
    """Cubic area-preserving Henon-type map ``(x, y) -> (y, -x + (2+a) y - a y^3)``.

    The origin is a saddle with trace ``2 + a``; ``(+-1, +-1)`` are elliptic
    for ``0 < a < 2``, and each unstable branch loops around one of them.
    """

    def jac(q, p):
        p = np.asarray(p, float)
        zero = np.zeros_like(p)
        return zero, zero + 1.0, zero - 1.0, (2.0 + a) - 3.0 * a * p * p

    return _kernel_model("cubic_henon", [("a", float(a))], kernels.CUBIC_HENON, [float(a)], jac, bbox)


def pendulum_verlet(tau: float = 0.1, bbox=DEFAULT_BBOX) -> MapModel:
    """Time-1 map of the pendulum ``H = p^2/2 - cos q`` by Stormer-Verlet.

    Uses ``round(1/tau)`` leapfrog steps of size ``tau``; the saddle sits at
    ``(pi, 0)``.
    """
    nsteps = max(1, int(round(1.0 / tau)))
    h = 0.5 * tau

    def jac(q, p):
        q = np.array(q, float, copy=True)
        p = np.array(p, float, copy=True)
        a, b, c, d = np.ones_like(q), np.zeros_like(q), np.zeros_like(q), np.ones_like(q)
        for _ in range(nsteps):
            # kick-drift-kick: each factor is unimodular
            k1 = -h * np.cos(q)
            c, d = c + k1 * a, d + k1 * b
            p = p - h * np.sin(q)
            a, b = a + tau * c, b + tau * d
            q = q + tau * p
            k2 = -h * np.cos(q)
            c, d = c + k2 * a, d + k2 * b
            p = p - h * np.sin(q)
        return a, b, c, d

    return _kernel_model(
        "pendulum_verlet", [("tau", float(tau))], kernels.PENDULUM_VERLET, [float(tau), float(nsteps)], jac, bbox
    )


def linear_saddle(lam: float = 2.0, bbox=DEFAULT_BBOX) -> MapModel:
    """``(q, p) -> (lam q, p / lam)``; both manifolds are coordinate axes."""

    def jac(q, p):
        q = np.asarray(q, float)
        return np.full_like(q, lam), np.zeros_like(q), np.zeros_like(q), np.full_like(q, 1.0 / lam)

    return _kernel_model(
        "linear", [("lam", float(lam))], kernels.LINEAR, [lam, 0.0, 0.0, 1.0 / lam], jac, bbox
    )


CATALOGUE: dict[str, Callable[..., MapModel]] = {
    "standard": standard_map,
    "cubic_henon": cubic_henon,
    "pendulum_verlet": pendulum_verlet,
    "linear": linear_saddle,
}


def model_from_name(name: str, params: dict[str, float] | None = None, bbox=DEFAULT_BBOX) -> MapModel:
    try:
        factory = CATALOGUE[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(CATALOGUE)}") from None
    return factory(**(params or {}), bbox=bbox)


def squared(model: MapModel) -> MapModel:
    """The map composed with itself; always W-orientation preserving."""
    f, g, jac = model.forward, model.inverse, model.jacobian

    def forward(q, p):
        return f(*f(q, p))

    def inverse(q, p):
        return g(*g(q, p))

    def jac2(q, p):
        a1, b1, c1, d1 = jac(q, p)
        a2, b2, c2, d2 = jac(*f(q, p))
        return a2 * a1 + b2 * c1, a2 * b1 + b2 * d1, c2 * a1 + d2 * c1, c2 * b1 + d2 * d1

    return replace(
        model,
        name=f"{model.name}^2",
        forward=forward,
        inverse=inverse,
        jacobian=jac2,
        repeat=model.repeat * 2,
    )


def iterate_points(model: MapModel, q, p, counts, inverse: bool = False):
    """Apply the map ``counts[i]`` times to each point; see ``kernels.iterate``."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    counts = np.broadcast_to(np.asarray(counts, dtype=np.int64), q.shape)
    if model.kernel is not None:
        mid, kp = model.kernel
        return kernels.iterate(mid, np.asarray(kp, float), q, p, counts, inverse, model.bbox, model.repeat)
    fn = model.inverse if inverse else model.forward
    q, p = q.copy(), p.copy()
    escaped = np.zeros(q.shape, dtype=bool)
    xmin, xmax, ymin, ymax = model.bbox
    for j in range(int(counts.max()) if counts.size else 0):
        idx = np.nonzero((counts > j) & ~escaped)[0]
        if idx.size == 0:
            break
        q2, p2 = fn(q[idx], p[idx])
        out = ~(np.isfinite(q2) & np.isfinite(p2) & (q2 >= xmin) & (q2 <= xmax) & (p2 >= ymin) & (p2 <= ymax))
        escaped[idx[out]] = True
        q[idx[~out]] = q2[~out]
        p[idx[~out]] = p2[~out]
    return q, p, escaped


def eval_forward(model: MapModel, z, n: int) -> np.ndarray:
    """Return the ``n``-th iterate of point ``z`` (``n < 0`` uses the inverse)."""
    z = np.asarray(z, dtype=float)
    if n == 0:
        return z.copy()
    q, p, esc = iterate_points(model, [z[0]], [z[1]], [abs(n)], inverse=n < 0)
    if esc[0]:
        raise OrbitEscaped(f"orbit of {tuple(map(float, z))} left the bounding box {model.bbox} within {n} steps")
    return np.array([q[0], p[0]])


def jacobian_matrix(model: MapModel, z) -> np.ndarray:
    a, b, c, d = model.jacobian(np.array([z[0]], float), np.array([z[1]], float))
    return np.array([[a[0], b[0]], [c[0], d[0]]])


def inverse_jacobian(model: MapModel, q, p):
    """Jacobian entries of the inverse map at ``(q, p)`` (adjugate of the forward one)."""
    q0, p0 = model.inverse(np.asarray(q, float), np.asarray(p, float))
    a, b, c, d = model.jacobian(q0, p0)
    det = a * d - b * c
    return d / det, -b / det, -c / det, a / det


@dataclass(frozen=True)
class HyperbolicFixedPoint:
    location: np.ndarray
    lam: float
    unstable_dir: np.ndarray
    stable_dir: np.ndarray
    w_orientation_preserving: bool
    eigenvalues: tuple[float, float]


def _canonical(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    # '+' branch convention: first nonzero component positive
    if v[0] < -1e-14 or (abs(v[0]) <= 1e-14 and v[1] < 0):
        v = -v
    return v


def _eigvec(J: np.ndarray, mu: float) -> np.ndarray:
    a, b, c, d = J.ravel()
    v1 = np.array([b, mu - a])
    v2 = np.array([mu - d, c])
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    if np.linalg.norm(v) == 0.0:
        # J is a multiple of the identity along this eigenvalue
        v = np.array([1.0, 0.0]) if abs(a - mu) < abs(d - mu) else np.array([0.0, 1.0])
    return _canonical(v)


def find_fixed_point(model: MapModel, guess, *, max_iter: int = 50, allow_reversing: bool = False) -> HyperbolicFixedPoint:
    """Newton-polish a fixed point and classify its linearization.

    Raises ``NoConvergence`` after ``max_iter`` steps, ``NotHyperbolic`` when an
    eigenvalue is complex or within 1e-8 of the unit circle, and
    ``OrientationReversing`` for negative eigenvalues unless
    ``allow_reversing`` (then the flag is returned False; see ``squared``).
    """
    z = np.asarray(guess, dtype=float).copy()
    for _ in range(max_iter):
        fz = model.forward(np.array([z[0]]), np.array([z[1]]))
        r = np.array([fz[0][0], fz[1][0]]) - z
        if np.max(np.abs(r)) < 1e-15 * max(1.0, np.max(np.abs(z))):
            break
        J = jacobian_matrix(model, z) - np.eye(2)
        try:
            dz = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            raise NotHyperbolic(f"not hyperbolic: Dphi - I is singular at {tuple(map(float, z))}") from None
        z = z + dz
        if np.max(np.abs(dz)) < 1e-16 * max(1.0, np.max(np.abs(z))):
            break
    else:
        raise NoConvergence(f"Newton did not converge from {tuple(guess)} in {max_iter} steps")
    fz = model.forward(np.array([z[0]]), np.array([z[1]]))
    if np.hypot(fz[0][0] - z[0], fz[1][0] - z[1]) > 1e-12:
        raise NoConvergence(f"Newton did not converge from {tuple(guess)} in {max_iter} steps")

    J = jacobian_matrix(model, z)
    tr, det = np.trace(J), np.linalg.det(J)
    disc = tr * tr - 4.0 * det
    if disc < 0:
        raise NotHyperbolic(f"not hyperbolic: complex eigenvalues at {tuple(map(float, z))} (trace {tr:.6g})")
    s = math.sqrt(disc)
    ev = sorted([(tr + s) / 2.0, (tr - s) / 2.0], key=abs)
    if any(abs(abs(e) - 1.0) <= 1e-8 for e in ev):
        raise NotHyperbolic(f"not hyperbolic: eigenvalues {[float(e) for e in ev]} on the unit circle at {tuple(map(float, z))}")
    mu_s, mu_u = ev
    preserving = mu_u > 0 and mu_s > 0
    if not preserving and not allow_reversing:
        raise OrientationReversing(
            f"negative eigenvalues {[float(e) for e in ev]} at {tuple(map(float, z))}: branches are swapped; use squared(model)"
        )
    return HyperbolicFixedPoint(
        location=z,
        lam=abs(mu_u),
        unstable_dir=_eigvec(J, mu_u),
        stable_dir=_eigvec(J, mu_s),
        w_orientation_preserving=preserving,
        eigenvalues=(mu_u, mu_s),
    )


@dataclass(frozen=True)
class SymplecticReport:
    samples: int
    max_deviation: float
    worst_point: tuple[float, float]


def validate_symplectic(model: MapModel, samples: int, seed: int = 0) -> SymplecticReport:
    """Max ``|det Dphi - 1|`` over uniform samples of the bounding box."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    xmin, xmax, ymin, ymax = model.bbox
    q = rng.uniform(xmin, xmax, samples)
    p = rng.uniform(ymin, ymax, samples)
    a, b, c, d = model.jacobian(q, p)
    dev = np.abs(a * d - b * c - 1.0)
    k = int(np.argmax(dev))
    return SymplecticReport(samples, float(dev[k]), (float(q[k]), float(p[k])))
