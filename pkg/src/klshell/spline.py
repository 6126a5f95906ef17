"""Univariate and tensor-product B-spline / NURBS spaces.

Everything here works on batches of points: the univariate kernel is the
standard triangular-table algorithm for basis functions and their
derivatives, vectorized over the leading point axis.  Rational spaces apply
the generalized quotient rule on top of the polynomial rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from math import comb
from typing import Sequence

import numpy as np

from .errors import ConstructionError, DomainError, UnsupportedDegreeError

#: Highest derivative order that rational evaluation is validated for.
MAX_ORDER = 3
_DOMAIN_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Non-decreasing knot sequence together with the spline degree.

    Args:
        knots: the knot values.
        degree: polynomial degree ``p >= 0``.
        reduced: skip the open-end check (interior-style vectors).
    """

    knots: np.ndarray
    degree: int
    reduced: bool = False

    def __post_init__(self):
        kv = np.asarray(self.knots, dtype=float).copy()
        kv.setflags(write=False)
        object.__setattr__(self, "knots", kv)
        p = int(self.degree)
        object.__setattr__(self, "degree", p)
        if kv.ndim != 1:
            raise ConstructionError("knots must be one-dimensional")
        if p < 0:
            raise ConstructionError("degree must be non-negative")
        if np.any(np.diff(kv) < 0):
            raise ConstructionError("knots must be non-decreasing")
        if kv.size - p - 1 < 1:
            raise ConstructionError("knot vector too short for the degree")
        if kv[p] >= kv[kv.size - p - 1]:
            raise ConstructionError("degenerate (zero-length) knot vector")
        if not self.reduced:
            if np.any(kv[: p + 1] != kv[0]) or np.any(kv[-p - 1 :] != kv[-1]):
                raise ConstructionError("knot vector is not open")

    def __repr__(self):
        return f"KnotVector({self.knots.tolist()!r}, degree={self.degree})"

    @property
    def n(self) -> int:
        """Number of basis functions."""
        return self.knots.size - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[self.degree]), float(self.knots[self.n])

    @property
    def breakpoints(self) -> np.ndarray:
        a, b = self.domain
        u = np.unique(self.knots)
        return u[(u >= a) & (u <= b)]

    @property
    def interior_knots(self) -> np.ndarray:
        bp = self.breakpoints
        return bp[1:-1]

    @property
    def num_elements(self) -> int:
        return self.breakpoints.size - 1

    def multiplicity(self, u: float) -> int:
        return int(np.sum(self.knots == u))

    def support(self, i: int) -> tuple[float, float]:
        return float(self.knots[i]), float(self.knots[i + self.degree + 1])

    def find_span(self, u) -> np.ndarray:
        """Knot-span index ``s`` with ``knots[s] <= u < knots[s+1]`` (right end closed)."""
        u = np.asarray(u, dtype=float)
        s = np.searchsorted(self.knots, u, side="right") - 1
        return np.clip(s, self.degree, self.n - 1)

    def check_domain(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        a, b = self.domain
        tol = _DOMAIN_TOL * max(1.0, b - a)
        if np.any(u < a - tol) or np.any(u > b + tol):
            bad = u[(u < a - tol) | (u > b + tol)][0]
            raise DomainError(f"parameter {bad!r} outside [{a}, {b}]")
        return np.clip(u, a, b)


def uniform_knots(degree: int, n_elements: int, domain=(0.0, 1.0)) -> KnotVector:
    """Open knot vector with ``n_elements`` equal spans and maximal smoothness."""
    a, b = domain
    interior = np.linspace(a, b, n_elements + 1)[1:-1]
    return open_knots(degree, interior, domain)


def open_knots(degree: int, interior: Sequence[float], domain=(0.0, 1.0)) -> KnotVector:
    a, b = domain
    kv = np.concatenate([[a] * (degree + 1), np.sort(np.asarray(interior, float)), [b] * (degree + 1)])
    return KnotVector(kv, degree)


def basis_ders(kv: KnotVector, u, k: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Nonzero basis functions and their derivatives at many parameters.

    Returns:
        ``(spans, ders)`` where ``ders[m, j, r]`` is the ``j``-th derivative of
        basis function ``spans[m] - p + r`` at ``u[m]``.  Orders above ``p``
        are zero.
    """
    u = kv.check_domain(u)
    p = kv.degree
    t = kv.knots
    spans = kv.find_span(u)
    npts = u.size
    ndu = np.zeros((npts, p + 1, p + 1))
    ndu[:, 0, 0] = 1.0
    left = np.zeros((npts, p + 1))
    right = np.zeros((npts, p + 1))
    for j in range(1, p + 1):
        left[:, j] = u - t[spans + 1 - j]
        right[:, j] = t[spans + j] - u
        saved = np.zeros(npts)
        for r in range(j):
            ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
            temp = ndu[:, r, j - 1] / ndu[:, j, r]
            ndu[:, r, j] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        ndu[:, j, j] = saved

    ders = np.zeros((npts, k + 1, p + 1))
    ders[:, 0, :] = ndu[:, :, p]
    kmax = min(k, p)
    a = np.zeros((npts, 2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[:] = 0.0
        a[:, 0, 0] = 1.0
        for kk in range(1, kmax + 1):
            d = np.zeros(npts)
            rk, pk = r - kk, p - kk
            if r >= kk:
                a[:, s2, 0] = a[:, s1, 0] / ndu[:, pk + 1, rk]
                d = a[:, s2, 0] * ndu[:, rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = kk - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[:, s2, j] = (a[:, s1, j] - a[:, s1, j - 1]) / ndu[:, pk + 1, rk + j]
                d = d + a[:, s2, j] * ndu[:, rk + j, pk]
            if r <= pk:
                a[:, s2, kk] = -a[:, s1, kk - 1] / ndu[:, pk + 1, r]
                d = d + a[:, s2, kk] * ndu[:, r, pk]
            ders[:, kk, r] = d
            s1, s2 = s2, s1
    fac = float(p)
    for kk in range(1, kmax + 1):
        ders[:, kk, :] *= fac
        fac *= p - kk
    return spans, ders


@dataclass(frozen=True)
class BasisEval:
    """Nonzero univariate functions at one parameter.

    ``values[j, r]`` is the ``j``-th derivative of function ``span - p + r``.
    """

    span: int
    values: np.ndarray

    @property
    def indices(self) -> np.ndarray:
        p = self.values.shape[1] - 1
        return np.arange(self.span - p, self.span + 1)


def eval_basis(kv: KnotVector, u: float, k: int = 0) -> BasisEval:
    spans, ders = basis_ders(kv, np.array([u], dtype=float), k)
    return BasisEval(int(spans[0]), ders[0])


def deriv_orders(k: int, dim: int) -> list[tuple[int, ...]]:
    """Multi-indices of total order ``<= k`` sorted by total order.

    For surfaces this is ``(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...``.
    """
    out = []
    for total in range(k + 1):
        for idx in product(range(total, -1, -1), repeat=dim):
            if sum(idx) == total:
                out.append(idx)
    return out


@dataclass
class TensorBasisEval:
    """Nonzero tensor-product functions at a batch of points.

    Attributes:
        indices: ``(npts, nloc)`` global function indices (row-major).
        values: ``(npts, nderiv, nloc)`` derivatives ordered as
            :func:`deriv_orders`.
        orders: the derivative multi-indices.
    """

    indices: np.ndarray
    values: np.ndarray
    orders: list
    _pos: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._pos = {o: i for i, o in enumerate(self.orders)}

    def d(self, *order: int) -> np.ndarray:
        return self.values[:, self._pos[tuple(order)], :]


class SplineSpace:
    """Tensor product of univariate spaces, optionally rational.

    Function ``(i, j)`` has flat index ``i * n2 + j``.
    """

    def __init__(self, knot_vectors: Sequence[KnotVector], weights=None):
        self.knot_vectors = tuple(knot_vectors)
        if not 1 <= len(self.knot_vectors) <= 2:
            raise ConstructionError("only curves and surfaces are supported")
        if weights is not None:
            weights = np.asarray(weights, dtype=float).reshape(-1).copy()
            if weights.size != self.dim:
                raise ConstructionError(
                    f"expected {self.dim} weights, got {weights.size}")
            if np.any(weights <= 0):
                raise ConstructionError("weights must be strictly positive")
            weights.setflags(write=False)
        self.weights = weights

    def __repr__(self):
        kind = "rational " if self.is_rational else ""
        return f"<{kind}SplineSpace degrees={self.degrees} shape={self.shape}>"

    @property
    def pdim(self) -> int:
        return len(self.knot_vectors)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(kv.n for kv in self.knot_vectors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(kv.degree for kv in self.knot_vectors)

    @property
    def is_rational(self) -> bool:
        return self.weights is not None

    @property
    def nloc(self) -> int:
        return int(np.prod([p + 1 for p in self.degrees]))

    def eval(self, points, k: int = 0) -> TensorBasisEval:
        return eval_tensor_basis(self, points, k)


def eval_tensor_basis(space: SplineSpace, points, k: int = 0) -> TensorBasisEval:
    """Evaluate all nonzero functions of ``space`` (and derivatives to order ``k``)."""
    pts = np.asarray(points, dtype=float)
    if space.pdim == 1:
        pts = pts.reshape(-1, 1)
    else:
        pts = pts.reshape(-1, space.pdim)
    orders = deriv_orders(k, space.pdim)
    npts = pts.shape[0]

    if space.pdim == 1:
        kv = space.knot_vectors[0]
        spans, ders = basis_ders(kv, pts[:, 0], k)
        idx = spans[:, None] - kv.degree + np.arange(kv.degree + 1)[None, :]
        vals = np.ascontiguousarray(ders)
    else:
        kv1, kv2 = space.knot_vectors
        p1, p2 = kv1.degree, kv2.degree
        s1, d1 = basis_ders(kv1, pts[:, 0], k)
        s2, d2 = basis_ders(kv2, pts[:, 1], k)
        n2 = kv2.n
        i1 = s1[:, None] - p1 + np.arange(p1 + 1)[None, :]
        i2 = s2[:, None] - p2 + np.arange(p2 + 1)[None, :]
        idx = (i1[:, :, None] * n2 + i2[:, None, :]).reshape(npts, -1)
        vals = np.empty((npts, len(orders), (p1 + 1) * (p2 + 1)))
        for m, (a, b) in enumerate(orders):
            vals[:, m, :] = (d1[:, a, :, None] * d2[:, b, None, :]).reshape(npts, -1)

    if space.is_rational:
        vals = _rationalize(vals, space.weights[idx], orders)
    return TensorBasisEval(idx, vals, orders)


def _rationalize(vals: np.ndarray, w: np.ndarray, orders: list) -> np.ndarray:
    """Quotient rule for ``R = N w / W`` applied order by order."""
    pos = {o: i for i, o in enumerate(orders)}
    A = vals * w[:, None, :]
    W = A.sum(axis=2)
    R = np.empty_like(vals)
    zero = orders[0]
    for m, o in enumerate(orders):
        acc = A[:, m, :].copy()
        for sub in product(*(range(oi + 1) for oi in o)):
            if sub == zero:
                continue
            c = 1
            for oi, si in zip(o, sub):
                c *= comb(oi, si)
            rest = tuple(oi - si for oi, si in zip(o, sub))
            acc -= c * W[:, pos[sub], None] * R[:, pos[rest], :]
        R[:, m, :] = acc / W[:, 0, None]
    return R


# ---------------------------------------------------------------- refinement

def insert_knots(kv: KnotVector, new_knots) -> tuple[KnotVector, np.ndarray]:
    """Insert knots one at a time; returns the refined vector and ``T`` with
    ``coef_fine = T @ coef_coarse`` for polynomial coefficients."""
    new_knots = np.sort(np.atleast_1d(np.asarray(new_knots, dtype=float)))
    a, b = kv.domain
    if np.any(new_knots <= a) or np.any(new_knots >= b):
        raise ConstructionError("inserted knots must lie strictly inside the domain")
    p = kv.degree
    t = kv.knots.copy()
    T = np.eye(kv.n)
    for u in new_knots:
        if np.sum(t == u) + 1 > p + 1:
            raise ConstructionError(f"knot {u} would exceed multiplicity {p + 1}")
        n = t.size - p - 1
        s = int(np.searchsorted(t, u, side="right") - 1)
        step = np.zeros((n + 1, n))
        for i in range(n + 1):
            if i <= s - p:
                step[i, i] = 1.0
            elif i >= s + 1:
                step[i, i - 1] = 1.0
            else:
                alpha = (u - t[i]) / (t[i + p] - t[i])
                step[i, i] = alpha
                step[i, i - 1] = 1.0 - alpha
        T = step @ T
        t = np.insert(t, s + 1, u)
    return KnotVector(t, p, reduced=kv.reduced), T


def h_refine(space: SplineSpace, new_knots: Sequence) -> tuple[SplineSpace, np.ndarray]:
    """Knot insertion in every direction.

    ``new_knots`` holds one list per direction.  The returned matrix maps
    coefficients in the coarse basis to coefficients in the fine basis, so
    ``sum_a R_a c_a`` is reproduced exactly (also for rational spaces).
    """
    if len(new_knots) != space.pdim:
        raise ConstructionError("need one knot list per parametric direction")
    kvs, Ts = [], []
    for kv, nk in zip(space.knot_vectors, new_knots):
        if len(nk) == 0:
            kvs.append(kv)
            Ts.append(np.eye(kv.n))
        else:
            kf, T = insert_knots(kv, nk)
            kvs.append(kf)
            Ts.append(T)
    T = Ts[0] if len(Ts) == 1 else np.kron(Ts[0], Ts[1])
    if space.is_rational:
        w_fine = T @ space.weights
        fine = SplineSpace(kvs, w_fine)
        T = (T * space.weights[None, :]) / w_fine[:, None]
    else:
        fine = SplineSpace(kvs)
    return fine, T


def dyadic_midpoints(kv: KnotVector) -> np.ndarray:
    bp = kv.breakpoints
    return 0.5 * (bp[:-1] + bp[1:])


def build_reduced_space(interface_kv: KnotVector) -> SplineSpace:
    """Degree ``p-2`` space obtained by dropping the two outer knots at each end."""
    p = interface_kv.degree
    if p < 2:
        raise UnsupportedDegreeError(f"reduced space needs degree >= 2, got {p}")
    return SplineSpace([KnotVector(interface_kv.knots[2:-2], p - 2,
                                   reduced=interface_kv.reduced)])


# ---------------------------------------------------------------- curves

class SplineCurve:
    """Spline curve ``[a, b] -> R^dim`` (polynomial or rational)."""

    def __init__(self, space: SplineSpace, control_points):
        if space.pdim != 1:
            raise ConstructionError("curve space must be univariate")
        cp = np.asarray(control_points, dtype=float)
        if cp.ndim != 2 or cp.shape[0] != space.dim:
            raise ConstructionError(
                f"expected {space.dim} control points, got shape {cp.shape}")
        self.space = space
        self.control_points = cp

    @classmethod
    def from_points(cls, degree: int, control_points, interior=(), weights=None):
        cp = np.asarray(control_points, dtype=float)
        kv = open_knots(degree, interior)
        if kv.n != cp.shape[0]:
            raise ConstructionError("control point count does not match knots")
        return cls(SplineSpace([kv], weights), cp)

    @classmethod
    def line(cls, start, end):
        return cls.from_points(1, [start, end])

    @property
    def knot_vector(self) -> KnotVector:
        return self.space.knot_vectors[0]

    @property
    def degree(self) -> int:
        return self.knot_vector.degree

    @property
    def domain(self) -> tuple[float, float]:
        return self.knot_vector.domain

    def __call__(self, t) -> np.ndarray:
        return self.derivatives(t, 0)[:, 0, :]

    def derivatives(self, t, k: int = 1) -> np.ndarray:
        """``(npts, k+1, dim)`` array of the curve and its derivatives."""
        ev = eval_tensor_basis(self.space, np.atleast_1d(t), k)
        return np.einsum("nda,nac->ndc", ev.values, self.control_points[ev.indices])

    def reversed(self) -> "SplineCurve":
        kv = self.knot_vector
        a, b = kv.domain
        knots = (a + b) - kv.knots[::-1]
        w = None if self.space.weights is None else self.space.weights[::-1]
        return SplineCurve(SplineSpace([KnotVector(knots, kv.degree)], w),
                           self.control_points[::-1])

    def transformed(self, func) -> "SplineCurve":
        """Apply an affine map to the control points."""
        return SplineCurve(self.space, func(self.control_points))
