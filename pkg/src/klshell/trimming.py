"""Parametric trimming of tensor-product patches.

The kept region of a patch is the intersection of the left-hand sides of its
trim curves (looking along the direction of travel).  Each curve must start
and end on the boundary of the unit square.  Cut elements are decomposed into
slabs bounded by element edges and trim-curve pieces; each kept band becomes a
quadrature subcell whose curved edge follows the trim curve exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import ConstructionError, TrimmingError
from .numerics import gauss_rule
from .spline import SplineCurve, SplineSpace

TOL = 1e-12
SLIVER = 1e-12


class Label(IntEnum):
    OUTSIDE = 0
    INSIDE = 1
    CUT = 2


class TrimCurve:
    """Polynomial spline curve in the unit square with the kept side on its left."""

    def __init__(self, curve: SplineCurve, keep_left: bool = True):
        if curve.space.is_rational:
            raise ConstructionError("trim curves must be polynomial")
        if curve.degree > 3:
            raise ConstructionError("trim curve degree must be at most 3")
        if curve.control_points.shape[1] != 2:
            raise ConstructionError("trim curves live in the 2D parameter domain")
        self.source = curve
        self.keep_left = bool(keep_left)
        self.curve = curve if keep_left else curve.reversed()
        a, b = self.curve.domain
        if (a, b) != (0.0, 1.0):
            raise ConstructionError("trim curves must be parametrized over [0, 1]")
        for end in self.curve(np.array([0.0, 1.0])):
            if _perimeter_coord(end) is None:
                raise TrimmingError(f"trim curve endpoint {end} is not on the domain boundary")
        self._polys = _span_polynomials(self.curve)
        self._check_simple()

    def __call__(self, t):
        return self.curve(t)

    def derivatives(self, t, k=1):
        return self.curve.derivatives(t, k)

    @property
    def spans(self):
        return self._polys

    def _check_simple(self, n=400):
        t = np.linspace(0.0, 1.0, n + 1)
        P = self.curve(t)
        seg = np.diff(P, axis=0)
        # crude O(n^2) test on the polyline, skipping neighbouring segments
        for i in range(n - 2):
            a, d = P[i], seg[i]
            b = P[i + 2:-1]
            e = seg[i + 2:]
            den = d[0] * e[:, 1] - d[1] * e[:, 0]
            ok = np.abs(den) > 1e-300
            r = b - a
            s = np.where(ok, (r[:, 0] * e[:, 1] - r[:, 1] * e[:, 0]) / np.where(ok, den, 1), -1)
            u = np.where(ok, (r[:, 0] * d[1] - r[:, 1] * d[0]) / np.where(ok, den, 1), -1)
            if np.any((s > 1e-9) & (s < 1 - 1e-9) & (u > 1e-9) & (u < 1 - 1e-9)):
                raise TrimmingError("trim curve intersects itself")

    def component_roots(self, axis: int, c: float) -> np.ndarray:
        """Curve parameters where coordinate ``axis`` equals ``c``."""
        return intersect_curve_gridline(self, axis, c)

    def left_of(self, points) -> np.ndarray:
        """Boolean mask of points lying on the kept side."""
        pts = np.array(np.atleast_2d(points), dtype=float)
        count = np.zeros(len(pts), dtype=np.int64)
        ends = self.curve(np.array([0.0, 1.0]))
        # snap ordinates level with a curve end so every test below sees the same value
        for y_end in ends[:, 1]:
            pts[np.abs(pts[:, 1] - y_end) <= END_TOL, 1] = y_end
        for (ta, tb, px, py), last in zip(self._polys, _last_flags(len(self._polys))):
            k, r = _batched_real_roots(py, pts[:, 1], ta, tb, closed_right=last)
            right = np.polyval(px, r) > pts[k, 0]
            for t, y_end in ((0.0, ends[0, 1]), (1.0, ends[1, 1])):
                # the curve end points are counted below, once, with the closing path rule
                right &= ~((np.abs(r - t) < 1e-6) & (pts[k, 1] == y_end))
            np.add.at(count, k[right], 1)
        for t, sign in ((0.0, 1.0), (1.0, -1.0)):
            d = self.curve.derivatives(np.array([t]), max(self.curve.degree, 1))[0]
            x, y = ends[int(t)]
            # an edge owns its lower end: count the end point if the curve rises away from it
            rise = next((v for v in (sign ** j * d[j, 1] for j in range(1, len(d)))
                         if abs(v) > 1e-14), 0.0)
            hit = (pts[:, 1] == y) & (x > pts[:, 0])
            count += (hit & (rise > 0)).astype(np.int64)
        # closing path along the boundary, counter-clockwise from end to start
        for a, b in self._closing_path():
            y1, y2 = a[1], b[1]
            up = (y1 <= pts[:, 1]) & (pts[:, 1] < y2)
            down = (y2 <= pts[:, 1]) & (pts[:, 1] < y1)
            hit = up | down
            with np.errstate(divide="ignore", invalid="ignore"):
                xc = a[0] + (pts[:, 1] - y1) * (b[0] - a[0]) / (y2 - y1)
            count += (hit & (xc > pts[:, 0])).astype(np.int64)
        return count % 2 == 1

    def _closing_path(self):
        P = self.curve(np.array([0.0, 1.0]))
        s0 = _perimeter_coord(P[1])
        s1 = _perimeter_coord(P[0])
        if s1 <= s0 + 1e-14:
            s1 += 4.0
        stops = [s0] + [c for c in range(1, 9) if s0 < c < s1] + [s1]
        pts = [_perimeter_point(s % 4.0) for s in stops]
        # reuse the exact curve ends so the vertex tests see identical coordinates
        pts[0], pts[-1] = P[1], P[0]
        return list(zip(pts[:-1], pts[1:]))


END_TOL = 1e-14


def _last_flags(n):
    return [i == n - 1 for i in range(n)]


def _perimeter_coord(p) -> float | None:
    x, y = p
    tol = 1e-10
    if abs(y) < tol and -tol <= x <= 1 + tol:
        return float(np.clip(x, 0, 1))
    if abs(x - 1) < tol and -tol <= y <= 1 + tol:
        return 1.0 + float(np.clip(y, 0, 1))
    if abs(y - 1) < tol and -tol <= x <= 1 + tol:
        return 2.0 + (1.0 - float(np.clip(x, 0, 1)))
    if abs(x) < tol and -tol <= y <= 1 + tol:
        return 3.0 + (1.0 - float(np.clip(y, 0, 1)))
    return None


def _perimeter_point(s: float) -> np.ndarray:
    e, f = int(np.floor(s)) % 4, s - np.floor(s)
    return np.array([(f, 0.0), (1.0, f), (1.0 - f, 1.0), (0.0, 1.0 - f)][e])


def _span_polynomials(curve: SplineCurve):
    """Power-basis polynomials ``(ta, tb, px, py)`` for each knot span."""
    kv = curve.knot_vector
    bp = kv.breakpoints
    p = kv.degree
    out = []
    for ta, tb in zip(bp[:-1], bp[1:]):
        t = np.linspace(ta, tb, p + 1) if p > 0 else np.array([0.5 * (ta + tb)])
        P = curve(t)
        px = np.polyfit(t, P[:, 0], p) if p > 0 else P[:1, 0]
        py = np.polyfit(t, P[:, 1], p) if p > 0 else P[:1, 1]
        out.append((float(ta), float(tb), px, py))
    return out


def _real_roots(poly, ta, tb, closed_right=True, tol=1e-10):
    poly = np.trim_zeros(np.asarray(poly, float), "f")
    if poly.size <= 1:
        return []
    r = np.roots(poly)
    r = r[np.abs(r.imag) < 1e-7 * max(1.0, tb - ta)].real
    h = tb - ta
    keep = (r >= ta - tol * h) & ((r <= tb + tol * h) if closed_right else (r < tb - tol * h))
    return sorted(np.clip(r[keep], ta, tb).tolist())


def _batched_real_roots(poly, shifts, ta, tb, closed_right=True, tol=1e-10):
    """Real roots of ``poly - shift`` in ``[ta, tb]`` for many shifts at once.

    Returns ``(index, root)`` arrays; the same filters as :func:`_real_roots`.
    """
    poly = np.trim_zeros(np.asarray(poly, float), "f")
    shifts = np.asarray(shifts, float)
    n, d = shifts.size, poly.size - 1
    if d < 1:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    if d == 1:
        roots = ((shifts - poly[1]) / poly[0])[:, None]
    else:
        M = np.zeros((n, d, d))
        M[:, 0, :] = -poly[1:] / poly[0]
        M[:, 0, -1] = -(poly[-1] - shifts) / poly[0]
        M[:, np.arange(1, d), np.arange(d - 1)] = 1.0
        roots = np.linalg.eigvals(M)
    h = tb - ta
    real = np.abs(roots.imag) < 1e-7 * max(1.0, h)
    r = roots.real
    hi = (r <= tb + tol * h) if closed_right else (r < tb - tol * h)
    keep = real & (r >= ta - tol * h) & hi
    idx = np.nonzero(keep)
    return idx[0], np.clip(r[idx], ta, tb)


def _polish(curve: SplineCurve, axis: int, c: float, t: float, lo: float, hi: float) -> float:
    """Safeguarded Newton on ``curve_axis(t) = c`` within ``[lo, hi]``."""
    for _ in range(50):
        d = curve.derivatives(np.array([t]), 1)[0]
        f = d[0, axis] - c
        if abs(f) < 1e-15:
            break
        step = f / d[1, axis] if d[1, axis] != 0 else 0.0
        tn = t - step
        if not lo <= tn <= hi or step == 0.0:
            break
        t = tn
        if abs(step) < 1e-16:
            break
    return t


def intersect_curve_gridline(curve, axis: int, c: float) -> np.ndarray:
    """All parameters ``t`` with ``curve(t)[axis] == c``.

    ``curve`` is a :class:`TrimCurve` or polynomial :class:`SplineCurve`.
    Raises :class:`TrimmingError` if the curve runs along the line.
    """
    sc = curve.curve if isinstance(curve, TrimCurve) else curve
    polys = curve.spans if isinstance(curve, TrimCurve) else _span_polynomials(sc)
    roots = []
    for (ta, tb, px, py), last in zip(polys, _last_flags(len(polys))):
        q = (px if axis == 0 else py).copy()
        q[-1] -= c
        if np.all(np.abs(q) < 1e-13):
            raise TrimmingError(f"curve lies on the line {'xy'[axis]}={c} over a finite interval")
        for r in _real_roots(q, ta, tb, closed_right=last):
            roots.append(_polish(sc, axis, c, r, ta, tb))
    roots = np.array(sorted(roots))
    if roots.size > 1:
        roots = roots[np.concatenate([[True], np.diff(roots) > 1e-10])]
    return roots


def intersect_curves(c1: TrimCurve, c2: TrimCurve, samples: int = 256) -> list[tuple[float, float]]:
    """Parameter pairs where two trim curves cross (polyline search + Newton)."""
    t = np.linspace(0.0, 1.0, samples + 1)
    P, Q = c1(t), c2(t)
    out = []
    for i in range(samples):
        a, d = P[i], P[i + 1] - P[i]
        e = Q[1:] - Q[:-1]
        r = Q[:-1] - a
        den = d[0] * e[:, 1] - d[1] * e[:, 0]
        ok = np.abs(den) > 1e-300
        s = np.where(ok, (r[:, 0] * e[:, 1] - r[:, 1] * e[:, 0]) / np.where(ok, den, 1), -1)
        u = np.where(ok, (r[:, 0] * d[1] - r[:, 1] * d[0]) / np.where(ok, den, 1), -1)
        for j in np.flatnonzero((s >= -1e-9) & (s <= 1 + 1e-9) & (u >= -1e-9) & (u <= 1 + 1e-9)):
            ta = t[i] + s[j] * (t[i + 1] - t[i])
            tb = t[j] + u[j] * (t[j + 1] - t[j])
            for _ in range(30):
                d1 = c1.derivatives(np.array([ta]), 1)[0]
                d2 = c2.derivatives(np.array([tb]), 1)[0]
                F = d1[0] - d2[0]
                J = np.column_stack([d1[1], -d2[1]])
                step = np.linalg.solve(J, F)
                ta, tb = ta - step[0], tb - step[1]
                if np.abs(step).max() < 1e-15:
                    break
            if 0 <= ta <= 1 and 0 <= tb <= 1 and not any(
                    abs(ta - x) < 1e-9 and abs(tb - y) < 1e-9 for x, y in out):
                out.append((float(ta), float(tb)))
    return out


# ------------------------------------------------------------------ subcells

@dataclass(frozen=True)
class Bound:
    """Lower/upper edge of a subcell: a constant or a monotone curve piece."""

    value: float = 0.0
    curve: int = -1
    s0: float = 0.0
    s1: float = 0.0

    @property
    def is_curve(self) -> bool:
        return self.curve >= 0


@dataclass(frozen=True)
class QuadSubcell:
    """Map ``[0,1]^2 -> element``: ``a = A(u)``, ``o = L(a) + v (U(a) - L(a))``.

    ``axis`` is the parameter direction of the slab coordinate ``a``.
    """

    element: tuple[int, int]
    axis: int
    a0: float
    a1: float
    lower: Bound
    upper: Bound

    def map(self, uv, curves):
        """Points ``(n, 2)`` and Jacobian ``(n,)`` at reference coordinates."""
        uv = np.atleast_2d(uv)
        u, v = uv[:, 0], uv[:, 1]
        ax, ox = self.axis, 1 - self.axis
        lead = self.lower if self.lower.is_curve else self.upper
        if lead.is_curve:
            s = lead.s0 + u * (lead.s1 - lead.s0)
            d = curves[lead.curve].derivatives(s, 1)
            A = d[:, 0, ax]
            dA = d[:, 1, ax] * (lead.s1 - lead.s0)
            lead_o = d[:, 0, ox]
        else:
            A = self.a0 + u * (self.a1 - self.a0)
            dA = np.full_like(u, self.a1 - self.a0)
            lead_o = None

        def bound_o(b):
            if not b.is_curve:
                return np.full_like(u, b.value)
            if b is lead:
                return lead_o
            return _eval_at(curves[b.curve], ax, ox, A, b.s0, b.s1)

        L, U = bound_o(self.lower), bound_o(self.upper)
        pts = np.empty((len(u), 2))
        pts[:, ax] = A
        pts[:, ox] = L + v * (U - L)
        return pts, np.abs(dA) * (U - L)

    def quadrature(self, n: int, curves):
        x, w = gauss_rule(n).unit()
        X, Y = np.meshgrid(x, x, indexing="ij")
        pts, jac = self.map(np.column_stack([X.ravel(), Y.ravel()]), curves)
        return pts, np.outer(w, w).ravel() * jac


def _eval_at(curve: TrimCurve, ax, ox, A, s0, s1):
    """Other coordinate of a monotone curve piece at slab coordinates ``A``."""
    lo, hi = min(s0, s1), max(s0, s1)
    c_lo, c_hi = curve(np.array([lo, hi]))[:, ax]
    inc = c_hi >= c_lo
    a = np.full_like(A, lo)
    b = np.full_like(A, hi)
    span = c_hi - c_lo
    s = lo + (A - c_lo) / span * (hi - lo) if abs(span) > 0 else np.full_like(A, lo)
    s = np.clip(s, lo, hi)
    for _ in range(60):
        d = curve.derivatives(s, 1)
        f = d[:, 0, ax] - A
        below = (f < 0) == inc
        a = np.where(below, s, a)
        b = np.where(below, b, s)
        with np.errstate(divide="ignore", invalid="ignore"):
            sn = s - f / d[:, 1, ax]
        bad = ~np.isfinite(sn) | (sn <= a) | (sn >= b)
        sn = np.where(bad, 0.5 * (a + b), sn)
        if np.max(np.abs(sn - s)) < 1e-15:
            s = sn
            break
        s = sn
    return curve(s)[:, ox]


@dataclass
class _Piece:
    curve: int
    s0: float
    s1: float
    lo: np.ndarray
    hi: np.ndarray


@dataclass
class TrimmedDomain:
    """Element classification and quadrature structures for one patch."""

    breaks: tuple[np.ndarray, np.ndarray]
    curves: list[TrimCurve]
    labels: np.ndarray                     # (nx, ny) of Label
    subcells: dict = field(default_factory=dict)
    kept_area: np.ndarray | None = None    # (nx, ny) kept area per element

    @property
    def shape(self):
        return self.labels.shape

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        ok = np.all((pts >= -TOL) & (pts <= 1 + TOL), axis=1)
        for c in self.curves:
            ok &= c.left_of(pts)
        return ok

    def active_elements(self) -> np.ndarray:
        return self.labels != Label.OUTSIDE

    def active_functions(self, space: SplineSpace) -> np.ndarray:
        """Flat indices of basis functions whose support meets the kept region."""
        act = self.active_elements()
        keep = np.zeros(space.shape, dtype=bool)
        p0, p1 = space.degrees
        for ex, ey in zip(*np.nonzero(act)):
            keep[ex:ex + p0 + 1, ey:ey + p1 + 1] = True
        return np.flatnonzero(keep.ravel())

    def quadrature(self, n: int):
        """Points, weights and element ids over the kept region, grouped by element."""
        bx, by = self.breaks
        x, w = gauss_rule(n).unit()
        X, Y = np.meshgrid(x, x, indexing="ij")
        ref = np.column_stack([X.ravel(), Y.ravel()])
        wref = np.outer(w, w).ravel()
        pts, wts, eids = [], [], []
        nx, ny = self.labels.shape
        inside = np.argwhere(self.labels == Label.INSIDE)
        if len(inside):
            ex, ey = inside[:, 0], inside[:, 1]
            hx = (bx[ex + 1] - bx[ex])[:, None]
            hy = (by[ey + 1] - by[ey])[:, None]
            px = bx[ex][:, None] + hx * ref[None, :, 0]
            py = by[ey][:, None] + hy * ref[None, :, 1]
            pts.append(np.stack([px, py], axis=-1).reshape(-1, 2))
            wts.append((hx * hy * wref[None, :]).ravel())
            eids.append(np.repeat(ex * ny + ey, len(wref)))
        for (ex, ey), cells in self.subcells.items():
            for cell in cells:
                p, wt = cell.quadrature(n, self.curves)
                pts.append(p)
                wts.append(wt)
                eids.append(np.full(len(wt), ex * ny + ey))
        if not pts:
            return np.zeros((0, 2)), np.zeros(0), np.zeros(0, dtype=np.int64)
        P, W, E = np.concatenate(pts), np.concatenate(wts), np.concatenate(eids)
        order = np.argsort(E, kind="stable")
        return P[order], W[order], E[order]

    def edge_segments(self, edge: int) -> list[tuple[float, float]]:
        """Kept parameter intervals of a boundary edge.

        Edges: 0 -> eta=0, 1 -> xi=1, 2 -> eta=1, 3 -> xi=0; the interval is
        in the running coordinate (xi for edges 0/2, eta for 1/3).
        """
        axis = 1 if edge in (0, 2) else 0      # fixed coordinate
        val = 0.0 if edge in (0, 3) else 1.0
        cuts = [0.0, 1.0]
        for c in self.curves:
            for t in intersect_curve_gridline(c, axis, val):
                cuts.append(float(c(np.array([t]))[0, 1 - axis]))
        cuts = np.unique(np.clip(cuts, 0, 1))
        out = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b - a < 1e-12:
                continue
            m = np.empty((1, 2))
            m[0, axis], m[0, 1 - axis] = val, 0.5 * (a + b)
            m[0, axis] = min(max(val, 1e-13), 1 - 1e-13)
            if self.contains(m)[0]:
                if out and abs(out[-1][1] - a) < 1e-14:
                    out[-1] = (out[-1][0], float(b))
                else:
                    out.append((float(a), float(b)))
        return out

    def area(self) -> float:
        return float(self.kept_area.sum())


def _split_params(curve: TrimCurve, bx, by, extra=()) -> np.ndarray:
    ts = [0.0, 1.0, *extra]
    for axis, lines in ((0, bx), (1, by)):
        for c in lines:
            ts.extend(intersect_curve_gridline(curve, axis, c).tolist())
    for ta, tb, px, py in curve.spans:
        for poly in (px, py):
            if len(poly) > 1:
                ts.extend(_real_roots(np.polyder(poly), ta, tb))
        ts.extend([ta, tb])
    ts = np.unique(np.clip(ts, 0.0, 1.0))
    return ts[np.concatenate([[True], np.diff(ts) > 1e-13])]


def classify_elements(space: SplineSpace, curves=()) -> TrimmedDomain:
    """Label the Bezier elements of ``space`` and build cut-element subcells."""
    curves = [c if isinstance(c, TrimCurve) else TrimCurve(c) for c in curves]
    bx, by = (kv.breakpoints for kv in space.knot_vectors)
    nx, ny = len(bx) - 1, len(by) - 1
    labels = np.full((nx, ny), Label.INSIDE, dtype=np.int64)
    area = np.outer(np.diff(bx), np.diff(by))
    dom = TrimmedDomain((bx, by), curves, labels, {}, area.copy())
    if not curves:
        return dom

    extra = [[] for _ in curves]
    for i in range(len(curves)):
        for j in range(i + 1, len(curves)):
            for ta, tb in intersect_curves(curves[i], curves[j]):
                extra[i].append(ta)
                extra[j].append(tb)

    pieces: dict[tuple[int, int], list[_Piece]] = {}
    for ci, c in enumerate(curves):
        ts = _split_params(c, bx, by, extra[ci])
        P = c(ts)
        mids = c(0.5 * (ts[:-1] + ts[1:]))
        for k in range(len(ts) - 1):
            a, b = P[k], P[k + 1]
            if np.linalg.norm(b - a) < 1e-13:
                continue
            m = mids[k]
            ex = int(np.clip(np.searchsorted(bx, m[0], side="right") - 1, 0, nx - 1))
            ey = int(np.clip(np.searchsorted(by, m[1], side="right") - 1, 0, ny - 1))
            hx, hy = bx[ex + 1] - bx[ex], by[ey + 1] - by[ey]
            for axis, (lo, hi, h) in enumerate(((bx[ex], bx[ex + 1], hx), (by[ey], by[ey + 1], hy))):
                on = [abs(a[axis] - g) < 1e-12 * h and abs(b[axis] - g) < 1e-12 * h
                      and abs(m[axis] - g) < 1e-12 * h for g in (lo, hi)]
                if any(on) and np.linalg.norm(b - a) < 1e-9 * max(hx, hy):
                    # a sliver left by a root next to a curve end point on a knot line
                    break
                if any(on):
                    raise TrimmingError(
                        f"trim curve {ci} runs along a knot line in element {(ex, ey)}")
            else:
                pieces.setdefault((ex, ey), []).append(
                    _Piece(ci, float(ts[k]), float(ts[k + 1]), np.minimum(a, b), np.maximum(a, b)))

    for ex in range(nx):
        for ey in range(ny):
            if (ex, ey) in pieces:
                continue
            c = np.array([[0.5 * (bx[ex] + bx[ex + 1]), 0.5 * (by[ey] + by[ey + 1])]])
            if not dom.contains(c)[0]:
                labels[ex, ey] = Label.OUTSIDE
                dom.kept_area[ex, ey] = 0.0

    for (ex, ey), plist in pieces.items():
        cells = reparametrize_cut_element(dom, (ex, ey), plist)
        full = area[ex, ey]
        kept = sum(float(np.sum(c.quadrature(4, curves)[1])) for c in cells)
        dom.kept_area[ex, ey] = kept
        if not cells or kept < SLIVER * full:
            labels[ex, ey] = Label.OUTSIDE
            dom.kept_area[ex, ey] = 0.0
        else:
            labels[ex, ey] = Label.CUT
            dom.subcells[(ex, ey)] = cells
    return dom


def reparametrize_cut_element(dom: TrimmedDomain, element, plist) -> list[QuadSubcell]:
    """Decompose the kept part of a cut element into slab subcells."""
    ex, ey = element
    bx, by = dom.breaks
    box = np.array([[bx[ex], by[ey]], [bx[ex + 1], by[ey + 1]]])
    h = box[1] - box[0]
    flat = [[np.ptp([p.lo[a], p.hi[a]]) < 1e-12 * h[a] for p in plist] for a in (0, 1)]
    # a piece constant in the slab coordinate only contributes a slab stop
    axis = 1 if any(flat[0]) and not any(flat[1]) else 0
    ox = 1 - axis
    curves = dom.curves

    stops = [box[0, axis], box[1, axis]]
    for p in plist:
        stops += [p.lo[axis], p.hi[axis]]
    stops = np.unique(np.clip(stops, box[0, axis], box[1, axis]))
    stops = stops[np.concatenate([[True], np.diff(stops) > 1e-13 * h[axis]])]

    cells = []
    for a0, a1 in zip(stops[:-1], stops[1:]):
        am = 0.5 * (a0 + a1)
        bounds = [(box[0, ox], Bound(value=box[0, ox]))]
        for p in plist:
            if p.lo[axis] <= a0 + 1e-12 * h[axis] and p.hi[axis] >= a1 - 1e-12 * h[axis]:
                s_at = _params_at(curves[p.curve], axis, np.array([a0, a1]), p.s0, p.s1)
                om = _eval_at(curves[p.curve], axis, ox, np.array([am]), p.s0, p.s1)[0]
                bounds.append((om, Bound(curve=p.curve, s0=s_at[0], s1=s_at[1])))
        bounds.append((box[1, ox], Bound(value=box[1, ox])))
        bounds.sort(key=lambda b: b[0])
        for (o_lo, lower), (o_hi, upper) in zip(bounds[:-1], bounds[1:]):
            if (o_hi - o_lo) * (a1 - a0) < SLIVER * h[0] * h[1]:
                continue
            mid = np.empty((1, 2))
            mid[0, axis], mid[0, ox] = am, 0.5 * (o_lo + o_hi)
            if dom.contains(mid)[0]:
                cells.append(QuadSubcell(element, axis, float(a0), float(a1), lower, upper))
    return cells


def _params_at(curve: TrimCurve, axis, A, s0, s1):
    """Curve parameters on a monotone piece where coordinate ``axis`` equals ``A``."""
    lo, hi = min(s0, s1), max(s0, s1)
    out = []
    for a in A:
        for s in (lo, hi):
            if abs(curve(np.array([s]))[0, axis] - a) < 1e-13:
                out.append(s)
                break
        else:
            r = [t for t in intersect_curve_gridline(curve, axis, a) if lo - 1e-12 <= t <= hi + 1e-12]
            if not r:
                raise TrimmingError("failed to locate curve piece end")
            out.append(float(np.clip(r[0], lo, hi)))
    return out
