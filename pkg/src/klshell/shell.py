"""Kirchhoff-Love shell weak form: materials, strain operators, assembly,
loads, boundary conditions and error norms.

Strains use Voigt order ``[11, 22, 2*12]``.  A displacement dof is addressed as
``offset + 3 * a + c`` where ``a`` is the index of an *active* basis function
of the patch and ``c`` the Cartesian component.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy

from .errors import AssemblyError, ConstructionError, DegenerateGeometryError, DomainError
from .geometry import SurfaceFrame, SurfaceMap, boundary_trace, frame
from .numerics import SparseSymmetricSystem, gauss_rule, segment_rule
from .spline import (KnotVector, SplineCurve, SplineSpace, basis_ders,
                     eval_tensor_basis)
from .trimming import TrimCurve, TrimmedDomain, classify_elements

CHUNK = 4096

# ------------------------------------------------------------------ materials


def _voigt_from_tensor(C4: np.ndarray) -> np.ndarray:
    """``(n,2,2,2,2)`` contravariant tensor -> ``(n,3,3)`` Voigt matrix."""
    idx = [(0, 0), (1, 1), (0, 1)]
    out = np.empty(C4.shape[:-4] + (3, 3))
    for I, (a, b) in enumerate(idx):
        for J, (c, d) in enumerate(idx):
            out[..., I, J] = C4[..., a, b, c, d]
    return out


def constitutive_isotropic(fr: SurfaceFrame, E: float, nu: float) -> np.ndarray:
    """Curvilinear plane-stress tensor ``C^{abcd}`` in Voigt form, per point."""
    g = fr.inv_metric
    lam = 2.0 * nu / (1.0 - nu)
    C4 = (np.einsum("nac,nbd->nabcd", g, g) + np.einsum("nad,nbc->nabcd", g, g)
          + lam * np.einsum("nab,ncd->nabcd", g, g))
    return E / (2.0 * (1.0 + nu)) * _voigt_from_tensor(C4)


@dataclass(frozen=True)
class Isotropic:
    E: float
    nu: float
    t: float

    def __post_init__(self):
        if not self.E > 0:
            raise ConstructionError("Young's modulus must be positive")
        if not -1.0 < self.nu < 0.5:
            raise ConstructionError("Poisson ratio must lie in (-1, 0.5)")
        if not self.t > 0:
            raise ConstructionError("thickness must be positive")

    @property
    def thickness(self) -> float:
        return self.t

    def abd(self, fr: SurfaceFrame):
        C = constitutive_isotropic(fr, self.E, self.nu)
        return self.t * C, None, self.t ** 3 / 12.0 * C

    def stiffness_scales(self) -> tuple[float, float]:
        """Membrane and bending stiffness magnitudes used by penalty formulas."""
        m = self.E * self.t / (1.0 - self.nu ** 2)
        return m, m * self.t ** 2 / 12.0


@dataclass(frozen=True)
class Ply:
    E1: float
    E2: float
    G12: float
    nu12: float
    angle: float          # fiber angle [rad] measured from the first tangent
    thickness: float

    def __post_init__(self):
        if min(self.E1, self.E2, self.G12, self.thickness) <= 0:
            raise ConstructionError("ply moduli and thickness must be positive")
        if self.nu12 ** 2 * self.E2 / self.E1 >= 1.0:
            raise ConstructionError("ply constants violate nu12^2 E2/E1 < 1")

    def reduced_stiffness(self) -> np.ndarray:
        """Plane-stress Voigt matrix in the fiber frame."""
        nu21 = self.nu12 * self.E2 / self.E1
        d = 1.0 - self.nu12 * nu21
        return np.array([[self.E1 / d, self.nu12 * self.E2 / d, 0.0],
                         [self.nu12 * self.E2 / d, self.E2 / d, 0.0],
                         [0.0, 0.0, self.G12]])


def _tensor_from_voigt(Q: np.ndarray) -> np.ndarray:
    idx = {(0, 0): 0, (1, 1): 1, (0, 1): 2, (1, 0): 2}
    C4 = np.empty((2, 2, 2, 2))
    for (a, b), I in idx.items():
        for (c, d), J in idx.items():
            C4[a, b, c, d] = Q[I, J]
    return C4


@dataclass(frozen=True)
class Laminate:
    plies: tuple[Ply, ...]

    def __post_init__(self):
        if not self.plies:
            raise ConstructionError("laminate needs at least one ply")
        object.__setattr__(self, "plies", tuple(self.plies))

    @property
    def thickness(self) -> float:
        return float(sum(p.thickness for p in self.plies))

    def offsets(self) -> np.ndarray:
        """Ply centroid offsets from the mid-plane, stacking from the bottom."""
        t = np.array([p.thickness for p in self.plies])
        top = np.cumsum(t) - 0.5 * t.sum()
        return top - 0.5 * t

    def _ply_tensors(self, T: np.ndarray) -> list[np.ndarray]:
        out = []
        for ply in self.plies:
            c, s = np.cos(ply.angle), np.sin(ply.angle)
            R = np.array([[c, s], [-s, c]])          # fiber axes in the local frame
            C4 = _tensor_from_voigt(ply.reduced_stiffness())
            M = np.einsum("ij,njk->nik", R, T)        # M[:, i, alpha] = f_i . a^alpha
            out.append(_voigt_from_tensor(
                np.einsum("ijkl,nia,njb,nkc,nld->nabcd", C4, M, M, M, M)))
        return out

    def abd(self, fr: SurfaceFrame):
        e1 = fr.a[:, 0] / np.linalg.norm(fr.a[:, 0], axis=1)[:, None]
        e2 = np.cross(fr.a3, e1)
        T = np.stack([np.einsum("ni,nai->na", e, fr.contra) for e in (e1, e2)], axis=1)
        return self._stack(T)

    def _stack(self, T):
        Cs = self._ply_tensors(T)
        z = self.offsets()
        A = sum(C * p.thickness for C, p in zip(Cs, self.plies))
        B = sum(C * p.thickness * zn for C, p, zn in zip(Cs, self.plies, z))
        D = sum(C * (p.thickness * zn ** 2 + p.thickness ** 3 / 12.0)
                for C, p, zn in zip(Cs, self.plies, z))
        return A, B, D

    def local_abd(self):
        """ABD matrices in the local orthonormal frame (fiber angle reference)."""
        A, B, D = self._stack(np.eye(2)[None])
        return A[0], B[0], D[0]

    def stiffness_scales(self) -> tuple[float, float]:
        A, _, D = self.local_abd()
        return float(A.max()), float(D.max())


def laminate_abd(stack: Laminate, fr: SurfaceFrame):
    return stack.abd(fr)


# ----------------------------------------------------------- strain operators

@dataclass
class StrainOps:
    """Voigt strain rows per point: ``(n, 3, nloc, 3)`` for membrane and bending."""

    membrane: np.ndarray
    bending: np.ndarray

    def flat(self):
        n = self.membrane.shape[0]
        return self.membrane.reshape(n, 3, -1), self.bending.reshape(n, 3, -1)


def _basis_derivs(ev):
    """First and second parametric derivatives ``(n,2,nloc)``, ``(n,2,2,nloc)``."""
    d1 = np.stack([ev.d(1, 0), ev.d(0, 1)], axis=1)
    d11, d12, d22 = ev.d(2, 0), ev.d(1, 1), ev.d(0, 2)
    d2 = np.stack([np.stack([d11, d12], 1), np.stack([d12, d22], 1)], 1)
    return d1, d2


def strain_ops(fr: SurfaceFrame, ev) -> StrainOps:
    d1, d2 = _basis_derivs(ev)
    a = fr.a
    n, nloc = d1.shape[0], d1.shape[-1]
    Bm = np.empty((n, 3, nloc, 3))
    Bm[:, 0] = d1[:, 0, :, None] * a[:, 0, None, :]
    Bm[:, 1] = d1[:, 1, :, None] * a[:, 1, None, :]
    Bm[:, 2] = d1[:, 1, :, None] * a[:, 0, None, :] + d1[:, 0, :, None] * a[:, 1, None, :]
    # covariant second derivative of the basis: N_{,ab} - Gamma^g_ab N_{,g}
    H = d2 - np.einsum("ngab,ngk->nabk", fr.christoffel, d1)
    Bb = np.empty((n, 3, nloc, 3))
    a3 = fr.a3[:, None, :]
    Bb[:, 0] = -H[:, 0, 0, :, None] * a3
    Bb[:, 1] = -H[:, 1, 1, :, None] * a3
    Bb[:, 2] = -2.0 * H[:, 0, 1, :, None] * a3
    return StrainOps(Bm, Bb)


def strains_from_derivs(fr: SurfaceFrame, du: np.ndarray, ddu: np.ndarray):
    """Membrane and bending Voigt strains of a field with parametric derivatives."""
    a = fr.a
    m = np.empty((du.shape[0], 3))
    m[:, 0] = np.einsum("ni,ni->n", a[:, 0], du[:, 0])
    m[:, 1] = np.einsum("ni,ni->n", a[:, 1], du[:, 1])
    m[:, 2] = (np.einsum("ni,ni->n", a[:, 0], du[:, 1])
               + np.einsum("ni,ni->n", a[:, 1], du[:, 0]))
    cov = ddu - np.einsum("ngab,ngi->nabi", fr.christoffel, du)
    k = np.einsum("nabi,ni->nab", cov, fr.a3)
    b = -np.stack([k[:, 0, 0], k[:, 1, 1], 2.0 * k[:, 0, 1]], axis=1)
    return m, b


def normal_rotation(fr: SurfaceFrame, normal_contra: np.ndarray, ev) -> np.ndarray:
    """Rows of ``theta_n(v) = a3 . v_{,a} n^a``: ``(n, nloc, 3)``."""
    d1 = np.stack([ev.d(1, 0), ev.d(0, 1)], axis=1)
    dn = np.einsum("nak,na->nk", d1, normal_contra)
    return dn[:, :, None] * fr.a3[:, None, :]


# ------------------------------------------------------------ exact fields

class ExactField:
    """Smooth reference displacement with parametric derivatives to order 2."""

    frame_order = 1

    def evaluate(self, fr: SurfaceFrame, pts: np.ndarray):
        """Return ``u (n,3)``, ``du (n,2,3)`` and ``ddu (n,2,2,3)``."""
        raise NotImplementedError

    def __call__(self, fr, pts):
        return self.evaluate(fr, pts)[0]


def _lambdify(exprs, syms):
    f = sympy.lambdify(syms, exprs, modules="numpy")

    def call(*args):
        n = np.shape(args[0])
        out = f(*args)
        return np.stack([np.broadcast_to(np.asarray(o, float), n) for o in out], -1)
    return call


class CartesianField(ExactField):
    """Field given by sympy expressions in the physical coordinates x, y, z."""

    def __init__(self, exprs: Sequence):
        x, y, z = sympy.symbols("x y z")
        X = (x, y, z)
        e = [sympy.sympify(s) for s in exprs]
        self.exprs = e
        self._u = _lambdify(e, X)
        self._G = _lambdify([sympy.diff(ei, xj) for ei in e for xj in X], X)
        self._H = _lambdify([sympy.diff(ei, xj, xk) for ei in e for xj in X for xk in X], X)

    def evaluate(self, fr, pts):
        X = (fr.x[:, 0], fr.x[:, 1], fr.x[:, 2])
        n = len(fr.x)
        u = self._u(*X)
        G = self._G(*X).reshape(n, 3, 3)
        H = self._H(*X).reshape(n, 3, 3, 3)
        du = np.einsum("nij,naj->nai", G, fr.a)
        ddu = (np.einsum("nijk,naj,nbk->nabi", H, fr.a, fr.a)
               + np.einsum("nij,nabj->nabi", G, fr.da))
        return u, du, ddu


class ParametricField(ExactField):
    """Cartesian components given as sympy expressions in ``xi, eta``."""

    def __init__(self, exprs: Sequence):
        xi, eta = sympy.symbols("xi eta")
        P = (xi, eta)
        e = [sympy.sympify(s) for s in exprs]
        self.exprs = e
        self._u = _lambdify(e, P)
        self._d = _lambdify([sympy.diff(ei, p) for p in P for ei in e], P)
        self._dd = _lambdify([sympy.diff(ei, p, q) for p in P for q in P for ei in e], P)

    def evaluate(self, fr, pts):
        pts = np.atleast_2d(pts)
        n = len(pts)
        P = (pts[:, 0], pts[:, 1])
        return (self._u(*P), self._d(*P).reshape(n, 2, 3),
                self._dd(*P).reshape(n, 2, 2, 3))


class NormalField(ExactField):
    """``w(xi, eta) * a3`` for a scalar sympy expression ``w``."""

    frame_order = 2

    def __init__(self, expr):
        xi, eta = sympy.symbols("xi eta")
        w = sympy.sympify(expr)
        self.expr = w
        P = (xi, eta)
        self._w = _lambdify([w], P)
        self._dw = _lambdify([sympy.diff(w, p) for p in P], P)
        self._ddw = _lambdify([sympy.diff(w, p, q) for p in P for q in P], P)

    def evaluate(self, fr, pts):
        if fr.dda3 is None:
            raise ValueError("normal field needs a frame with second derivatives")
        pts = np.atleast_2d(pts)
        n = len(pts)
        P = (pts[:, 0], pts[:, 1])
        w = self._w(*P)[:, 0]
        dw = self._dw(*P)
        ddw = self._ddw(*P).reshape(n, 2, 2)
        a3, da3, dda3 = fr.a3, fr.da3, fr.dda3
        u = w[:, None] * a3
        du = dw[:, :, None] * a3[:, None] + w[:, None, None] * da3
        ddu = (ddw[..., None] * a3[:, None, None]
               + dw[:, :, None, None] * da3[:, None, :, :]
               + dw[:, None, :, None] * da3[:, :, None, :]
               + w[:, None, None, None] * dda3)
        return u, du, ddu


class ZeroField(ExactField):
    def evaluate(self, fr, pts):
        n = len(fr.x)
        return np.zeros((n, 3)), np.zeros((n, 2, 3)), np.zeros((n, 2, 2, 3))


def check_exact_derivatives(exact: ExactField, smap: SurfaceMap, points=None,
                            h: float = 2e-4, tol: float = 1e-7) -> float:
    """Compare the derivative closures of ``exact`` with central differences.

    Returns the largest relative mismatch and raises ``ValueError`` above ``tol``.
    """
    if points is None:
        g = np.linspace(0.2, 0.8, 3)
        points = np.array([(a, b) for a in g for b in g])
    pts = np.atleast_2d(np.asarray(points, float))
    k = max(exact.frame_order, 1)

    def value(q):
        return exact.evaluate(frame(smap, q, k), q)[0]

    def differences(h):
        e = np.eye(2) * h
        u0 = value(pts)
        d1 = np.empty((len(pts), 2, 3))
        d2 = np.empty((len(pts), 2, 2, 3))
        for a in range(2):
            up, um = value(pts + e[a]), value(pts - e[a])
            d1[:, a] = (up - um) / (2 * h)
            d2[:, a, a] = (up - 2 * u0 + um) / h**2
        d2[:, 0, 1] = d2[:, 1, 0] = (value(pts + e[0] + e[1]) - value(pts + e[0] - e[1])
                                     - value(pts - e[0] + e[1]) + value(pts - e[0] - e[1])) / (4 * h * h)
        return d1, d2

    # Richardson extrapolation removes the leading h^2 error term
    c1, c2 = differences(h)
    f1, f2 = differences(h / 2)
    fd1, fd2 = (4 * f1 - c1) / 3, (4 * f2 - c2) / 3
    _, du, ddu = exact.evaluate(frame(smap, pts, k), pts)
    worst = max(np.abs(fd1 - du).max() / max(1.0, np.abs(du).max()),
                np.abs(fd2 - ddu).max() / max(1.0, np.abs(ddu).max()))
    if worst > tol:
        raise ValueError(f"exact-field derivatives disagree with finite differences ({worst:.2e})")
    return worst


# ------------------------------------------------------------------ patch

@dataclass
class Patch:
    """Shell mid-surface: geometry map, discretization space, material, trims."""

    geometry: SurfaceMap
    space: SplineSpace
    material: Isotropic | Laminate
    trims: list = field(default_factory=list)
    name: str = ""
    offset: int = 0

    def __post_init__(self):
        if self.space.is_rational:
            raise ConstructionError("discretization spaces are polynomial")
        if self.space.pdim != 2:
            raise ConstructionError("patch spaces are bivariate")
        self.trims = [c if isinstance(c, TrimCurve) else TrimCurve(c) for c in self.trims]
        self.domain: TrimmedDomain = classify_elements(self.space, self.trims)
        self.active = self.domain.active_functions(self.space)
        self.local_of = -np.ones(self.space.dim, dtype=np.int64)
        self.local_of[self.active] = np.arange(self.active.size)

    @property
    def degree(self) -> int:
        return max(self.space.degrees)

    @property
    def ndof(self) -> int:
        return 3 * self.active.size

    def dofs_of(self, functions: np.ndarray) -> np.ndarray:
        """Global dofs ``(..., 3)`` of full-space function indices."""
        loc = self.local_of[functions]
        if np.any(loc < 0):
            raise AssemblyError(f"patch {self.name!r}: inactive basis function referenced")
        return self.offset + 3 * loc[..., None] + np.arange(3)

    def quadrature(self, n: int | None = None):
        return self.domain.quadrature(n or self.degree + 1)

    def evaluate(self, coeffs: np.ndarray, points, k: int = 0):
        """Displacement (and parametric derivatives) at points: ``(n, nd, 3)``."""
        ev = eval_tensor_basis(self.space, points, k)
        U = coeffs[self.dofs_of(ev.indices)]
        return np.einsum("ndk,nkc->ndc", ev.values, U)

    def locate(self, x, tol: float = 1e-9):
        """Parametric preimage of physical point ``x`` inside the kept region, or None."""
        x = np.asarray(x, float)
        g = np.linspace(0.0, 1.0, 11)
        G = np.array([(a, b) for a in g for b in g])
        P = self.geometry(G)
        best = None
        for j in np.argsort(np.linalg.norm(P - x, axis=1))[:6]:
            q = G[j].copy()
            for _ in range(50):
                D = self.geometry.derivatives(q[None], 1)[0]
                r = D[0] - x
                J = D[1:3].T
                step = np.linalg.lstsq(J, r, rcond=None)[0]
                q = np.clip(q - step, 0.0, 1.0)
                if np.abs(step).max() < 1e-15:
                    break
            d = np.linalg.norm(self.geometry(q[None])[0] - x)
            if d < tol * max(1.0, self.geometry.bounding_box_diagonal()) and \
                    self.domain.contains(q[None])[0]:
                if best is None or d < best[1]:
                    best = (q, d)
        return None if best is None else best[0]


def _frames_and_basis(patch: Patch, pts, basis_k: int, frame_k: int, eids=None):
    try:
        fr = frame(patch.geometry, pts, frame_k)
    except DegenerateGeometryError as exc:
        where = ""
        if eids is not None:
            D = patch.geometry.derivatives(pts, 1)
            bad = int(np.argmin(np.linalg.norm(np.cross(D[:, 1], D[:, 2]), axis=1)))
            nx, ny = patch.domain.shape
            e = int(eids[bad])
            where = f" element {e} ({e // ny}, {e % ny})"
        raise AssemblyError(f"patch {patch.name!r}{where}: {exc}") from exc
    ev = eval_tensor_basis(patch.space, pts, basis_k)
    return fr, ev


def _chunks(eids: np.ndarray, size: int = CHUNK):
    """Slices over ``eids`` (sorted) that never split an element."""
    n = len(eids)
    start = 0
    while start < n:
        stop = min(start + size, n)
        if stop < n:
            stop = int(np.searchsorted(eids, eids[stop - 1], side="left"))
            if stop <= start:
                stop = int(np.searchsorted(eids, eids[start], side="right"))
        yield slice(start, stop)
        start = stop


def _element_sums(B: np.ndarray, DB: np.ndarray, starts: np.ndarray) -> np.ndarray:
    """``sum_q B_q^T DB_q`` per element; points of an element are contiguous."""
    n, r, m = B.shape
    counts = np.diff(np.r_[starts, n])
    ke = np.empty((len(starts), m, m))
    for c in np.unique(counts):
        sel = np.flatnonzero(counts == c)
        idx = (starts[sel][:, None] + np.arange(c)).ravel()
        Bs = B[idx].reshape(len(sel), c * r, m)
        Ds = DB[idx].reshape(len(sel), c * r, m)
        ke[sel] = np.matmul(Bs.transpose(0, 2, 1), Ds)
    return ke


def _abd_blocks(material, fr):
    A, B, D = material.abd(fr)
    return A, B, D


def assemble_stiffness(system: SparseSymmetricSystem, patch: Patch,
                       rhs_field: ExactField | None = None) -> None:
    """Add ``a(u, v)`` of one patch (and optionally ``a(u_ex, v)`` to the load)."""
    pts, wts, eids = patch.quadrature()
    if len(wts) == 0:
        return
    frame_k = max(1, rhs_field.frame_order if rhs_field is not None else 1)
    for sl in _chunks(eids):
        P, W, E = pts[sl], wts[sl], eids[sl]
        fr, ev = _frames_and_basis(patch, P, 2, frame_k, E)
        ops = strain_ops(fr, ev)
        Bm, Bb = ops.flat()
        A, B, D = _abd_blocks(patch.material, fr)
        w = (W * fr.jac)[:, None, None]
        B6 = np.concatenate([Bm, Bb], axis=1)
        D6 = np.zeros((len(W), 6, 6))
        D6[:, :3, :3], D6[:, 3:, 3:] = A, D
        if B is not None:
            D6[:, :3, 3:] = B
            D6[:, 3:, :3] = B
        DB = np.matmul(D6 * w, B6)
        starts = np.flatnonzero(np.r_[True, E[1:] != E[:-1]])
        ke = _element_sums(B6, DB, starts)
        dofs = patch.dofs_of(ev.indices[starts]).reshape(len(starts), -1)
        system.add_element_matrices(dofs, ke)
        if rhs_field is not None:
            _, du, ddu = rhs_field.evaluate(fr, P)
            em, eb = strains_from_derivs(fr, du, ddu)
            nm = np.einsum("nij,nj->ni", A, em)
            nb = np.einsum("nij,nj->ni", D, eb)
            if B is not None:
                nm += np.einsum("nij,nj->ni", B, eb)
                nb += np.einsum("nij,nj->ni", B, em)
            fq = (np.einsum("nip,ni->np", Bm, nm) + np.einsum("nip,ni->np", Bb, nb)) * w[:, :, 0]
            system.add_load(patch.dofs_of(ev.indices).reshape(len(P), -1), fq)


def assemble_body_force(system: SparseSymmetricSystem, patch: Patch,
                        force: Callable[[np.ndarray], np.ndarray]) -> None:
    """Add ``int f . v dA`` for a force per unit area given as ``f(x) -> (n,3)``."""
    pts, wts, eids = patch.quadrature()
    for sl in _chunks(eids):
        fr, ev = _frames_and_basis(patch, pts[sl], 0, 0)
        f = np.broadcast_to(np.asarray(force(fr.x), float), fr.x.shape)
        vals = ev.values[:, 0, :, None] * f[:, None, :] * (wts[sl] * fr.jac)[:, None, None]
        system.add_load(patch.dofs_of(ev.indices), vals)


def assemble_point_load(system: SparseSymmetricSystem, patches: Sequence[Patch],
                        x, force) -> tuple[int, np.ndarray]:
    """Add a concentrated force at physical point ``x``; returns (patch index, preimage)."""
    for i, patch in enumerate(patches):
        q = patch.locate(x)
        if q is not None:
            ev = eval_tensor_basis(patch.space, q[None], 0)
            vals = ev.values[0, 0, :, None] * np.asarray(force, float)[None, :]
            system.add_load(patch.dofs_of(ev.indices[0]), vals)
            return i, q
    raise DomainError(f"point load location {x} lies outside all patches")


def assemble_edge_moment(system: SparseSymmetricSystem, patch: Patch, curve: SplineCurve,
                         moment: Callable[[np.ndarray], np.ndarray],
                         kept_left: bool = True, n: int | None = None) -> None:
    """Add ``int M_nn theta_n(v) ds`` along a parametric boundary curve."""
    n = n or patch.degree + 1
    bp = np.unique(np.r_[curve.knot_vector.breakpoints, _curve_element_breaks(patch, curve)])
    t, w = segment_rule(bp, n)
    bt = boundary_trace(patch.geometry, curve, t, kept_left)
    ev = eval_tensor_basis(patch.space, bt.preimage, 1)
    rows = normal_rotation(bt.frame, bt.normal_contra, ev)
    m = np.asarray(moment(bt.point), float) * np.ones(len(t))
    system.add_load(patch.dofs_of(ev.indices), rows * (m * w * bt.jac)[:, None, None])


def _curve_element_breaks(patch: Patch, curve: SplineCurve) -> np.ndarray:
    from .trimming import intersect_curve_gridline
    out = []
    for axis, kv in enumerate(patch.space.knot_vectors):
        for c in kv.breakpoints[1:-1]:
            out.extend(intersect_curve_gridline(curve, axis, c).tolist())
    return np.array(out)


# ---------------------------------------------------------- boundary data

EDGES = {0: (1, 0.0), 1: (0, 1.0), 2: (1, 1.0), 3: (0, 0.0)}   # edge -> (fixed axis, value)


def edge_functions(patch: Patch, edge: int, rows: int = 1) -> np.ndarray:
    """Full-space indices ``(rows, n_run)`` of functions on the first rows at an edge."""
    n0, n1 = patch.space.shape
    axis, val = EDGES[edge]
    if axis == 1:
        js = range(rows) if val == 0.0 else range(n1 - 1, n1 - 1 - rows, -1)
        return np.array([[i * n1 + j for i in range(n0)] for j in js])
    is_ = range(rows) if val == 0.0 else range(n0 - 1, n0 - 1 - rows, -1)
    return np.array([[i * n1 + j for j in range(n1)] for i in is_])


def edge_point(edge: int, s):
    s = np.atleast_1d(np.asarray(s, float))
    axis, val = EDGES[edge]
    P = np.empty((len(s), 2))
    P[:, axis] = val
    P[:, 1 - axis] = s
    return P


def dirichlet_edge(patch: Patch, edge: int, field: ExactField | None = None,
                   components: Sequence[int] = (0, 1, 2), rows: int = 1,
                   segment: tuple[float, float] | None = None) -> dict[int, float]:
    """Prescribed dof values on a (possibly partial) patch edge.

    With ``field=None`` all listed rows/components are set to zero.  Otherwise
    the trace of ``field`` is L2-projected (arc-length measure) onto the edge
    functions of the first row; functions at untrimmed corners interpolate.
    """
    funcs = edge_functions(patch, edge, rows)
    axis, _ = EDGES[edge]
    kv = patch.space.knot_vectors[1 - axis]
    segs = [segment] if segment is not None else patch.domain.edge_segments(edge)
    out: dict[int, float] = {}
    for a, b in segs:
        lo, hi = kv.find_span(np.array([a + 1e-14, b - 1e-14])) - kv.degree
        hi = hi + kv.degree
        idx = np.arange(lo, hi + 1)
        idx = idx[patch.local_of[funcs[0, idx]] >= 0]
        if field is None:
            for r in range(rows):
                d = patch.dofs_of(funcs[r, idx])
                for c in components:
                    out.update({int(k): 0.0 for k in d[:, c]})
            continue
        if rows != 1:
            raise ConstructionError("inhomogeneous data supports a single boundary row")
        vals = _project_edge(patch, edge, field, kv, idx, a, b)
        d = patch.dofs_of(funcs[0, idx])
        for c in components:
            out.update({int(k): float(v) for k, v in zip(d[:, c], vals[:, c])})
    return out


def _project_edge(patch, edge, field, kv, idx, a, b):
    bp = kv.breakpoints
    bp = np.unique(np.r_[a, bp[(bp > a) & (bp < b)], b])
    s, w = segment_rule(bp, kv.degree + 3)
    P = edge_point(edge, s)
    fr = frame(patch.geometry, P, field.frame_order)
    g = field.evaluate(fr, P)[0]
    axis, _ = EDGES[edge]
    jac = np.linalg.norm(fr.a[:, 1 - axis], axis=1)
    spans, ders = basis_ders(kv, s, 0)
    N = np.zeros((len(s), kv.n))
    cols = spans[:, None] - kv.degree + np.arange(kv.degree + 1)
    np.put_along_axis(N, cols, ders[:, 0, :], axis=1)
    N = N[:, idx]
    fixed = {}
    for pos, (end, corner) in enumerate(((a, 0), (b, kv.n - 1))):
        if abs(end - kv.domain[pos]) < 1e-14 and corner in idx:
            Pc = edge_point(edge, [end])
            frc = frame(patch.geometry, Pc, field.frame_order)
            fixed[int(np.flatnonzero(idx == corner)[0])] = field.evaluate(frc, Pc)[0][0]
    free = [k for k in range(len(idx)) if k not in fixed]
    vals = np.zeros((len(idx), 3))
    for k, v in fixed.items():
        vals[k] = v
    rhs = g - N @ vals
    Wt = w * jac
    M = N[:, free].T @ (Wt[:, None] * N[:, free])
    F = N[:, free].T @ (Wt[:, None] * rhs)
    if free:
        vals[free] = np.linalg.lstsq(M, F, rcond=None)[0]
    return vals


# ------------------------------------------------------------ error norms

@dataclass
class ErrorNorms:
    L2: float
    H1: float
    H2: float
    energy: float

    def as_dict(self):
        return {"L2": self.L2, "H1": self.H1, "H2": self.H2, "energy": self.energy}


def error_norms(patches: Sequence[Patch], coeffs: np.ndarray, exact: ExactField,
                n: int | None = None) -> ErrorNorms:
    """L2, full H1/H2 and energy norms of ``u_h - u_ex`` summed over patches."""
    l2 = h1 = h2 = en = 0.0
    for patch in patches:
        pts, wts, eids = patch.quadrature(n or patch.degree + 3)
        for sl in _chunks(eids):
            P, W = pts[sl], wts[sl]
            fr, ev = _frames_and_basis(patch, P, 2, max(1, exact.frame_order))
            U = coeffs[patch.dofs_of(ev.indices)]
            uh = np.einsum("nk,nkc->nc", ev.values[:, 0], U)
            d1, d2 = _basis_derivs(ev)
            duh = np.einsum("nak,nkc->nac", d1, U)
            dduh = np.einsum("nabk,nkc->nabc", d2, U)
            u, du, ddu = exact.evaluate(fr, P)
            e, de, dde = uh - u, duh - du, dduh - ddu
            w = W * fr.jac
            g = fr.inv_metric
            l2 += np.sum(w * np.sum(e * e, axis=1))
            h1 += np.sum(w * np.einsum("nab,nai,nbi->n", g, de, de))
            cov = dde - np.einsum("ngab,ngi->nabi", fr.christoffel, de)
            h2 += np.sum(w * np.einsum("nac,nbd,nabi,ncdi->n", g, g, cov, cov))
            em, eb = strains_from_derivs(fr, de, dde)
            A, B, D = patch.material.abd(fr)
            q = (np.einsum("ni,nij,nj->n", em, A, em) + np.einsum("ni,nij,nj->n", eb, D, eb))
            if B is not None:
                q += 2.0 * np.einsum("ni,nij,nj->n", em, B, eb)
            en += np.sum(w * q)
    return ErrorNorms(float(np.sqrt(l2)), float(np.sqrt(l2 + h1)),
                      float(np.sqrt(l2 + h1 + h2)), float(np.sqrt(max(en, 0.0))))
