"""Quick property suite behind ``bench verify``.

Each check returns a :class:`Check` holding the measured quantity and its
tolerance, so the CLI and the test-suite can share the same oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..coupling import PenaltyStrategy, build_interface, couple
from ..geometry import SurfaceMap, frame
from ..numerics import SparseSymmetricSystem
from ..shell import Isotropic, Laminate, Patch, Ply, assemble_stiffness
from ..spline import SplineCurve, SplineSpace, eval_tensor_basis, h_refine, uniform_knots
from ..trimming import classify_elements
from .cases import bilinear, disc_space, get_case


@dataclass
class Check:
    name: str
    value: float
    tol: float

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.value) and self.value < self.tol)

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'}  {self.name:<40} {self.value:.2e} (< {self.tol:.0e})"


def _rng():
    return np.random.default_rng(1234)


def partition_of_unity() -> Check:
    space = SplineSpace([uniform_knots(3, 7), uniform_knots(2, 5)])
    pts = _rng().random((200, 2))
    ev = eval_tensor_basis(space, pts, 0)
    return Check("partition of unity", float(np.abs(ev.values[:, 0].sum(-1) - 1).max()), 1e-12)


def knot_insertion() -> Check:
    rng = _rng()
    space = SplineSpace([uniform_knots(3, 3), uniform_knots(2, 4)])
    cp = rng.random((space.dim, 3))
    fine, T = h_refine(space, [[0.1, 0.55], [0.3]])
    a, b = SurfaceMap(space, cp), SurfaceMap(fine, T @ cp)
    pts = rng.random((100, 2))
    return Check("knot insertion exactness", float(np.abs(a(pts) - b(pts)).max()), 1e-13)


def quarter_circle() -> Check:
    w = np.sqrt(0.5)
    c = SplineCurve.from_points(2, [[1, 0], [1, 1], [0, 1]], weights=[1, w, 1])
    r = np.linalg.norm(c(np.linspace(0, 1, 101)), axis=1)
    return Check("rational quarter circle radius", float(np.abs(r - 1).max()), 1e-14)


def parabola_area() -> Check:
    # eta = 4 xi (1 - xi) traversed right to left keeps the region below it
    curve = SplineCurve.from_points(2, [[1.0, 0.0], [0.5, 2.0], [0.0, 0.0]])
    dom = classify_elements(SplineSpace([uniform_knots(2, 6)] * 2), [curve])
    return Check("parabola-trimmed area", abs(dom.area() - 2.0 / 3.0), 1e-10)


def projection_idempotence() -> Check:
    model = get_case("four-patch").build(3, 1).model
    space = build_interface(model, 0)
    R = space.reduced_values()
    c = _rng().random((R.shape[1], 3))
    err = np.abs(space.project(R @ c) - c).max() / np.abs(c).max()
    return Check("projection idempotence", float(err), 1e-12)


def _coupled_matrix(strategy="projected"):
    model = get_case("four-patch").build(2, 1).model
    system = model.system()
    for p in model.patches:
        assemble_stiffness(system, p)
    couple(system, model, PenaltyStrategy(strategy, "pp1"))
    # corner ties become explicit pairs for the null-space check
    K = system.matrix.tolil()
    for master, slaves in system.ties:
        for s in slaves:
            for i, j in ((master, master), (s, s)):
                K[i, j] += 1.0
            K[master, s] -= 1.0
            K[s, master] -= 1.0
    return model, K.tocsr()


def rigid_body_energy() -> Check:
    model, K = _coupled_matrix()
    worst = 0.0
    knorm = abs(K).max()
    for c in range(3):
        u = np.zeros(model.ndof)
        u[c::3] = 1.0
        worst = max(worst, float(u @ (K @ u)) / (knorm * (u @ u)))
    # rotation of a flat single patch with linear geometry in the discretization space
    space = disc_space(2, (3, 3), 1)
    geom = bilinear([(0, 0, 0), (0, 1, 0), (2, 0, 0), (2, 1, 0.5)])
    patch = Patch(geom, space, Isotropic(1e6, 0.3, 0.01))
    sysm = SparseSymmetricSystem(patch.ndof)
    assemble_stiffness(sysm, patch)
    Kp = sysm.matrix
    Xc = _elevated_coefficients(geom, space)
    for axis in np.eye(3):
        u = np.cross(axis, Xc).ravel()
        worst = max(worst, float(u @ (Kp @ u)) / (abs(Kp).max() * (u @ u)))
    return Check("rigid-body null energy", abs(worst), 1e-10)


def _elevated_coefficients(geom: SurfaceMap, space: SplineSpace) -> np.ndarray:
    """Coefficients of the geometry in ``space`` by interpolation at Greville points."""
    gr = [np.array([kv.knots[i + 1:i + kv.degree + 1].mean() for i in range(kv.n)])
          for kv in space.knot_vectors]
    G = np.array([(a, b) for a in gr[0] for b in gr[1]])
    ev = eval_tensor_basis(space, G, 0)
    A = np.zeros((len(G), space.dim))
    np.put_along_axis(A, ev.indices, ev.values[:, 0], axis=1)
    return np.linalg.solve(A, geom(G))


def stiffness_symmetry() -> Check:
    _, K = _coupled_matrix()
    return Check("stiffness symmetry", float(abs(K - K.T).max() / abs(K).max()), 1e-12)


def laminate_isotropic() -> Check:
    E, nu, t = 7e10, 0.3, 0.02
    lam = Laminate((Ply(E, E, E / (2 * (1 + nu)), nu, 0.6, t),))
    iso = Isotropic(E, nu, t)
    geom = bilinear([(0, 0, 0), (0.2, 1, 0.1), (1.5, 0.1, 0), (1.2, 1.3, 0.4)])
    fr = frame(geom, _rng().random((20, 2)), 1)
    worst = 0.0
    for a, b in zip(lam.abd(fr)[::2], iso.abd(fr)[::2]):
        worst = max(worst, float(np.abs(a - b).max() / np.abs(b).max()))
    return Check("single-ply laminate equals isotropic", worst, 1e-10)


def symmetric_stack() -> Check:
    ply = dict(E1=1.4e11, E2=1e10, G12=5e9, nu12=0.3, thickness=0.001)
    lam = Laminate(tuple(Ply(angle=a, **ply) for a in (0.0, np.pi / 4, np.pi / 4, 0.0)))
    A, B, _ = lam.local_abd()
    return Check("symmetric stack coupling B", float(np.abs(B).max() / np.abs(A).max()), 1e-12)


CHECKS: list[Callable[[], Check]] = [
    partition_of_unity, knot_insertion, quarter_circle, parabola_area,
    projection_idempotence, rigid_body_energy, stiffness_symmetry,
    laminate_isotropic, symmetric_stack,
]


def run_checks() -> list[Check]:
    return [c() for c in CHECKS]
