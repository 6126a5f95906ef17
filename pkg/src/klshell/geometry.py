"""Differential geometry of shell mid-surfaces.

All quantities are computed for batches of parametric points.  Index
conventions: ``a[:, alpha]`` are the covariant tangents, ``da[:, alpha, beta]``
their parametric derivatives ``a_{alpha,beta}``, and the Christoffel symbols
are stored as ``christoffel[:, gamma, alpha, beta]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, DegenerateGeometryError
from .spline import SplineCurve, SplineSpace, deriv_orders, eval_tensor_basis

JACOBIAN_TOL = 1e-14


class SurfaceMap:
    """Spline map from the unit square into R^3."""

    def __init__(self, space: SplineSpace, control_points):
        if space.pdim != 2:
            raise ConstructionError("surface map needs a bivariate space")
        cp = np.asarray(control_points, dtype=float).reshape(-1, 3)
        if cp.shape[0] != space.dim:
            raise ConstructionError(
                f"expected {space.dim} control points, got {cp.shape[0]}")
        self.space = space
        self.control_points = cp

    def __repr__(self):
        return f"<SurfaceMap {self.space!r}>"

    def __call__(self, points) -> np.ndarray:
        return self.derivatives(points, 0)[:, 0, :]

    def derivatives(self, points, order: int) -> np.ndarray:
        """``(npts, nderiv, 3)`` with derivatives ordered as ``deriv_orders``."""
        ev = eval_tensor_basis(self.space, points, order)
        return np.einsum("nda,nac->ndc", ev.values, self.control_points[ev.indices])

    def transformed(self, rotation=None, translation=None) -> "SurfaceMap":
        cp = self.control_points
        if rotation is not None:
            cp = cp @ np.asarray(rotation, float).T
        if translation is not None:
            cp = cp + np.asarray(translation, float)
        return SurfaceMap(self.space, cp)

    def bounding_box_diagonal(self) -> float:
        cp = self.control_points
        return float(np.linalg.norm(cp.max(axis=0) - cp.min(axis=0)))


def _mi(*alphas: int) -> tuple[int, int]:
    """Multi-index of the mixed derivative along the listed directions."""
    return (sum(1 for a in alphas if a == 0), sum(1 for a in alphas if a == 1))


@dataclass
class SurfaceFrame:
    """Frame quantities at a batch of points (leading axis = point)."""

    x: np.ndarray                 # (n, 3)
    a: np.ndarray                 # (n, 2, 3) covariant tangents
    a3: np.ndarray                # (n, 3) unit normal
    jac: np.ndarray               # (n,) |a1 x a2|
    metric: np.ndarray            # (n, 2, 2) a_{ab}
    inv_metric: np.ndarray        # (n, 2, 2) a^{ab}
    contra: np.ndarray            # (n, 2, 3) a^a
    da: np.ndarray | None = None          # (n, 2, 2, 3) a_{a,b}
    christoffel: np.ndarray | None = None  # (n, 2, 2, 2) Gamma^g_{ab}
    curvature: np.ndarray | None = None    # (n, 2, 2) b_{ab}
    da3: np.ndarray | None = None          # (n, 2, 3) a3_{,a}
    dda: np.ndarray | None = None          # (n, 2, 2, 2, 3) a_{a,bc}
    dda3: np.ndarray | None = None         # (n, 2, 2, 3) a3_{,ab}

    def __len__(self):
        return self.x.shape[0]


def frame(smap: SurfaceMap, points, k: int = 0) -> SurfaceFrame:
    """Covariant/contravariant frame with derivatives up to order ``k <= 2``."""
    if not 0 <= k <= 2:
        raise ValueError("frame derivative order must be 0, 1 or 2")
    D = smap.derivatives(points, k + 1)
    pos = {o: i for i, o in enumerate(deriv_orders(k + 1, 2))}
    x = D[:, 0]
    a = np.stack([D[:, pos[(1, 0)]], D[:, pos[(0, 1)]]], axis=1)
    g = np.cross(a[:, 0], a[:, 1])
    jac = np.linalg.norm(g, axis=1)
    if np.any(jac < JACOBIAN_TOL):
        bad = int(np.argmin(jac))
        raise DegenerateGeometryError(
            f"|a1 x a2| = {jac[bad]:.3e} at parametric point {np.atleast_2d(points)[bad]}")
    a3 = g / jac[:, None]
    metric = np.einsum("nai,nbi->nab", a, a)
    det = metric[:, 0, 0] * metric[:, 1, 1] - metric[:, 0, 1] * metric[:, 1, 0]
    inv = np.empty_like(metric)
    inv[:, 0, 0] = metric[:, 1, 1] / det
    inv[:, 1, 1] = metric[:, 0, 0] / det
    inv[:, 0, 1] = inv[:, 1, 0] = -metric[:, 0, 1] / det
    contra = np.einsum("nab,nbi->nai", inv, a)
    fr = SurfaceFrame(x, a, a3, jac, metric, inv, contra)
    if k == 0:
        return fr

    da = np.empty((len(x), 2, 2, 3))
    for al in range(2):
        for be in range(2):
            da[:, al, be] = D[:, pos[_mi(al, be)]]
    fr.da = da
    fr.christoffel = np.einsum("nabi,ngi->ngab", da, contra)
    fr.curvature = np.einsum("nabi,ni->nab", da, a3)
    # g_{,a} = a1_{,a} x a2 + a1 x a2_{,a}
    dg = np.stack([np.cross(da[:, 0, al], a[:, 1]) + np.cross(a[:, 0], da[:, 1, al])
                   for al in range(2)], axis=1)
    djac = np.einsum("ni,nai->na", a3, dg)
    da3 = (dg - a3[:, None, :] * djac[:, :, None]) / jac[:, None, None]
    fr.da3 = da3
    if k == 1:
        return fr

    dda = np.empty((len(x), 2, 2, 2, 3))
    for al in range(2):
        for be in range(2):
            for ga in range(2):
                dda[:, al, be, ga] = D[:, pos[_mi(al, be, ga)]]
    fr.dda = dda
    ddg = np.empty((len(x), 2, 2, 3))
    for al in range(2):
        for be in range(2):
            ddg[:, al, be] = (np.cross(dda[:, 0, al, be], a[:, 1])
                              + np.cross(da[:, 0, al], da[:, 1, be])
                              + np.cross(da[:, 0, be], da[:, 1, al])
                              + np.cross(a[:, 0], dda[:, 1, al, be]))
    ddjac = (np.einsum("nbi,nai->nab", da3, dg)
             + np.einsum("ni,nabi->nab", a3, ddg))
    dda3 = (ddg
            - da3[:, None, :, :] * djac[:, :, None, None]
            - da3[:, :, None, :] * djac[:, None, :, None]
            - a3[:, None, None, :] * ddjac[:, :, :, None]) / jac[:, None, None, None]
    fr.dda3 = dda3
    return fr


def cartesian_to_curvilinear(fr: SurfaceFrame) -> tuple[np.ndarray, np.ndarray]:
    """Transformation coefficients ``Q[:, i, beta] = e_i . a_beta`` and ``Q3[:, i] = e_i . a3``."""
    return np.transpose(fr.a, (0, 2, 1)).copy(), fr.a3.copy()


@dataclass
class BoundaryTrace:
    """Curve-on-surface data at a batch of curve parameters."""

    t: np.ndarray
    preimage: np.ndarray       # (n, 2)
    point: np.ndarray          # (n, 3)
    tangent: np.ndarray        # (n, 3) unit, along increasing t
    normal: np.ndarray         # (n, 3) unit in-plane normal, outward
    normal_contra: np.ndarray  # (n, 2) n^alpha with n = n^alpha a_alpha
    jac: np.ndarray            # (n,) |dx/dt|
    frame: SurfaceFrame


def boundary_trace(smap: SurfaceMap, curve: SplineCurve, t, kept_left: bool = True,
                   k: int = 0) -> BoundaryTrace:
    """Trace of ``smap`` along a parametric curve.

    ``kept_left`` states on which side of the curve (looking along increasing
    ``t`` in parameter space) the patch material lies; the returned normal
    points away from it.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    cd = curve.derivatives(t, 1)
    pre, dpre = cd[:, 0, :], cd[:, 1, :]
    fr = frame(smap, pre, k)
    T = np.einsum("na,nai->ni", dpre, fr.a)
    jac = np.linalg.norm(T, axis=1)
    if np.any(jac < JACOBIAN_TOL):
        raise DegenerateGeometryError("zero tangent along boundary curve")
    tan = T / jac[:, None]
    left = np.cross(fr.a3, tan)
    normal = -left if kept_left else left
    ncontra = np.einsum("ni,nai->na", normal, fr.contra)
    return BoundaryTrace(t, pre, fr.x, tan, normal, ncontra, jac, fr)
