"""Multi-patch coupling: interfaces, reduced projection spaces, penalty
strategies and cross-point constraints.

An interface is described by one parametric preimage curve per side, both
parametrized by a common parameter ``t`` so that ``F_m(g_m(t)) = F_n(g_n(t))``.
Only the sub-range ``t_range`` of the curves forms the interface.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import ConstructionError, WatertightnessError
from .geometry import BoundaryTrace, boundary_trace
from .numerics import SparseSymmetricSystem, segment_rule
from .shell import Isotropic, Patch
from .spline import (KnotVector, SplineCurve, SplineSpace, build_reduced_space,
                     eval_tensor_basis, open_knots)
from .trimming import intersect_curve_gridline

log = logging.getLogger(__name__)

WATERTIGHT_TOL = 1e-10


@dataclass
class InterfaceSide:
    patch: int
    curve: SplineCurve          # preimage in the patch parameter domain


@dataclass
class Interface:
    sides: tuple[InterfaceSide, InterfaceSide]
    t_range: tuple[float, float] = (0.0, 1.0)
    active: int | None = None   # side index; None -> finer side
    name: str = ""


@dataclass
class CrossPoint:
    incident: list[tuple[int, tuple[float, float]]]   # (patch, parametric location)
    name: str = ""


class MultiPatchModel:
    """Patches, interfaces and cross-points with a global dof numbering."""

    def __init__(self, patches: Sequence[Patch], interfaces: Sequence[Interface] = (),
                 cross_points: Sequence[CrossPoint] = ()):
        self.patches = list(patches)
        self.interfaces = list(interfaces)
        self.cross_points = list(cross_points)
        off = 0
        for p in self.patches:
            p.offset = off
            off += p.ndof
        self.ndof = off
        for iface in self.interfaces:
            if len(iface.sides) != 2:
                raise ConstructionError("an interface joins exactly two patches")
            check_watertight(self, iface)
        for cp in self.cross_points:
            X = [self.patches[i].geometry(np.array([q]))[0] for i, q in cp.incident]
            diam = max(p.geometry.bounding_box_diagonal() for p in self.patches)
            if max(np.linalg.norm(x - X[0]) for x in X) > WATERTIGHT_TOL * diam:
                raise WatertightnessError(f"cross-point {cp.name!r} preimages disagree")

    def system(self) -> SparseSymmetricSystem:
        return SparseSymmetricSystem(self.ndof)


def check_watertight(model: MultiPatchModel, iface: Interface, samples: int = 50) -> float:
    t0, t1 = iface.t_range
    t = np.linspace(t0, t1, samples)
    X = [model.patches[s.patch].geometry(s.curve(t)) for s in iface.sides]
    gap = float(np.max(np.linalg.norm(X[0] - X[1], axis=1)))
    diam = max(model.patches[s.patch].geometry.bounding_box_diagonal() for s in iface.sides)
    if gap > WATERTIGHT_TOL * diam:
        raise WatertightnessError(
            f"interface {iface.name!r}: physical gap {gap:.3e} exceeds tolerance")
    return gap


# ----------------------------------------------------------- interface space

def _crossings(patch: Patch, curve: SplineCurve, t0: float, t1: float) -> np.ndarray:
    out = []
    for axis, kv in enumerate(patch.space.knot_vectors):
        for c in kv.breakpoints[1:-1]:
            out.extend(intersect_curve_gridline(curve, axis, c).tolist())
    out = np.array(sorted(t for t in out if t0 + 1e-12 < t < t1 - 1e-12))
    if out.size > 1:
        out = out[np.concatenate([[True], np.diff(out) > 1e-10])]
    return out


def _kept_left(patch: Patch, curve: SplineCurve, t0: float, t1: float) -> bool:
    tm = 0.5 * (t0 + t1)
    d = curve.derivatives(np.array([tm]), 1)[0]
    tan = d[1] / np.linalg.norm(d[1])
    left = np.array([-tan[1], tan[0]])
    for eps in (1e-6, 1e-4):
        for sign, res in ((1.0, True), (-1.0, False)):
            q = d[0] + sign * eps * left
            if np.all((q > 0) & (q < 1)) and patch.domain.contains(q[None])[0]:
                return res
    raise ConstructionError("cannot determine the kept side of an interface curve")


@dataclass
class InterfaceSpace:
    """Quadrature and projection structures of one interface."""

    interface: Interface
    active: int
    degree: int
    kv: KnotVector                 # interface knot vector (normalized parameter)
    reduced: SplineSpace
    breaks: np.ndarray             # intersection mesh, curve parameter
    t: np.ndarray                  # quadrature parameters
    w: np.ndarray                  # arc-length weights
    traces: tuple[BoundaryTrace, BoundaryTrace]
    length: float
    h: float
    tangent: np.ndarray            # (nq, 3) common physical unit tangent

    @property
    def s(self) -> np.ndarray:
        t0, t1 = self.interface.t_range
        return (self.t - t0) / (t1 - t0)

    def reduced_values(self) -> np.ndarray:
        """``(nq, nr)`` values of the reduced basis at the quadrature points."""
        ev = eval_tensor_basis(self.reduced, self.s[:, None], 0)
        R = np.zeros((len(self.t), self.reduced.dim))
        np.put_along_axis(R, ev.indices, ev.values[:, 0], axis=1)
        return R

    def mass_matrix(self) -> np.ndarray:
        R = self.reduced_values()
        return R.T @ (self.w[:, None] * R)

    def project(self, values: np.ndarray) -> np.ndarray:
        """Coefficients of the L2 projection of qp values onto the reduced space."""
        R = self.reduced_values()
        M = R.T @ (self.w[:, None] * R)
        return np.linalg.solve(M, R.T @ (self.w[:, None] * np.asarray(values).reshape(len(self.t), -1)))


def build_interface(model: MultiPatchModel, index: int, active: int | None = None) -> InterfaceSpace:
    iface = model.interfaces[index]
    t0, t1 = iface.t_range
    if not t1 - t0 > 1e-12:
        raise ConstructionError(
            f"interface {iface.name!r} is empty: singular interface mass matrix")
    cross = [_crossings(model.patches[s.patch], s.curve, t0, t1) for s in iface.sides]
    if active is None:
        active = iface.active
    if active is None:
        active = 0 if len(cross[0]) >= len(cross[1]) else 1
    pa = model.patches[iface.sides[active].patch]
    p = pa.degree
    s_bp = (cross[active] - t0) / (t1 - t0)
    kv = open_knots(p, s_bp.tolist())
    reduced = build_reduced_space(kv)

    curve_knots = []
    for s in iface.sides:
        ck = s.curve.knot_vector.breakpoints
        curve_knots.extend(ck[(ck > t0) & (ck < t1)].tolist())
    bp = np.unique(np.r_[t0, t1, cross[0], cross[1], curve_knots])
    bp = bp[np.concatenate([[True], np.diff(bp) > 1e-13])]
    bp[-1] = t1
    t, w = segment_rule(bp, p + 1)
    traces = []
    for side in iface.sides:
        patch = model.patches[side.patch]
        traces.append(boundary_trace(patch.geometry, side.curve, t,
                                     _kept_left(patch, side.curve, t0, t1), k=1))
    wa = w * traces[0].jac
    length = float(wa.sum())
    n_el = kv.num_elements
    tangent = traces[0].tangent
    return InterfaceSpace(iface, active, p, kv, reduced, bp, t, wa, tuple(traces),
                          length, length / n_el, tangent)


# --------------------------------------------------------------- strategies

BETA_CODES = {"pm1": -1, "p": 0, "pp1": 1}


@dataclass(frozen=True)
class PenaltyStrategy:
    kind: str = "projected"       # classic | scaled | projected
    beta: str = "pp1"             # pm1 | p | pp1 (projected only)
    delta: float = 1e3            # scaled strategy factor
    factor: float = 1e3           # classic strategy factor (alpha = factor * E)

    def __post_init__(self):
        if self.kind not in ("classic", "scaled", "projected"):
            raise ConstructionError(f"unknown strategy {self.kind!r}")
        if self.beta not in BETA_CODES:
            raise ConstructionError(f"unknown beta code {self.beta!r}")

    @property
    def projected(self) -> bool:
        return self.kind == "projected"

    def beta_value(self, p: int) -> int:
        return p + BETA_CODES[self.beta]

    @property
    def label(self) -> str:
        return f"{self.kind}-{self.beta}" if self.projected else self.kind


def _youngs(material) -> float:
    if isinstance(material, Isotropic):
        return material.E
    return max(max(p.E1, p.E2) for p in material.plies)


def penalty_parameters(strategy: PenaltyStrategy, space: InterfaceSpace,
                       materials) -> tuple[float, float]:
    """``(alpha_disp, alpha_rot)`` for one interface (minimum over both sides)."""
    if strategy.kind == "classic":
        E = min(_youngs(m) for m in materials)
        return strategy.factor * E, strategy.factor * E
    scales = [m.stiffness_scales() for m in materials]
    m_disp = min(s[0] for s in scales)
    m_rot = min(s[1] for s in scales)
    h = space.h
    if strategy.kind == "scaled":
        return strategy.delta * m_disp / h, strategy.delta * m_rot / h
    beta = strategy.beta_value(space.degree)
    f = space.length ** (beta - 1) / h ** beta
    return f * m_disp, f * m_rot


# ------------------------------------------------------------- jump rows

@dataclass
class JumpRows:
    """Dense jump rows at the interface quadrature points over local dofs."""

    dofs: np.ndarray               # (nint,) global dofs
    disp: np.ndarray               # (3, nq, nint)
    rot: np.ndarray                # (nq, nint) rotation jump about the tangent
    sin: np.ndarray                # (nq,)
    cos: np.ndarray                # (nq,)


def jump_rows(model: MultiPatchModel, space: InterfaceSpace) -> JumpRows:
    iface = space.interface
    nq = len(space.t)
    per_side = []
    for sign, side, tr in zip((1.0, -1.0), iface.sides, space.traces):
        patch = model.patches[side.patch]
        ev = eval_tensor_basis(patch.space, tr.preimage, 1)
        dofs = patch.dofs_of(ev.indices)                            # (nq, nloc, 3)
        fr = tr.frame
        # omega = -(a3 . u_{,a}) c^a with c^a = (t x a3) . a^a
        c = np.einsum("ni,nai->na", np.cross(space.tangent, fr.a3), fr.contra)
        d1 = np.stack([ev.d(1, 0), ev.d(0, 1)], axis=1)
        dc = np.einsum("nak,na->nk", d1, c)
        rot = -dc[:, :, None] * fr.a3[:, None, :]
        per_side.append((sign, dofs, ev.values[:, 0], rot))
    all_dofs = np.unique(np.concatenate([d.ravel() for _, d, _, _ in per_side]))
    nint = all_dofs.size
    disp = np.zeros((3, nq, nint))
    rotm = np.zeros((nq, nint))
    rows = np.arange(nq)[:, None]
    for sign, dofs, N, rot in per_side:
        loc = np.searchsorted(all_dofs, dofs)                        # (nq, nloc, 3)
        for comp in range(3):
            np.add.at(disp[comp], (rows, loc[:, :, comp]), sign * N)
        np.add.at(rotm, (rows[:, :, None], loc), sign * rot)
    A3m, A3n = space.traces[0].frame.a3, space.traces[1].frame.a3
    s = np.linalg.norm(np.cross(A3m, A3n), axis=1)
    co = np.einsum("ni,ni->n", A3m, A3n)
    return JumpRows(all_dofs, disp, rotm, s, co)


@dataclass
class ProjectionOperator:
    """Mass matrix of the reduced space and projected jump right-hand sides."""

    M: np.ndarray
    F_disp: np.ndarray             # (3, nr, nint)
    F_rot: np.ndarray              # (2, nr, nint) sin- and cos-weighted rotation terms
    dofs: np.ndarray
    factor: tuple

    def solve(self, F: np.ndarray) -> np.ndarray:
        return la.cho_solve(self.factor, F)


def projection_matrices(model: MultiPatchModel, space: InterfaceSpace,
                        rows: JumpRows | None = None) -> ProjectionOperator:
    rows = rows or jump_rows(model, space)
    R = space.reduced_values()
    RW = R * space.w[:, None]
    M = R.T @ RW
    if not np.all(np.isfinite(M)) or M.size == 0 or np.min(np.diag(M)) <= 0:
        raise ConstructionError("singular interface mass matrix")
    Fd = np.einsum("qr,cqk->crk", RW, rows.disp)
    Fr = np.stack([RW.T @ (rows.sin[:, None] * rows.rot),
                   RW.T @ (rows.cos[:, None] * rows.rot)])
    try:
        factor = la.cho_factor(M)
    except la.LinAlgError as exc:
        raise ConstructionError("singular interface mass matrix") from exc
    return ProjectionOperator(M, Fd, Fr, rows.dofs, factor)


def penalty_factors(model: MultiPatchModel, space: InterfaceSpace,
                    strategy: PenaltyStrategy) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Penalty term as ``(dofs, B, C)`` with ``dK = B^T C^{-1} B``.

    For the projected strategy ``B`` stacks the projected jump rows and ``C``
    is the interface mass matrix over the penalty parameter.  Otherwise ``B``
    holds the jump rows at the quadrature points and ``C`` is diagonal with
    entries ``1 / (alpha w)``.
    """
    mats = [model.patches[s.patch].material for s in space.interface.sides]
    a_disp, a_rot = penalty_parameters(strategy, space, mats)
    rows = jump_rows(model, space)
    if strategy.projected:
        op = projection_matrices(model, space, rows)
        terms = [(F, a_disp) for F in op.F_disp] + [(F, a_rot) for F in op.F_rot]
        B = np.concatenate([F for F, _ in terms])
        C = la.block_diag(*[op.M / a for _, a in terms])
        return rows.dofs, B, C
    B = np.concatenate(list(rows.disp) + [rows.rot])
    wr = (rows.sin ** 2 + rows.cos ** 2) * space.w
    C = np.diag(np.concatenate([1.0 / (a_disp * space.w)] * 3 + [1.0 / (a_rot * wr)]))
    return rows.dofs, B, C


def penalty_matrix(model: MultiPatchModel, space: InterfaceSpace,
                   strategy: PenaltyStrategy) -> tuple[np.ndarray, np.ndarray]:
    """Dense penalty block over the interface dofs: ``(dofs, dK)``."""
    dofs, B, C = penalty_factors(model, space, strategy)
    dK = B.T @ la.solve(C, B, assume_a="pos")
    return dofs, 0.5 * (dK + dK.T)


def assemble_penalty(system: SparseSymmetricSystem, model: MultiPatchModel,
                     space: InterfaceSpace, strategy: PenaltyStrategy) -> None:
    # kept factored so the solver never forms the badly scaled sum K + dK
    system.add_penalty_block(*penalty_factors(model, space, strategy))


# ------------------------------------------------------------ cross-points

def _corner_function(patch: Patch, q) -> int | None:
    n0, n1 = patch.space.shape
    q = np.asarray(q, float)
    if not np.all(np.minimum(np.abs(q), np.abs(q - 1.0)) < 1e-12):
        return None
    i = 0 if q[0] < 0.5 else n0 - 1
    j = 0 if q[1] < 0.5 else n1 - 1
    f = i * n1 + j
    return f if patch.local_of[f] >= 0 else None


@dataclass
class CrossPointConstraints:
    ties: list[tuple[int, tuple[int, ...]]] = field(default_factory=list)
    penalties: list[tuple[int, np.ndarray, np.ndarray, float]] = field(default_factory=list)

    def __len__(self):
        return len(self.ties) + len(self.penalties)


def cross_point_constraints(model: MultiPatchModel, spaces: Sequence[InterfaceSpace] = (),
                            strategy: PenaltyStrategy | None = None) -> CrossPointConstraints:
    """Corner ties where every incident location is an untrimmed patch corner,
    otherwise pairwise point penalties with coefficient ``max(alpha_disp * h)``."""
    out = CrossPointConstraints()
    for k, cp in enumerate(model.cross_points):
        corners = [_corner_function(model.patches[i], q) for i, q in cp.incident]
        if all(c is not None for c in corners):
            dofs = [model.patches[i].dofs_of(np.array([f]))[0]
                    for (i, _), f in zip(cp.incident, corners)]
            for comp in range(3):
                out.ties.append((int(dofs[0][comp]), tuple(int(d[comp]) for d in dofs[1:])))
            continue
        if strategy is None:
            raise ConstructionError("point-penalty cross-points need a strategy")
        pids = {i for i, _ in cp.incident}
        coef = 0.0
        for sp_ in spaces:
            if {s.patch for s in sp_.interface.sides} <= pids:
                mats = [model.patches[s.patch].material for s in sp_.interface.sides]
                coef = max(coef, penalty_parameters(strategy, sp_, mats)[0] * sp_.h)
        if coef == 0.0:
            raise ConstructionError(f"cross-point {k} has no incident interface")
        for (i, qi), (j, qj) in itertools.combinations(cp.incident, 2):
            out.penalties.append((k, _point_row(model, i, qi, j, qj)[0],
                                  _point_row(model, i, qi, j, qj)[1], coef))
    return out


def _point_row(model, i, qi, j, qj):
    """Dofs and values of the scalar functional ``u^i(q_i) - u^j(q_j)`` (per component)."""
    vals, dofs = [], []
    for sign, pi, q in ((1.0, i, qi), (-1.0, j, qj)):
        patch = model.patches[pi]
        ev = eval_tensor_basis(patch.space, np.array([q], float), 0)
        dofs.append(patch.dofs_of(ev.indices[0]))                  # (nloc, 3)
        vals.append(sign * ev.values[0, 0])
    return np.concatenate(dofs), np.concatenate(vals)


def apply_cross_points(system: SparseSymmetricSystem, cons: CrossPointConstraints) -> None:
    for master, slaves in cons.ties:
        system.tie(master, slaves)
    for _, dofs, vals, coef in cons.penalties:
        for comp in range(3):
            d = dofs[:, comp]
            system.add_triplets(np.repeat(d, d.size), np.tile(d, d.size),
                                coef * np.outer(vals, vals).ravel())


def couple(system: SparseSymmetricSystem, model: MultiPatchModel,
           strategy: PenaltyStrategy) -> list[InterfaceSpace]:
    """Assemble all interface penalties and cross-point constraints."""
    spaces = [build_interface(model, k) for k in range(len(model.interfaces))]
    for space in spaces:
        assemble_penalty(system, model, space, strategy)
    apply_cross_points(system, cross_point_constraints(model, spaces, strategy))
    return spaces
