"""Benchmark catalogue: geometry builders, materials, loads and exact fields."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..coupling import CrossPoint, Interface, InterfaceSide, MultiPatchModel
from ..geometry import SurfaceMap, frame
from ..numerics import SparseSymmetricSystem
from ..shell import (CartesianField, ExactField, Isotropic, NormalField, ParametricField,
                     Patch, assemble_body_force, assemble_point_load, check_exact_derivatives,
                     dirichlet_edge)
from ..spline import (KnotVector, SplineCurve, SplineSpace, dyadic_midpoints,
                      open_knots)
from ..trimming import TrimCurve, intersect_curves

SHIFT = np.sqrt(2.0) / 100.0


# ------------------------------------------------------------------ helpers

def refined_knots(p: int, n0: int, level: int, shift: bool = False) -> KnotVector:
    """Open knot vector: ``n0`` uniform elements (optionally shifted), refined
    dyadically ``level - 1`` times."""
    interior = np.arange(1, n0) / n0
    if shift:
        interior = interior + SHIFT
    kv = open_knots(p, interior.tolist())
    for _ in range(level - 1):
        mids = dyadic_midpoints(kv)
        kv = open_knots(p, np.sort(np.r_[kv.interior_knots, mids]).tolist())
    return kv


def disc_space(p: int, n0: tuple[int, int], level: int, shift: bool = False) -> SplineSpace:
    return SplineSpace([refined_knots(p, n0[0], level, shift),
                        refined_knots(p, n0[1], level, shift)])


def _bezier2_space():
    return KnotVector(np.array([0, 0, 0, 1, 1, 1.0]), 2)


def _linear_kv():
    return KnotVector(np.array([0, 0, 1, 1.0]), 1)


def coons_quadratic(bottom, top, left, right) -> SurfaceMap:
    """Biquadratic patch from four quadratic Bezier edges (control points)."""
    P = np.zeros((3, 3, 3))
    for i in range(3):
        P[i, 0, :2] = bottom[i]
        P[i, 2, :2] = top[i]
        P[0, i, :2] = left[i]
        P[2, i, :2] = right[i]
    P[1, 1] = 0.5 * (P[1, 0] + P[1, 2] + P[0, 1] + P[2, 1]) \
        - 0.25 * (P[0, 0] + P[2, 0] + P[0, 2] + P[2, 2])
    sp = SplineSpace([_bezier2_space(), _bezier2_space()])
    return SurfaceMap(sp, P.reshape(-1, 3))


def bilinear(corners) -> SurfaceMap:
    """Map from corners ordered (0,0), (0,1), (1,0), (1,1) in (xi, eta)."""
    return SurfaceMap(SplineSpace([_linear_kv(), _linear_kv()]), np.asarray(corners, float))


def edge_curve(edge: int) -> SplineCurve:
    """Parametric straight edge, running in the increasing free coordinate."""
    return SplineCurve.line(*{0: ([0, 0], [1, 0]), 1: ([1, 0], [1, 1]),
                              2: ([0, 1], [1, 1]), 3: ([0, 0], [0, 1])}[edge])


def _side(patch: int, edge: int) -> InterfaceSide:
    return InterfaceSide(patch, edge_curve(edge))


@dataclass
class Setup:
    """A fully specified discrete problem at one refinement level."""

    model: MultiPatchModel
    exact: ExactField | None = None
    bcs: list = field(default_factory=list)          # (patch, edge, kwargs)
    extra_fixed: list = field(default_factory=list)  # (patch, function, component)
    loads: list = field(default_factory=list)        # callables(system, model)
    qoi: Callable | None = None                      # (model, u) -> dict

    def apply_boundary_conditions(self, system: SparseSymmetricSystem) -> None:
        for pi, edge, kw in self.bcs:
            system.fixed.update(dirichlet_edge(self.model.patches[pi], edge, **kw))
        for pi, func, comp in self.extra_fixed:
            patch = self.model.patches[pi]
            system.fix(patch.dofs_of(np.array([func]))[0, comp], 0.0)

    def apply_loads(self, system: SparseSymmetricSystem) -> None:
        for load in self.loads:
            load(system, self.model)


@dataclass(frozen=True)
class BenchmarkCase:
    id: str
    description: str
    builder: Callable
    defaults: dict
    qoi_names: tuple[str, ...] = ()
    manufactured: bool = True
    exact: Callable | None = None

    def build(self, degree: int, level: int, **params) -> Setup:
        cfg = {**self.defaults, **params}
        setup = self.builder(degree, level, **cfg)
        if setup.exact is not None:
            for patch in setup.model.patches:
                check_exact_derivatives(setup.exact, patch.geometry)
        return setup

    def exact_field(self, **params) -> ExactField | None:
        return None if self.exact is None else self.exact({**self.defaults, **params})


# ------------------------------------------------------------- four patches

FOUR_V_LOW = [(1, 0), (1.15, 0.5), (1, 1)]
FOUR_V_UP = [(1, 1), (0.85, 1.5), (1, 2)]
FOUR_H_LEFT = [(0, 1), (0.5, 1.15), (1, 1)]
FOUR_H_RIGHT = [(1, 1), (1.5, 0.85), (2, 1)]


def _line3(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return [a, 0.5 * (a + b), b]


def four_patch_maps() -> list[SurfaceMap]:
    return [
        coons_quadratic(_line3((0, 0), (1, 0)), FOUR_H_LEFT, _line3((0, 0), (0, 1)), FOUR_V_LOW),
        coons_quadratic(_line3((1, 0), (2, 0)), FOUR_H_RIGHT, FOUR_V_LOW, _line3((2, 0), (2, 1))),
        coons_quadratic(FOUR_H_LEFT, _line3((0, 2), (1, 2)), _line3((0, 1), (0, 2)), FOUR_V_UP),
        coons_quadratic(FOUR_H_RIGHT, _line3((1, 2), (2, 2)), FOUR_V_UP, _line3((2, 1), (2, 2))),
    ]


def four_patch_exact(cfg):
    return CartesianField(["sin(pi*x)*sin(pi*y)"] * 3)


def build_four_patch(p, level, E, nu, t, n0=4):
    mat = Isotropic(E, nu, t)
    shifted = (False, True, True, False)
    patches = [Patch(g, disc_space(p, (n0, n0), level, s), mat, name=f"patch{i + 1}")
               for i, (g, s) in enumerate(zip(four_patch_maps(), shifted))]
    ifaces = [Interface((_side(0, 1), _side(1, 3)), name="v-lower"),
              Interface((_side(2, 1), _side(3, 3)), name="v-upper"),
              Interface((_side(0, 2), _side(2, 0)), name="h-left"),
              Interface((_side(1, 2), _side(3, 0)), name="h-right")]
    cps = [CrossPoint([(0, (1.0, 1.0)), (1, (0.0, 1.0)), (2, (1.0, 0.0)), (3, (0.0, 0.0))],
                      name="center")]
    model = MultiPatchModel(patches, ifaces, cps)
    ex = four_patch_exact(None)
    outer = [(0, 0), (0, 3), (1, 0), (1, 1), (2, 2), (2, 3), (3, 1), (3, 2)]
    return Setup(model, ex, [(pi, e, {"field": ex}) for pi, e in outer])


# -------------------------------------------------------------- Scordelis-Lo

def cylinder_arc_map(x0, x1, phi0, phi1, R) -> SurfaceMap:
    """Cylindrical panel ``(x, R sin(phi), R cos(phi))``; xi along x, eta along phi."""
    half = 0.5 * (phi1 - phi0)
    pm = 0.5 * (phi0 + phi1)
    w = np.cos(half)
    arc = [(np.sin(phi0), np.cos(phi0)), (np.sin(pm) / w, np.cos(pm) / w),
           (np.sin(phi1), np.cos(phi1))]
    cps, weights = [], []
    for x in (x0, x1):
        for j, (s, c) in enumerate(arc):
            cps.append((x, R * s, R * c))
            weights.append(w if j == 1 else 1.0)
    sp = SplineSpace([_linear_kv(), _bezier2_space()], np.array(weights))
    return SurfaceMap(sp, cps)


def build_scordelis(p, level, E, nu, t, L, R, angle_deg, load, n0=4):
    mat = Isotropic(E, nu, t)
    phi = np.deg2rad(angle_deg)
    xs = np.linspace(0.0, L, 4)
    ps = np.array([-phi, 0.0, phi])
    patches, idx = [], {}
    for i in range(3):
        for j in range(2):
            idx[i, j] = len(patches)
            g = cylinder_arc_map(xs[i], xs[i + 1], ps[j], ps[j + 1], R)
            patches.append(Patch(g, disc_space(p, (n0, n0), level, (i + j) % 2 == 1), mat,
                                 name=f"roof{i}{j}"))
    ifaces = []
    for i in range(3):
        ifaces.append(Interface((_side(idx[i, 0], 2), _side(idx[i, 1], 0)), name=f"phi0-{i}"))
    for i in range(2):
        for j in range(2):
            ifaces.append(Interface((_side(idx[i, j], 1), _side(idx[i + 1, j], 3)),
                                    name=f"x{i + 1}-{j}"))
    cps = [CrossPoint([(idx[i, 0], (1.0, 1.0)), (idx[i, 1], (1.0, 0.0)),
                       (idx[i + 1, 0], (0.0, 1.0)), (idx[i + 1, 1], (0.0, 0.0))],
                      name=f"x{i + 1}") for i in range(2)]
    model = MultiPatchModel(patches, ifaces, cps)
    bcs = []
    for j in range(2):
        bcs.append((idx[0, j], 3, {"components": (1, 2)}))
        bcs.append((idx[2, j], 1, {"components": (1, 2)}))
    def gravity(system, model):
        for patch in model.patches:
            assemble_body_force(system, patch, lambda x: np.array([0.0, 0.0, -load]))

    target = np.array([0.5, 1.0])

    def qoi(model, u):
        uz = model.patches[idx[1, 1]].evaluate(u, target[None])[0, 0, 2]
        return {"u_z": float(uz), "u_z_normalized": float(uz / SCORDELIS_REF)}

    # the diaphragms leave the axial rigid translation free; fixing u_x of one
    # corner function removes it without affecting the vertical deflection
    return Setup(model, None, bcs, [(idx[0, 0], 0, 0)], [gravity], qoi)


SCORDELIS_REF = -32.01045


# ------------------------------------------------------------------ L-beam

def build_lbeam(p, level, E, nu, t, length, flange, web, force, n0=(8, 4)):
    mat = Isotropic(E, nu, t)
    g_fl = bilinear([(0, 0, 0), (0, flange, 0), (length, 0, 0), (length, flange, 0)])
    g_web = bilinear([(0, 0, 0), (0, 0, web), (length, 0, 0), (length, 0, web)])
    patches = [Patch(g_fl, disc_space(p, n0, level, False), mat, name="flange"),
               Patch(g_web, disc_space(p, n0, level, True), mat, name="web")]
    model = MultiPatchModel(patches, [Interface((_side(0, 0), _side(1, 0)), name="edge")])
    bcs = [(0, 3, {"rows": 2}), (1, 3, {"rows": 2})]
    tip = np.array([length, flange, 0.0])

    def point(system, model):
        assemble_point_load(system, model.patches, tip, np.array([0.0, 0.0, -force]))

    def qoi(model, u):
        uz = model.patches[0].evaluate(u, np.array([[1.0, 1.0]]))[0, 0, 2]
        return {"tip_u_z": float(uz), "angle_deg": float(lbeam_angle(model, u))}

    return Setup(model, None, bcs, [], [point], qoi)


def lbeam_angle(model, u, t: float = 1.0) -> float:
    """Angle between the patches at the free corner after deformation [deg].

    Undeformed angle between the patch normals plus the linearized relative
    rotation of the two patches about the common edge.
    """
    iface = model.interfaces[0]
    ends = [model.patches[s.patch].geometry(s.curve(np.array([0.0, 1.0]))) for s in iface.sides]
    tan = ends[0][1] - ends[0][0]
    tan /= np.linalg.norm(tan)
    omega, normals = [], []
    for side in iface.sides:
        patch = model.patches[side.patch]
        q = side.curve(np.array([t]))
        fr = frame(patch.geometry, q, 0)
        d = patch.evaluate(u, q, 1)[0]
        c = fr.contra[0] @ np.cross(tan, fr.a3[0])
        omega.append(-(fr.a3[0] @ (d[1] * c[0] + d[2] * c[1])))
        normals.append(fr.a3[0])
    base = np.degrees(np.arccos(np.clip(normals[0] @ normals[1], -1.0, 1.0)))
    return float(base + np.degrees(omega[0] - omega[1]))


# ------------------------------------------------------ trimmed three patches

THREE_C1 = [(0.65, 0.0), (0.8, 0.35), (0.55, 0.65), (0.7, 1.0)]
THREE_C2 = [(1.3, 0.0), (1.45, 0.35), (1.2, 0.65), (1.35, 1.0)]
THREE_RECTS = [(0.0, 0.9), (0.45, 1.55), (1.1, 2.0)]


def _scurve(points) -> SplineCurve:
    return SplineCurve.from_points(2, points, interior=[0.5])


def _to_param(curve: SplineCurve, x0, x1) -> SplineCurve:
    return curve.transformed(lambda P: np.column_stack([(P[:, 0] - x0) / (x1 - x0), P[:, 1]]))


def three_patch_exact(cfg):
    return CartesianField([0, 0, "sin(pi*x)*sin(pi*y)"])


def build_three_patch(p, level, E, nu, t, n0=4):
    mat = Isotropic(E, nu, t)
    c1, c2 = _scurve(THREE_C1), _scurve(THREE_C2)
    trims = [[TrimCurve(_to_param(c1, *THREE_RECTS[0]), keep_left=True)],
             [TrimCurve(_to_param(c1, *THREE_RECTS[1]), keep_left=False),
              TrimCurve(_to_param(c2, *THREE_RECTS[1]), keep_left=True)],
             [TrimCurve(_to_param(c2, *THREE_RECTS[2]), keep_left=False)]]
    patches = []
    for k, ((x0, x1), tr) in enumerate(zip(THREE_RECTS, trims)):
        g = bilinear([(x0, 0, 0), (x0, 1, 0), (x1, 0, 0), (x1, 1, 0)])
        patches.append(Patch(g, disc_space(p, (n0, n0), level, k == 1), mat, tr, name=f"plate{k + 1}"))
    ifaces = [Interface((InterfaceSide(0, _to_param(c1, *THREE_RECTS[0])),
                         InterfaceSide(1, _to_param(c1, *THREE_RECTS[1]))), name="c1"),
              Interface((InterfaceSide(1, _to_param(c2, *THREE_RECTS[1])),
                         InterfaceSide(2, _to_param(c2, *THREE_RECTS[2]))), name="c2")]
    model = MultiPatchModel(patches, ifaces)
    ex = three_patch_exact(None)
    bcs = [(k, e, {"field": ex}) for k, edges in enumerate(((0, 2, 3), (0, 2), (0, 1, 2)))
           for e in edges]
    return Setup(model, ex, bcs)


# ------------------------------------------------------------ trimmed astroid

ASTROID_CP = {  # P_ij, i along xi, j along eta
    (1, 1): (0, 0), (1, 2): (1 / 3, 1 / 2), (1, 3): (0, 1),
    (2, 1): (1 / 2, 1 / 3), (2, 2): (1 / 2, 1 / 2), (2, 3): (1 / 2, 2 / 3),
    (3, 1): (1, 0), (3, 2): (2 / 3, 1 / 2), (3, 3): (1, 1),
}
ASTROID_S1 = [(0.3, 0.0), (0.4, 0.35), (0.27, 0.65), (0.37, 1.0)]
ASTROID_S2 = [(0.63, 0.0), (0.73, 0.35), (0.6, 0.65), (0.7, 1.0)]


def astroid_map() -> SurfaceMap:
    cp = [(*ASTROID_CP[i, j], 0.0) for i in (1, 2, 3) for j in (1, 2, 3)]
    return SurfaceMap(SplineSpace([_bezier2_space(), _bezier2_space()]), cp)


def astroid_exact(cfg):
    return ParametricField(["(1/2 - eta)*xi**2*(xi - 1)**2*eta*(1 - eta)",
                            "(xi - 1/2)*eta**2*(eta - 1)**2*xi*(1 - xi)",
                            "xi*(1 - xi)*sin(pi*xi)*sin(pi*eta)"])


def build_astroid(p, level, E, nu, t, n0=4):
    mat = Isotropic(E, nu, t)
    s1, s2 = _scurve(ASTROID_S1), _scurve(ASTROID_S2)
    trims = [[TrimCurve(s1, True)], [TrimCurve(s1, False), TrimCurve(s2, True)],
             [TrimCurve(s2, False)]]
    g = astroid_map()
    patches = [Patch(g, disc_space(p, (n0, n0), level, k == 1), mat, tr, name=f"astroid{k + 1}")
               for k, tr in enumerate(trims)]
    ifaces = [Interface((InterfaceSide(0, s1), InterfaceSide(1, s1)), name="s1"),
              Interface((InterfaceSide(1, s2), InterfaceSide(2, s2)), name="s2")]
    model = MultiPatchModel(patches, ifaces)
    ex = astroid_exact(None)
    bcs = [(k, e, {"field": ex}) for k, edges in enumerate(((0, 2, 3), (0, 2), (0, 1, 2)))
           for e in edges]
    return Setup(model, ex, bcs)


# ----------------------------------------------------------- trimmed cylinder

CYL_V = [(0.5, 0.0), (0.6, 0.5), (0.5, 1.0)]
CYL_H = [(0.0, 0.5), (0.5, 0.6), (1.0, 0.5)]


def cylinder_map(R=1.0, span=np.pi / 2, height=1.0) -> SurfaceMap:
    """Circular arc of radius ``R`` in xi (rational), straight height in eta."""
    half = 0.5 * span
    w = np.cos(half)
    arc = [(R, 0.0), (R, R * np.tan(half)), (R * np.cos(span), R * np.sin(span))]
    cps, weights = [], []
    for j, (x, y) in enumerate(arc):
        for z in (0.0, height):
            cps.append((x, y, z))
            weights.append(w if j == 1 else 1.0)
    sp = SplineSpace([_bezier2_space(), _linear_kv()], np.array(weights))
    return SurfaceMap(sp, cps)


def cylinder_exact(cfg):
    return NormalField("-(xi - 1)**2*xi**2*eta*(eta - 1)")


def build_cylinder(p, level, E, nu, t, R, span, height, n0=4):
    mat = Isotropic(E, nu, t)
    V = SplineCurve.from_points(2, CYL_V)
    H = SplineCurve.from_points(2, CYL_H)
    (tv, th), = intersect_curves(TrimCurve(V), TrimCurve(H))
    g = cylinder_map(R, span, height)
    # kept sides: left of V is small xi; left of H (running +xi) is large eta
    layout = [(True, False), (False, False), (True, True), (False, True)]
    patches = []
    for k, (lv, lh) in enumerate(layout):
        trims = [TrimCurve(V, lv), TrimCurve(H, lh)]
        patches.append(Patch(g, disc_space(p, (n0, n0), level, k in (1, 2)), mat, trims,
                             name=f"cyl{k + 1}"))
    ifaces = [Interface((InterfaceSide(0, V), InterfaceSide(1, V)), (0.0, tv), name="v-lower"),
              Interface((InterfaceSide(2, V), InterfaceSide(3, V)), (tv, 1.0), name="v-upper"),
              Interface((InterfaceSide(0, H), InterfaceSide(2, H)), (0.0, th), name="h-left"),
              Interface((InterfaceSide(1, H), InterfaceSide(3, H)), (th, 1.0), name="h-right")]
    c = tuple(V(np.array([tv]))[0])
    model = MultiPatchModel(patches, ifaces, [CrossPoint([(k, c) for k in range(4)], name="x")])
    ex = cylinder_exact(None)
    edges = ((0, 3), (0, 1), (2, 3), (1, 2))
    bcs = [(k, e, {"field": ex}) for k, es in enumerate(edges) for e in es]
    return Setup(model, ex, bcs)


# ---------------------------------------------------------------- catalogue

def case_catalogue() -> list[BenchmarkCase]:
    return [
        BenchmarkCase("four-patch", "four non-trimmed planar patches, curved interfaces",
                      build_four_patch, dict(E=1e6, nu=0.3, t=0.005),
                      exact=four_patch_exact),
        BenchmarkCase("scordelis-lo", "Scordelis-Lo roof, six non-conforming patches",
                      build_scordelis, dict(E=4.32e8, nu=0.0, t=0.025, L=50.0, R=25.0,
                                            angle_deg=40.0, load=90.0),
                      qoi_names=("u_z", "u_z_normalized"), manufactured=False),
        BenchmarkCase("l-beam", "L-section beam, two patches at a right angle",
                      build_lbeam, dict(E=1e7, nu=0.3, t=0.05, length=2.0, flange=0.5,
                                        web=0.5, force=10.0),
                      qoi_names=("tip_u_z", "angle_deg"), manufactured=False),
        BenchmarkCase("three-patch", "pure bending of three trimmed planar patches",
                      build_three_patch, dict(E=1e6, nu=0.3, t=0.01),
                      exact=three_patch_exact),
        BenchmarkCase("astroid", "trimmed astroid, three patches",
                      build_astroid, dict(E=1e6, nu=0.3, t=0.005),
                      exact=astroid_exact),
        BenchmarkCase("cylinder", "trimmed cylinder, four patches with a cross-point",
                      build_cylinder, dict(E=1e7, nu=0.3, t=0.001, R=1.0,
                                           span=float(np.pi / 2), height=1.0),
                      exact=cylinder_exact),
    ]


def get_case(case_id: str) -> BenchmarkCase:
    for c in case_catalogue():
        if c.id == case_id:
            return c
    raise KeyError(f"unknown case {case_id!r}; available: "
                   + ", ".join(c.id for c in case_catalogue()))
