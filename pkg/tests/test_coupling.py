import numpy as np
import pytest

from klshell.bench.cases import bilinear, edge_curve, get_case
from klshell.coupling import (CrossPoint, Interface, InterfaceSide, MultiPatchModel,
                              PenaltyStrategy, build_interface, couple, cross_point_constraints,
                              jump_rows, penalty_matrix, penalty_parameters, projection_matrices)
from klshell.errors import ConstructionError, WatertightnessError
from klshell.numerics import solve
from klshell.shell import CartesianField, Isotropic, Patch, assemble_stiffness, dirichlet_edge, error_norms
from klshell.spline import SplineCurve, SplineSpace, eval_tensor_basis, uniform_knots
from klshell.trimming import intersect_curve_gridline

STRATEGIES = [PenaltyStrategy("classic"), PenaltyStrategy("scaled"),
              PenaltyStrategy("projected", "pp1"), PenaltyStrategy("projected", "p"),
              PenaltyStrategy("projected", "pm1")]


def square(x0, x1, y0=0.0, y1=1.0):
    return bilinear([(x0, y0, 0), (x0, y1, 0), (x1, y0, 0), (x1, y1, 0)])


def two_patches(nl, nr, p=2, mat=None, width=1.0, shift=0.0):
    """Unit squares side by side sharing the line x = 1."""
    mat = mat or Isotropic(1e6, 0.3, 0.005)
    left = Patch(square(0, 1, 0, width), SplineSpace([uniform_knots(p, nl)] * 2), mat)
    right = Patch(square(1 + shift, 2, 0, width), SplineSpace([uniform_knots(p, nr)] * 2), mat)
    iface = Interface((InterfaceSide(0, edge_curve(1)), InterfaceSide(1, edge_curve(3))))
    return MultiPatchModel([left, right], [iface])


def trimmed_pair(n_active=8, n_passive=5, p=2):
    """One square split by a quadratic curve into two independently meshed patches."""
    curve = SplineCurve.from_points(2, [(0.0, 0.13), (0.55, 1.1), (1.0, 0.37)])
    mat = Isotropic(1e6, 0.3, 0.005)
    a = Patch(square(0, 1), SplineSpace([uniform_knots(p, n_active)] * 2), mat, [curve])
    b = Patch(square(0, 1), SplineSpace([uniform_knots(p, n_passive)] * 2), mat,
              [curve.reversed()])
    iface = Interface((InterfaceSide(0, curve), InterfaceSide(1, curve)), active=0)
    return MultiPatchModel([a, b], [iface]), curve


def polynomial_coefficients(model, f):
    """Exact coefficients of a polynomial field reproduced by each patch's space."""
    u = np.zeros(model.ndof)
    g = (np.arange(30) + 0.5) / 30
    pts = np.array([(a, b) for a in g for b in g])
    for patch in model.patches:
        ev = eval_tensor_basis(patch.space, pts, 0)
        N = np.zeros((len(pts), patch.space.dim))
        np.put_along_axis(N, ev.indices, ev.values[:, 0], axis=1)
        C = np.linalg.lstsq(N, f(patch.geometry(pts)), rcond=None)[0]
        u[patch.dofs_of(patch.active).ravel()] = C[patch.active].ravel()
    return u


def quadratic_field(X):
    x, y = X[:, 0], X[:, 1]
    return np.column_stack([x * y + 1, x ** 2 - y, 0.5 * x ** 2 + x * y - y ** 2])


# ------------------------------------------------------------------ interface spaces

def test_conforming_interface_knots():
    space = build_interface(two_patches(3, 3), 0)
    assert np.allclose(space.kv.breakpoints, [0, 1 / 3, 2 / 3, 1], atol=1e-14)
    assert space.reduced.degrees == (0,) and space.reduced.dim == 3
    assert abs(space.length - 1) < 1e-14 and abs(space.h - 1 / 3) < 1e-14


def test_nonconforming_intersection_mesh():
    space = build_interface(two_patches(3, 4), 0)
    assert np.allclose(space.breaks, [0, 1 / 4, 1 / 3, 1 / 2, 2 / 3, 3 / 4, 1], atol=1e-14)
    # the finer side is active
    assert space.active == 1 and space.kv.num_elements == 4


def test_trimmed_interface_knots_match_grid_crossings():
    model, curve = trimmed_pair()
    space = build_interface(model, 0)
    s = np.linspace(0, 1, 400001)
    P = curve(s)
    count = 0
    for axis in (0, 1):
        for c in np.arange(1, 8) / 8:
            f = P[:, axis] - c
            count += np.count_nonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)
    interior = space.kv.breakpoints[1:-1]
    assert interior.size == count
    ref = sorted(t for axis in (0, 1) for c in np.arange(1, 8) / 8
                 for t in intersect_curve_gridline(curve, axis, c))
    assert np.allclose(interior, ref, atol=1e-13)


def test_trimmed_support_width():
    model, _ = trimmed_pair(p=2)
    space = build_interface(model, 0)
    rows = jump_rows(model, space)
    for k, patch in enumerate(model.patches):
        lo, hi = patch.offset, patch.offset + patch.ndof
        mask = (rows.dofs >= lo) & (rows.dofs < hi)
        nz = np.count_nonzero(np.abs(rows.disp[0][:, mask]) > 0, axis=1)
        assert np.all(nz == (patch.degree + 1) ** 2)


def test_watertightness_error():
    with pytest.raises(WatertightnessError):
        two_patches(3, 3, shift=1e-6)


def test_empty_interface_has_singular_mass_matrix():
    model = two_patches(3, 3)
    model.interfaces[0].t_range = (0.4, 0.4)
    with pytest.raises(ConstructionError, match="singular"):
        build_interface(model, 0)


# ------------------------------------------------------------------ penalty parameters

def test_projected_parameter_example():
    model = two_patches(4, 4, p=2, mat=Isotropic(1e6, 0.3, 0.005))
    space = build_interface(model, 0)
    assert abs(space.h - 0.25) < 1e-14
    a_disp, a_rot = penalty_parameters(PenaltyStrategy("projected", "pp1"), space,
                                       [p.material for p in model.patches])
    assert abs(a_disp - 1e6 * 0.005 / (0.25 ** 3 * 0.91)) < 1e-6
    assert abs(a_disp - 351648.35) < 0.01
    assert abs(a_rot - 0.7326) < 1e-4


def test_classic_parameters():
    space = build_interface(two_patches(4, 4), 0)
    mats = [Isotropic(1e6, 0.3, 0.005)] * 2
    assert penalty_parameters(PenaltyStrategy("classic"), space, mats) == (1e9, 1e9)


@pytest.mark.parametrize("strategy", STRATEGIES[1:], ids=lambda s: s.label)
@pytest.mark.parametrize("t", [0.001, 0.02, 0.3])
def test_rotation_to_displacement_ratio(strategy, t):
    space = build_interface(two_patches(3, 5, p=3), 0)
    a_disp, a_rot = penalty_parameters(strategy, space, [Isotropic(2e5, 0.25, t)] * 2)
    assert a_disp > 0 and a_rot > 0
    assert abs(a_rot / a_disp - t ** 2 / 12) < 1e-14


def test_unknown_strategy():
    with pytest.raises(ConstructionError):
        PenaltyStrategy("nitsche")
    with pytest.raises(ConstructionError):
        PenaltyStrategy("projected", "p2")


# ------------------------------------------------------------------ projection

def test_degree_zero_projection_is_the_average():
    space = build_interface(two_patches(1, 1), 0)
    assert space.reduced.dim == 1
    assert abs(space.project(space.s)[0, 0] - 0.5) < 1e-14


@pytest.mark.parametrize("p", [2, 3, 4])
def test_projection_idempotent(p):
    space = build_interface(two_patches(3, 4, p=p), 0)
    R = space.reduced_values()
    c = np.random.default_rng(p).random((R.shape[1], 3))
    assert np.abs(space.project(R @ c) - c).max() < 1e-12


def test_projection_orthogonality():
    model = two_patches(3, 5, p=3)
    space = build_interface(model, 0)
    op = projection_matrices(model, space)
    u = np.random.default_rng(0).standard_normal(op.dofs.size)
    for F in list(op.F_disp) + list(op.F_rot):
        ut = op.solve(F @ u)
        assert np.abs(op.M @ ut - F @ u).max() < 1e-11


def test_mass_matrix_structure():
    M2 = projection_matrices(two_patches(3, 5, p=2), build_interface(two_patches(3, 5, p=2), 0)).M
    assert np.count_nonzero(M2 - np.diag(np.diag(M2))) == 0
    model = two_patches(3, 6, p=3)
    M3 = projection_matrices(model, build_interface(model, 0)).M
    off = np.abs(np.triu(M3, 2)) + np.abs(np.tril(M3, -2))
    assert off.max() == 0 and np.abs(np.diag(M3, 1)).min() > 0
    assert np.linalg.eigvalsh(M3).min() > 0


def test_continuous_field_has_zero_jump():
    model = two_patches(3, 3, p=2)
    u = polynomial_coefficients(model, quadratic_field)
    op = projection_matrices(model, build_interface(model, 0))
    uloc = u[op.dofs]
    for F in list(op.F_disp) + list(op.F_rot):
        assert np.abs(F @ uloc).max() < 1e-12 * np.abs(uloc).max()


@pytest.mark.parametrize("strategy", STRATEGIES, ids=lambda s: s.label)
@pytest.mark.parametrize("nr", [3, 5])
def test_zero_penalty_energy_for_smooth_and_rigid_fields(strategy, nr):
    model = two_patches(3, nr, p=2)
    space = build_interface(model, 0)
    dofs, dK = penalty_matrix(model, space, strategy)
    nK = np.abs(dK).max()
    fields = [polynomial_coefficients(model, quadratic_field)]
    for c in range(3):
        r = np.zeros(model.ndof)
        r[c::3] = 1.0
        fields.append(r)
    for u in fields:
        x = u[dofs]
        assert abs(x @ dK @ x) < 1e-12 * nK * (x @ x)
    assert np.linalg.eigvalsh(dK).min() >= -1e-9 * np.linalg.norm(dK, 2)


def strip_h2(strategy):
    """Thin strip split at x = 1 with a bending-dominated manufactured field."""
    mat = Isotropic(1e6, 0.3, 0.01)
    model = two_patches(3, 4, p=2, mat=mat, width=0.5)
    exact = CartesianField(["0", "0", "sin(1.3*x) + 0.2*x*y"])
    system = model.system()
    for patch in model.patches:
        assemble_stiffness(system, patch, exact)
    for k, edges in ((0, (0, 2, 3)), (1, (0, 1, 2))):
        for e in edges:
            system.fixed.update(dirichlet_edge(model.patches[k], e, exact))
    couple(system, model, strategy)
    return error_norms(model.patches, solve(system).u, exact).H2


def test_projected_beats_classic_on_bending_strip():
    assert strip_h2(PenaltyStrategy("projected")) < strip_h2(PenaltyStrategy("classic"))


# ------------------------------------------------------------------ cross-points

def test_four_patch_cross_point_ties():
    model = get_case("four-patch").build(2, 1).model
    assert len(model.cross_points) == 1
    cons = cross_point_constraints(model)
    assert len(cons.ties) == 3 and not cons.penalties
    for master, slaves in cons.ties:
        assert len(slaves) == 3
        owners = {next(i for i, p in enumerate(model.patches)
                       if p.offset <= d < p.offset + p.ndof) for d in (master, *slaves)}
        assert owners == {0, 1, 2, 3}


def test_two_patches_have_no_cross_points():
    assert len(cross_point_constraints(two_patches(3, 4))) == 0


def solved(case_id, p, level):
    setup = get_case(case_id).build(p, level)
    system = setup.model.system()
    for patch in setup.model.patches:
        assemble_stiffness(system, patch, setup.exact)
    setup.apply_loads(system)
    setup.apply_boundary_conditions(system)
    couple(system, setup.model, PenaltyStrategy())
    return setup, solve(system).u


def cross_point_spread(setup, u):
    out = []
    for cp in setup.model.cross_points:
        vals = np.array([setup.model.patches[i].evaluate(u, [q])[0, 0] for i, q in cp.incident])
        out.append(np.abs(vals - vals[0]).max())
    return max(out)


def test_tied_cross_point_agrees_exactly():
    setup, u = solved("four-patch", 2, 1)
    assert cross_point_spread(setup, u) < 1e-12


def test_penalized_cross_point_agrees_to_discretization_error():
    spreads = []
    for level in (1, 2):
        setup, u = solved("cylinder", 2, level)
        assert len(cross_point_constraints(setup.model, [build_interface(setup.model, k)
                                           for k in range(len(setup.model.interfaces))],
                                           PenaltyStrategy()).penalties) > 0
        err = error_norms(setup.model.patches, u, setup.exact).L2
        spreads.append(cross_point_spread(setup, u))
        assert spreads[-1] < 10 * err
    assert spreads[1] < spreads[0]


def test_cross_point_preimages_must_agree():
    model = two_patches(2, 2)
    with pytest.raises(WatertightnessError):
        MultiPatchModel(model.patches, model.interfaces,
                        [CrossPoint([(0, (1.0, 1.0)), (1, (0.0, 0.5))])])


# ------------------------------------------------------- factored penalty solve

def coupled_system(case_id, p, level, strategy):
    setup = get_case(case_id).build(p, level)
    system = setup.model.system()
    for patch in setup.model.patches:
        assemble_stiffness(system, patch, setup.exact)
    setup.apply_loads(system)
    setup.apply_boundary_conditions(system)
    couple(system, setup.model, strategy)
    return setup, system


@pytest.mark.parametrize("strategy", STRATEGIES, ids=lambda s: s.label)
def test_penalties_are_kept_factored(strategy):
    _, system = coupled_system("four-patch", 2, 1, strategy)
    assert len(system.blocks) == 4
    model = get_case("four-patch").build(2, 1).model
    space = build_interface(model, 0)
    dofs, dK = penalty_matrix(model, space, strategy)
    b = system.blocks[0]
    assert np.array_equal(b.dofs, dofs)
    assert np.abs(b.dense() - dK).max() < 1e-9 * np.abs(dK).max()


def test_quadrature_penalty_matches_weighted_jumps():
    model = two_patches(3, 5)
    space = build_interface(model, 0)
    strategy = PenaltyStrategy("classic")
    mats = [p.material for p in model.patches]
    a_disp, a_rot = penalty_parameters(strategy, space, mats)
    rows = jump_rows(model, space)
    ref = sum(a_disp * J.T @ (space.w[:, None] * J) for J in rows.disp)
    ref = ref + a_rot * rows.rot.T @ (space.w[:, None] * rows.rot)
    dK = penalty_matrix(model, space, strategy)[1]
    assert np.abs(dK - ref).max() < 1e-12 * np.abs(ref).max()


@pytest.mark.parametrize("strategy", [PenaltyStrategy("projected", "pm1"), PenaltyStrategy("scaled")],
                         ids=lambda s: s.label)
@pytest.mark.parametrize("case_id", ["three-patch", "cylinder"])
def test_augmented_and_condensed_solves_agree(case_id, strategy):
    setup, system = coupled_system(case_id, 2, 1, strategy)
    a, c = solve(system), solve(system, augmented=False)
    assert np.abs(a.u - c.u).max() < 1e-7 * np.abs(c.u).max()
    ea = error_norms(setup.model.patches, a.u, setup.exact).as_dict()
    ec = error_norms(setup.model.patches, c.u, setup.exact).as_dict()
    assert abs(ea["H2"] - ec["H2"]) < 1e-6 * ec["H2"]
