import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from klshell.errors import ConstructionError, DomainError, UnsupportedDegreeError
from klshell.spline import (KnotVector, SplineCurve, SplineSpace, basis_ders,
                            build_reduced_space, eval_basis, eval_tensor_basis, h_refine,
                            insert_knots, open_knots, uniform_knots)

mpmath.mp.dps = 40


def cox_de_boor(knots, p, i, u):
    """Textbook recursion in extended precision (right end closed)."""
    t = [mpmath.mpf(k) for k in knots]
    u = mpmath.mpf(u)
    n = len(t) - p - 1

    def N(i, q):
        if q == 0:
            if t[i] <= u < t[i + 1]:
                return mpmath.mpf(1)
            # close the last nonempty span at the right end of the domain
            if u == t[n] and t[i] < t[i + 1] == t[n]:
                return mpmath.mpf(1)
            return mpmath.mpf(0)
        out = mpmath.mpf(0)
        if t[i + q] != t[i]:
            out += (u - t[i]) / (t[i + q] - t[i]) * N(i, q - 1)
        if t[i + q + 1] != t[i + 1]:
            out += (t[i + q + 1] - u) / (t[i + q + 1] - t[i + 1]) * N(i + 1, q - 1)
        return out

    return N(i, p)


def full_values(kv, u, k=0):
    """Dense ``(k+1, n)`` array of all basis derivatives at ``u``."""
    spans, ders = basis_ders(kv, np.array([u]), k)
    out = np.zeros((k + 1, kv.n))
    p = kv.degree
    out[:, spans[0] - p: spans[0] + 1] = ders[0]
    return out


# ----------------------------------------------------------------- basis values

def test_bernstein_midpoint():
    b = eval_basis(KnotVector([0, 0, 0, 1, 1, 1], 2), 0.5)
    assert np.allclose(b.values[0], [0.25, 0.5, 0.25], atol=1e-15)


def test_matches_extended_precision_recursion():
    kv = KnotVector([0, 0, 0, 0.5, 1, 1, 1], 2)
    got = full_values(kv, 0.25)[0]
    ref = [float(cox_de_boor(kv.knots, 2, i, 0.25)) for i in range(kv.n)]
    assert np.abs(got - ref).max() < 1e-15


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_recursion_oracle_nonuniform(p):
    kv = open_knots(p, [0.1, 0.35, 0.35, 0.8])
    for u in np.linspace(0, 1, 23):
        got = full_values(kv, u)[0]
        ref = [float(cox_de_boor(kv.knots, p, i, u)) for i in range(kv.n)]
        assert np.abs(got - ref).max() < 1e-14


def test_derivatives_against_finite_differences():
    kv = open_knots(3, [0.2, 0.45, 0.7])
    h = 1e-6
    for u in [0.05, 0.3, 0.5, 0.66, 0.9]:
        d = full_values(kv, u, 3)
        for j in range(1, 4):
            fd = (full_values(kv, u + h, 3)[j - 1] - full_values(kv, u - h, 3)[j - 1]) / (2 * h)
            assert np.abs(fd - d[j]).max() < 1e-6 * max(1.0, np.abs(d[j]).max())


def test_orders_above_degree_vanish():
    d = full_values(uniform_knots(2, 3), 0.4, 3)
    assert np.all(d[3] == 0)


def test_domain_error():
    with pytest.raises(DomainError):
        eval_basis(uniform_knots(2, 2), 1.5)


def test_construction_errors():
    with pytest.raises(ConstructionError):
        KnotVector([0, 0, 0, 0, 0, 0], 2)          # zero-length
    with pytest.raises(ConstructionError):
        KnotVector([0, 0.5, 0.2, 1], 1)             # decreasing
    with pytest.raises(ConstructionError):
        SplineSpace([uniform_knots(2, 2)], weights=[1.0, 1.0])


@settings(max_examples=60, deadline=None)
@given(p=st.integers(0, 4), n_el=st.integers(1, 6), u=st.floats(0, 1))
def test_partition_of_unity_property(p, n_el, u):
    d = full_values(uniform_knots(p, n_el), u)[0]
    assert abs(d.sum() - 1) < 1e-12
    assert np.all(d >= -1e-15)


@settings(max_examples=40, deadline=None)
@given(interior=st.lists(st.floats(0.01, 0.99), max_size=5), p=st.integers(1, 3),
       u=st.floats(0, 1))
def test_derivatives_sum_to_zero(interior, p, u):
    interior = sorted(interior)
    if any(interior.count(x) > p for x in interior):
        return
    d = full_values(open_knots(p, interior), u, p)
    assert np.abs(d[1:].sum(axis=1)).max() < 1e-8 * max(1.0, np.abs(d).max())


# ------------------------------------------------------------------ tensor/rational

def test_tensor_product_structure():
    space = SplineSpace([uniform_knots(2, 1), uniform_knots(2, 1)])
    ev = eval_tensor_basis(space, [[0.5, 0.5]], 0)
    uni = np.array([0.25, 0.5, 0.25])
    dense = np.zeros(9)
    dense[ev.indices[0]] = ev.values[0, 0]
    assert np.allclose(dense, np.outer(uni, uni).ravel(), atol=1e-15)


def test_unit_weights_reduce_to_polynomial():
    kv = [open_knots(2, [0.3]), uniform_knots(3, 2)]
    poly = SplineSpace(kv)
    rat = SplineSpace(kv, np.ones(poly.dim))
    pts = np.random.default_rng(0).random((30, 2))
    a, b = eval_tensor_basis(poly, pts, 2), eval_tensor_basis(rat, pts, 2)
    assert np.abs(a.values - b.values).max() < 1e-13


def test_quarter_circle_on_circle():
    c = SplineCurve.from_points(2, [[1, 0], [1, 1], [0, 1]], weights=[1, np.sqrt(2) / 2, 1])
    r = np.linalg.norm(c(np.linspace(0, 1, 33)), axis=1)
    assert np.abs(r - 1).max() < 1e-14


def test_rational_derivatives_against_finite_differences():
    c = SplineCurve.from_points(2, [[1, 0], [1, 1], [0, 1]], weights=[1, np.sqrt(2) / 2, 1])
    t = np.array([0.2, 0.5, 0.8])
    D = c.derivatives(t, 3)
    h = 1e-5
    for j in range(1, 4):
        fd = (c.derivatives(t + h, 3)[:, j - 1] - c.derivatives(t - h, 3)[:, j - 1]) / (2 * h)
        assert np.abs(fd - D[:, j]).max() < 1e-6 * max(1.0, np.abs(D[:, j]).max())


# ---------------------------------------------------------------- refinement

def test_insert_single_knot():
    kv, T = insert_knots(KnotVector([0, 0, 0, 1, 1, 1], 2), [0.5])
    assert kv.knots.tolist() == [0, 0, 0, 0.5, 1, 1, 1]
    assert T.shape == (4, 3)


def test_insert_beyond_multiplicity():
    with pytest.raises(ConstructionError):
        insert_knots(uniform_knots(2, 2), [0.5, 0.5, 0.5])


def test_refit_exact_curve():
    rng = np.random.default_rng(3)
    coarse = SplineCurve.from_points(3, rng.random((6, 2)), interior=[0.3, 0.6])
    kv, T = insert_knots(coarse.knot_vector, [0.1, 0.3, 0.45, 0.9])
    fine = SplineCurve(SplineSpace([kv]), T @ coarse.control_points)
    t = rng.random(50)
    assert np.abs(fine(t) - coarse(t)).max() < 1e-13


def test_rational_refit_exact():
    w = [1, np.sqrt(2) / 2, 1]
    space = SplineSpace([KnotVector([0, 0, 0, 1, 1, 1], 2), uniform_knots(1, 1)],
                        np.repeat(w, 2))
    from klshell.geometry import SurfaceMap
    cp = np.array([[1, 0, z] for z in (0, 1)] + [[1, 1, z] for z in (0, 1)]
                  + [[0, 1, z] for z in (0, 1)], float)
    smap = SurfaceMap(space, cp)
    fine, T = h_refine(space, [[0.25, 0.5], [0.5]])
    fmap = SurfaceMap(fine, T @ cp)
    pts = np.random.default_rng(1).random((50, 2))
    assert np.abs(fmap(pts) - smap(pts)).max() < 1e-13


def test_dyadic_refinement_count():
    space = SplineSpace([uniform_knots(2, 4)] * 2)
    for _ in range(4):
        space, _T = h_refine(space, [kv.breakpoints[:-1] + np.diff(kv.breakpoints) / 2
                                     for kv in space.knot_vectors])
    assert [kv.num_elements for kv in space.knot_vectors] == [64, 64]


# ---------------------------------------------------------------- reduced space

def test_reduced_space_examples():
    r = build_reduced_space(open_knots(2, [1 / 3, 2 / 3]))
    assert r.degrees == (0,) and r.dim == 3
    r = build_reduced_space(KnotVector([0, 0, 0, 0, 0.5, 1, 1, 1, 1], 3))
    assert r.knot_vectors[0].knots.tolist() == [0, 0, 0.5, 1, 1]
    assert r.degrees == (1,) and r.dim == 3
    assert build_reduced_space(KnotVector([0, 0, 0, 1, 1, 1], 2)).dim == 1


def test_reduced_space_degree_error():
    with pytest.raises(UnsupportedDegreeError):
        build_reduced_space(uniform_knots(1, 3))
