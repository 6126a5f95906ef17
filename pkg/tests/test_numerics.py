from math import factorial

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from klshell.errors import IndefiniteSystemError, SingularDofError, SolverError
from klshell.numerics import SparseSymmetricSystem, gauss_rule, segment_rule, solve, tensor_rule


def test_two_point_rule():
    g = gauss_rule(2)
    assert np.allclose(g.points, [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)
    assert np.allclose(g.weights, [1, 1], atol=1e-15)


def test_three_point_rule_quartic():
    g = gauss_rule(3)
    assert abs(np.sum(g.weights * g.points ** 4) - 0.4) < 1e-15


def test_five_point_cosine_matches_remainder():
    # E_n = c_n f^(2n)(xi), c_n = 2^(2n+1) (n!)^4 / ((2n+1) ((2n)!)^3), |f^(10)| in [cos 1, 1]
    g = gauss_rule(5)
    err = 2 * np.sin(1) - np.sum(g.weights * np.cos(g.points))
    c5 = 2 ** 11 * factorial(5) ** 4 / (11 * factorial(10) ** 3)
    assert c5 * np.cos(1) <= abs(err) <= c5
    g6 = gauss_rule(6)
    assert abs(np.sum(g6.weights * np.cos(g6.points)) - 2 * np.sin(1)) < 1e-10


@pytest.mark.parametrize("n", [0, 31, -2])
def test_rule_out_of_range(n):
    with pytest.raises(ValueError):
        gauss_rule(n)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 12), data=st.data())
def test_polynomial_exactness(n, data):
    k = data.draw(st.integers(0, 2 * n - 1))
    x, w = gauss_rule(n).mapped(0.5, 2.0)
    exact = (2.0 ** (k + 1) - 0.5 ** (k + 1)) / (k + 1)
    assert abs(np.sum(w * x ** k) - exact) < 1e-12 * max(1.0, exact)


def test_tensor_and_segment_rules():
    pts, w = tensor_rule(4)
    assert abs(np.sum(w * pts[:, 0] ** 3 * pts[:, 1] ** 5) - 1 / 24) < 1e-15
    t, w = segment_rule([0, 0.3, 1.0], 3)
    assert abs(np.sum(w * t ** 5) - 1 / 6) < 1e-15


def poisson(n):
    K = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1])
    return K.tocsr()


def system_from(K, f):
    s = SparseSymmetricSystem(K.shape[0])
    s.add_matrix(K)
    s.f[:] = f
    return s


def test_identity_system():
    s = system_from(sp.identity(4), np.eye(4)[0])
    assert np.allclose(solve(s).u, np.eye(4)[0])


def test_poisson_against_dense_lu():
    K = poisson(10)
    f = np.linspace(1, 2, 10)
    ref = np.linalg.solve(K.toarray(), f)
    assert np.abs(solve(system_from(K, f)).u - ref).max() < 1e-12


def test_scaling_does_not_change_solution():
    rng = np.random.default_rng(7)
    A = rng.random((8, 8))
    K = sp.csr_matrix(A @ A.T + 8 * np.eye(8))
    f = rng.random(8)
    a = solve(system_from(K, f), scale=True).u
    b = solve(system_from(K, f), scale=False).u
    assert np.abs(a - b).max() < 1e-10


def test_element_scatter_and_fixed_values():
    s = SparseSymmetricSystem(4)
    ke = np.array([[1.0, -1.0], [-1.0, 1.0]])
    s.add_element_matrices(np.array([[0, 1], [1, 2], [2, 3]]), np.stack([ke] * 3))
    s.fix([0], 0.0)
    s.fix([3], 3.0)
    r = solve(s)
    assert np.allclose(r.u, [0, 1, 2, 3], atol=1e-14)
    assert r.n_free == 2


def test_ties_match_dense_condensation():
    rng = np.random.default_rng(2)
    A = rng.random((6, 6))
    K = A @ A.T + 6 * np.eye(6)
    f = rng.random(6)
    s = system_from(sp.csr_matrix(K), f)
    s.tie(1, [4])
    s.fix([0], 0.5)
    u = solve(s).u
    # dense oracle: unknowns (1=4, 2, 3, 5), u0 prescribed
    T = np.zeros((6, 4))
    T[1, 0] = T[4, 0] = 1
    T[2, 1] = T[3, 2] = T[5, 3] = 1
    g = np.zeros(6)
    g[0] = 0.5
    x = np.linalg.solve(T.T @ K @ T, T.T @ (f - K @ g))
    assert np.abs(u - (T @ x + g)).max() < 1e-12
    assert u[1] == u[4]


def test_conflicting_ties():
    s = system_from(sp.identity(3, format="csr"), np.zeros(3))
    s.tie(0, [1])
    s.fix([0], 1.0)
    s.fix([1], 2.0)
    with pytest.raises(SolverError):
        solve(s)


def test_singular_dof_named():
    K = sp.diags([1.0, 0.0, 1.0]).tocsr()
    with pytest.raises(SingularDofError) as info:
        solve(system_from(K, np.ones(3)))
    assert info.value.dof == 1
    assert "dof 1" in str(info.value)


def test_indefinite_system():
    K = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(IndefiniteSystemError):
        solve(system_from(K, np.ones(2)))


def test_flush_merges_duplicates():
    s = SparseSymmetricSystem(3)
    s.flush_size = 2
    for _ in range(5):
        s.add_triplets([0, 1], [0, 1], [1.0, 2.0])
    assert np.allclose(s.matrix.diagonal(), [5, 10, 0])


def test_merge_is_commutative():
    rng = np.random.default_rng(0)
    parts = []
    for _ in range(3):
        s = SparseSymmetricSystem(5)
        r, c = rng.integers(0, 5, 20), rng.integers(0, 5, 20)
        s.add_triplets(r, c, rng.random(20))
        parts.append(s)
    a, b = SparseSymmetricSystem(5), SparseSymmetricSystem(5)
    for s in parts:
        a.merge(s)
    for s in reversed(parts):
        b.merge(s)
    assert np.abs((a.matrix - b.matrix).toarray()).max() < 1e-15


def test_dump_coo(tmp_path):
    s = system_from(poisson(3), np.zeros(3))
    s.dump_coo(tmp_path / "k.txt")
    lines = (tmp_path / "k.txt").read_text().splitlines()
    assert lines[0] == "% 3 3 7"
    assert len(lines) == 8


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 12), seed=st.integers(0, 2 ** 16))
def test_random_spd_solve(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    K = A @ A.T + n * np.eye(n)
    f = rng.standard_normal(n)
    r = solve(system_from(sp.csr_matrix(K), f))
    assert np.abs(r.u - np.linalg.solve(K, f)).max() < 1e-10 * max(1, np.abs(r.u).max())
    assert r.info["backward_error"] < 1e-14


# ---------------------------------------------------------- factored penalties

def laplacian_1d(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsr()


def penalized(alpha, n=12, seed=0):
    """1D Laplacian, one fixed end, and a strong penalty tying dofs 3 and 8."""
    rng = np.random.default_rng(seed)
    s = SparseSymmetricSystem(n)
    s.add_matrix(laplacian_1d(n))
    s.f[:] = rng.standard_normal(n)
    s.fix([0], 0.5)
    B = np.array([[1.0, -1.0], [0.3, 0.2]])
    C = np.array([[2.0, 0.5], [0.5, 1.0]]) / alpha
    s.add_penalty_block([3, 8], B, C)
    return s, B, C


def test_penalty_block_in_matrix():
    s, B, C = penalized(10.0)
    K = s.matrix.toarray()
    dK = B.T @ np.linalg.solve(C, B)
    ref = laplacian_1d(12).toarray()
    ref[np.ix_([3, 8], [3, 8])] += dK
    assert np.abs(K - ref).max() < 1e-13
    assert np.abs(s.base_matrix.toarray() - laplacian_1d(12).toarray()).max() == 0


def test_augmented_solve_matches_condensed():
    s, _, _ = penalized(10.0)
    a, c = solve(s), solve(s, augmented=False)
    assert a.info["multipliers"] == 2 and "multipliers" not in c.info
    assert np.abs(a.u - c.u).max() < 1e-12 * np.abs(c.u).max()
    assert a.u[0] == 0.5


def test_augmented_solve_survives_huge_penalty():
    # the limit alpha -> inf enforces B u = 0 exactly
    n = 12
    s, B, _ = penalized(1e14, n)
    u = solve(s).u
    assert np.abs(B @ u[[3, 8]]).max() < 1e-12
    K = laplacian_1d(n).toarray()
    free = np.arange(1, n)
    # reference: constrained minimization by a dense KKT solve in extended precision
    A = np.zeros((n + 1 + 2, n + 1 + 2))
    A[:n, :n] = K
    A[n, 0] = A[0, n] = 1.0
    Bf = np.zeros((2, n))
    Bf[:, [3, 8]] = B
    A[n + 1:, :n] = Bf
    A[:n, n + 1:] = Bf.T
    rhs = np.r_[s.f, 0.5, 0.0, 0.0]
    ref = np.linalg.solve(A, rhs)[:n]
    assert np.abs(u[free] - ref[free]).max() < 1e-10 * np.abs(ref).max()


def test_penalty_block_shape_check():
    s = SparseSymmetricSystem(4)
    with pytest.raises(ValueError):
        s.add_penalty_block([0, 1], np.ones((2, 3)), np.eye(2))


def test_merge_keeps_penalty_blocks():
    s, _, _ = penalized(10.0)
    t = SparseSymmetricSystem(12)
    t.merge(s)
    assert len(t.blocks) == 1
    assert np.abs((t.matrix - s.matrix).toarray()).max() == 0
