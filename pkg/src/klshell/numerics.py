"""Quadrature rules, sparse symmetric assembly and the scaled direct solve."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg  # noqa: F401
from scipy.sparse.linalg import splu

from .errors import IndefiniteSystemError, SingularDofError, SolverError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaussRule:
    """Gauss-Legendre points and weights on [-1, 1]."""

    points: np.ndarray
    weights: np.ndarray

    def mapped(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        """Points and weights on ``[a, b]``."""
        h = 0.5 * (b - a)
        return a + h * (self.points + 1.0), h * self.weights

    def unit(self) -> tuple[np.ndarray, np.ndarray]:
        return self.mapped(0.0, 1.0)


_RULES: dict[int, GaussRule] = {}


def gauss_rule(n: int) -> GaussRule:
    """``n``-point Gauss-Legendre rule, exact up to degree ``2n-1``."""
    if not 1 <= n <= 30:
        raise ValueError(f"number of Gauss points must be in [1, 30], got {n}")
    if n not in _RULES:
        x, w = np.polynomial.legendre.leggauss(n)
        x.setflags(write=False)
        w.setflags(write=False)
        _RULES[n] = GaussRule(x, w)
    return _RULES[n]


def tensor_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """``n x n`` rule on the unit square: points ``(n*n, 2)``, weights ``(n*n,)``."""
    x, w = gauss_rule(n).unit()
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    return np.column_stack([X.ravel(), Y.ravel()]), W.ravel()


def segment_rule(breakpoints, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite ``n``-point rule over consecutive breakpoints."""
    bp = np.asarray(breakpoints, dtype=float)
    x, w = gauss_rule(n).points, gauss_rule(n).weights
    h = 0.5 * np.diff(bp)
    pts = (bp[:-1, None] + h[:, None] * (x[None, :] + 1.0)).ravel()
    wts = (h[:, None] * w[None, :]).ravel()
    return pts, wts


@dataclass
class PenaltyBlock:
    """Penalty term ``B^T C^{-1} B`` on ``dofs`` kept in factored form.

    ``C`` is symmetric positive definite.  Keeping the factors lets the solver
    work with the augmented matrix ``[[K, B^T], [B, -C]]``, whose conditioning
    does not degrade as the penalty grows.
    """

    dofs: np.ndarray               # (k,) global dofs
    B: np.ndarray                  # (m, k)
    C: np.ndarray                  # (m, m)

    def dense(self) -> np.ndarray:
        return self.B.T @ la.solve(self.C, self.B, assume_a="pos")


class SparseSymmetricSystem:
    """Global stiffness matrix, load vector and constraint bookkeeping.

    Element contributions are buffered as triplets and folded into a CSR
    matrix once the buffer grows, so element loops can stream data in chunks.
    Penalty terms may also be stored as :class:`PenaltyBlock` factors;
    :attr:`matrix` always includes them.
    """

    flush_size = 4_000_000

    def __init__(self, ndof: int):
        self.ndof = int(ndof)
        self.f = np.zeros(self.ndof)
        self.fixed: dict[int, float] = {}
        self.ties: list[tuple[int, tuple[int, ...]]] = []
        self._K = sp.csr_matrix((self.ndof, self.ndof))
        self._buf: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        self._nbuf = 0
        self.blocks: list[PenaltyBlock] = []

    def add_triplets(self, rows, cols, vals) -> None:
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        self._buf.append((rows, cols, vals))
        self._nbuf += vals.size
        if self._nbuf >= self.flush_size:
            self._flush()

    def add_element_matrices(self, dofs: np.ndarray, ke: np.ndarray) -> None:
        """Scatter ``ke[e]`` into rows/columns ``dofs[e]``."""
        dofs = np.asarray(dofs)
        nd = dofs.shape[1]
        rows = np.broadcast_to(dofs[:, :, None], (dofs.shape[0], nd, nd))
        cols = np.broadcast_to(dofs[:, None, :], (dofs.shape[0], nd, nd))
        self.add_triplets(rows, cols, ke)

    def add_matrix(self, mat) -> None:
        self._flush()
        self._K = (self._K + sp.csr_matrix(mat)).tocsr()

    def add_penalty_block(self, dofs, B, C) -> None:
        """Add ``B^T C^{-1} B`` on ``dofs`` without forming the product."""
        dofs = np.asarray(dofs, dtype=np.int64).ravel()
        B = np.atleast_2d(np.asarray(B, dtype=float))
        C = np.atleast_2d(np.asarray(C, dtype=float))
        if B.shape[1] != dofs.size or C.shape != (B.shape[0],) * 2:
            raise ValueError("penalty block shapes do not match")
        self.blocks.append(PenaltyBlock(dofs, B, C))

    def add_load(self, dofs, values) -> None:
        np.add.at(self.f, np.asarray(dofs).ravel(), np.asarray(values, float).ravel())

    def fix(self, dofs, values=0.0) -> None:
        dofs = np.atleast_1d(np.asarray(dofs, dtype=np.int64))
        values = np.broadcast_to(np.asarray(values, dtype=float), dofs.shape)
        for d, v in zip(dofs.tolist(), values.tolist()):
            self.fixed[d] = v

    def tie(self, master: int, slaves) -> None:
        """Constrain every dof in ``slaves`` to equal ``master``."""
        self.ties.append((int(master), tuple(int(s) for s in slaves)))

    def merge(self, other: "SparseSymmetricSystem") -> None:
        """Fold another buffer (e.g. from a parallel worker) into this one."""
        if other.ndof != self.ndof:
            raise ValueError("systems have different sizes")
        self.add_matrix(other.base_matrix)
        self.blocks.extend(other.blocks)
        self.f += other.f
        self.fixed.update(other.fixed)
        self.ties.extend(other.ties)

    def _flush(self) -> None:
        if not self._buf:
            return
        r = np.concatenate([b[0] for b in self._buf])
        c = np.concatenate([b[1] for b in self._buf])
        v = np.concatenate([b[2] for b in self._buf])
        self._buf.clear()
        self._nbuf = 0
        self._K = self._K + sp.csr_matrix((v, (r, c)), shape=(self.ndof, self.ndof))

    @property
    def base_matrix(self) -> sp.csr_matrix:
        """Assembled matrix without the factored penalty blocks."""
        self._flush()
        return self._K

    @property
    def matrix(self) -> sp.csr_matrix:
        K = self.base_matrix
        if not self.blocks:
            return K
        r, c, v = [], [], []
        for b in self.blocks:
            r.append(np.repeat(b.dofs, b.dofs.size))
            c.append(np.tile(b.dofs, b.dofs.size))
            v.append(b.dense().ravel())
        P = sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
                          shape=K.shape)
        return (K + P).tocsr()

    def block_rows(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """Stacked ``B`` (rows over global dofs) and block-diagonal ``C``."""
        rows, cols, vals = [], [], []
        m = 0
        for b in self.blocks:
            i, j = np.nonzero(np.ones_like(b.B, dtype=bool))
            rows.append(m + i)
            cols.append(b.dofs[j])
            vals.append(b.B[i, j])
            m += b.B.shape[0]
        B = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(m, self.ndof))
        C = sp.block_diag([b.C for b in self.blocks], format="csr")
        return B, C

    def dump_coo(self, path) -> None:
        """Write the matrix as ``i j value`` lines."""
        K = self.matrix.tocoo()
        with open(Path(path), "w") as fh:
            fh.write(f"% {self.ndof} {self.ndof} {K.nnz}\n")
            for i, j, v in zip(K.row, K.col, K.data):
                fh.write(f"{i} {j} {v:.17g}\n")


@dataclass
class SolveResult:
    u: np.ndarray
    residual: float
    diag_ratio: float
    n_free: int
    info: dict = field(default_factory=dict)


def _reduction(system: SparseSymmetricSystem):
    """Map full dofs to free unknowns: ``u = T x + g``."""
    n = system.ndof
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for master, slaves in system.ties:
        rm = find(master)
        for s in slaves:
            rs = find(s)
            if rs != rm:
                parent[rs] = rm
    roots = np.array([find(i) for i in range(n)])

    g = np.zeros(n)
    fixed_root = {}
    for d, v in system.fixed.items():
        r = roots[d]
        if r in fixed_root and abs(fixed_root[r] - v) > 1e-12 * max(1.0, abs(v)):
            raise SolverError(f"conflicting prescribed values in tie group of dof {d}")
        fixed_root[r] = v
    is_fixed = np.zeros(n, dtype=bool)
    for r, v in fixed_root.items():
        members = roots == r
        is_fixed |= members
        g[members] = v

    free_roots = np.unique(roots[~is_fixed])
    col_of_root = -np.ones(n, dtype=np.int64)
    col_of_root[free_roots] = np.arange(free_roots.size)
    rows = np.flatnonzero(~is_fixed)
    cols = col_of_root[roots[rows]]
    T = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, free_roots.size))
    return T, g, free_roots


def _factorize(A: sp.csc_matrix, negative: int):
    """Symmetric-mode LU without pivoting; ``negative`` is the expected number of
    negative pivots (the inertia of a symmetric quasi-definite matrix)."""
    try:
        lu = splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                  options=dict(SymmetricMode=True))
    except RuntimeError as exc:
        raise IndefiniteSystemError(f"factorization failed: {exc}") from exc
    piv = lu.U.diagonal()
    # quasi-definite pivots stay away from zero; plain SPD ones get a round-off allowance
    tol = 0.0 if negative else 1e-10 * np.abs(piv).max()
    found = int(np.sum(piv < -tol))
    if found != negative:
        raise IndefiniteSystemError(
            f"{found} negative pivots in symmetric factorization, expected {negative}")
    return lu


def _refined(A, b, lu, s, refine: int):
    """Scaled solve followed by a few steps of iterative refinement."""
    nb = np.linalg.norm(b)
    nb = nb if nb > 0 else 1.0
    x = s * lu.solve(s * b)
    res = A @ x - b
    residual = float(np.linalg.norm(res) / nb)
    for _ in range(refine):
        if residual < 1e-13:
            break
        x_new = x - s * lu.solve(s * res)
        res_new = A @ x_new - b
        r_new = float(np.linalg.norm(res_new) / nb)
        if r_new >= residual:
            break
        x, res, residual = x_new, res_new, r_new
    return x, residual


def solve(system: SparseSymmetricSystem, scale: bool = True, refine: int = 3,
          augmented: bool = True) -> SolveResult:
    """Condense constraints, scale by the diagonal, factorize and solve.

    When the system carries factored penalty blocks and ``augmented`` is set,
    the unknowns are solved together with ``lam = C^{-1} B u`` from the
    quasi-definite matrix ``[[K, B^T], [B, -C]]``.  This gives the same
    solution as the condensed matrix ``K + B^T C^{-1} B`` but stays accurate
    when large penalties would swamp ``K`` in double precision.
    """
    K = system.matrix
    T, g, free_roots = _reduction(system)
    Kr = (T.T @ K @ T).tocsc()
    fr = T.T @ (system.f - K @ g)
    d = Kr.diagonal()
    if np.any(d <= 0.0):
        bad = int(np.flatnonzero(d <= 0.0)[0])
        raise SingularDofError(int(free_roots[bad]))
    diag_ratio = float(d.max() / d.min())
    info = {}
    if augmented and system.blocks:
        Kb = system.base_matrix
        B, C = system.block_rows()
        Br = (B @ T).tocsr()
        A = sp.bmat([[T.T @ Kb @ T, Br.T], [Br, -C]]).tocsc()
        b = np.r_[T.T @ (system.f - Kb @ g), -(B @ g)]
        db = A.diagonal()[:Kr.shape[0]]
        s = np.r_[1.0 / np.sqrt(np.where(db > 0, db, d)), 1.0 / np.sqrt(C.diagonal())]
        if not scale:
            s = np.ones_like(s)
        lu = _factorize((sp.diags(s) @ A @ sp.diags(s)).tocsc(), negative=B.shape[0])
        z, residual = _refined(A, b, lu, s, refine)
        x = z[:Kr.shape[0]]
        info["multipliers"] = int(B.shape[0])
    else:
        s = 1.0 / np.sqrt(d) if scale else np.ones_like(d)
        lu = _factorize((sp.diags(s) @ Kr @ sp.diags(s)).tocsc(), negative=0)
        x, residual = _refined(Kr, fr, lu, s, refine)
    u = T @ x + g
    res = Kr @ x - fr
    nf = np.linalg.norm(fr)
    info["condensed_residual"] = float(np.linalg.norm(res) / (nf if nf > 0 else 1.0))
    # normwise backward error, meaningful even when K is badly conditioned
    knorm = float(sp.linalg.norm(Kr, 1))
    info["backward_error"] = float(np.linalg.norm(res)
                                   / (knorm * np.linalg.norm(x) + nf + 1e-300))
    log.debug("solved %d unknowns, relative residual %.2e, diag ratio %.2e",
              x.size, residual, diag_ratio)
    return SolveResult(u, residual, diag_ratio, int(x.size), info=info)
