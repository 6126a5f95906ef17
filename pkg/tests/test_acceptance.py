"""Acceptance criteria 1 to 10 at their stated tolerances.

Each test prints one ``PASS``/``FAIL`` line straight to the terminal before
asserting, so the verdicts appear in the log even without ``-s``.
"""

import time

import numpy as np
import pytest

from klshell.bench import verify
from klshell.bench.cases import bilinear, edge_curve
from klshell.bench.cli import main
from klshell.bench.driver import run_convergence
from klshell.coupling import (Interface, InterfaceSide, MultiPatchModel, build_interface,
                              projection_matrices)
from klshell.geometry import SurfaceMap
from klshell.shell import Isotropic, Patch
from klshell.spline import SplineCurve, SplineSpace, uniform_knots
from klshell.trimming import classify_elements


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail, elapsed=None):
        t = "" if elapsed is None else f"  [{elapsed:.1f} s]"
        with capsys.disabled():
            print(f"\nACCEPTANCE {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}{t}")
        return ok
    return emit


# ------------------------------------------------------------------ helpers

def fd_derivative_error(seed=3):
    """Largest relative gap between analytic and central-difference map derivatives."""
    rng = np.random.default_rng(seed)
    space = SplineSpace([uniform_knots(3, 5), uniform_knots(4, 3)])
    smap = SurfaceMap(space, rng.standard_normal((space.dim, 3)))
    pts = rng.uniform(0.05, 0.95, (40, 2))
    D = smap.derivatives(pts, 2)
    h = 1e-5
    worst = 0.0
    for a, (first, second) in enumerate(((1, (3, 4)), (2, (4, 5)))):
        e = np.zeros(2)
        e[a] = h
        Dp, Dm = smap.derivatives(pts + e, 1), smap.derivatives(pts - e, 1)
        fd1 = (Dp[:, 0] - Dm[:, 0]) / (2 * h)
        worst = max(worst, np.abs(fd1 - D[:, first]).max() / np.abs(D[:, first]).max())
        fd2 = (Dp[:, 1:3] - Dm[:, 1:3]) / (2 * h)
        ref = D[:, list(second)]
        worst = max(worst, np.abs(fd2 - ref).max() / np.abs(ref).max())
    return worst


def clip_area(a, b):
    """Area of the unit square left of the directed line a -> b."""
    poly = [np.array(p, float) for p in ((0, 0), (1, 0), (1, 1), (0, 1))]
    d = np.subtract(b, a)
    side = [d[0] * (p[1] - a[1]) - d[1] * (p[0] - a[0]) for p in poly]
    out = []
    for i in range(4):
        p, q, s0, s1 = poly[i], poly[(i + 1) % 4], side[i], side[(i + 1) % 4]
        if s0 >= 0:
            out.append(p)
        if s0 * s1 < 0:
            out.append(p + (q - p) * s0 / (s0 - s1))
    P = np.array(out)
    x, y = P[:, 0], P[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def sampled_active(space, dom, samples=500):
    g = (np.arange(samples) + 0.5) / samples
    G = np.array([(a, b) for a in g for b in g])
    kept = G[dom.contains(G)]
    kv = space.knot_vectors[0]
    active = set()
    for i in range(kv.n):
        a0, a1 = kv.support(i)
        mx = (kept[:, 0] > a0) & (kept[:, 0] < a1)
        for j in range(kv.n):
            b0, b1 = kv.support(j)
            if np.any(mx & (kept[:, 1] > b0) & (kept[:, 1] < b1)):
                active.add(i * kv.n + j)
    return active


def two_squares(nl, nr, p):
    mat = Isotropic(1e6, 0.3, 0.005)
    sq = [bilinear([(x0, 0, 0), (x0, 1, 0), (x1, 0, 0), (x1, 1, 0)]) for x0, x1 in ((0, 1), (1, 2))]
    patches = [Patch(sq[0], SplineSpace([uniform_knots(p, nl)] * 2), mat),
               Patch(sq[1], SplineSpace([uniform_knots(p, nr)] * 2), mat)]
    iface = Interface((InterfaceSide(0, edge_curve(1)), InterfaceSide(1, edge_curve(3))))
    return MultiPatchModel(patches, [iface])


# ----------------------------------------------------------------- criteria

def test_criterion_01_spline_properties(verdict):
    t0 = time.perf_counter()
    checks = [verify.partition_of_unity(), verify.knot_insertion(), verify.quarter_circle()]
    fd = fd_derivative_error()
    ok = all(c.ok for c in checks) and fd < 1e-6
    elapsed = time.perf_counter() - t0
    detail = ", ".join(f"{c.name} {c.value:.1e}" for c in checks) + f", derivative vs FD {fd:.1e}"
    verdict(1, ok and elapsed < 10, detail, elapsed)
    assert ok and elapsed < 10


def test_criterion_02_trimming_oracles(verdict):
    t0 = time.perf_counter()
    parabola = verify.parabola_area()
    chords = [((0.0, 0.13), (1.0, 0.71)), ((0.5, 0.0), (1.0, 0.5)), ((0.2, 1.0), (0.7, 0.0)),
              ((0.0, 0.9), (0.35, 0.0))]
    chord_err = 0.0
    for a, b in chords:
        for n, p in ((3, 1), (5, 2), (8, 3)):
            dom = classify_elements(SplineSpace([uniform_knots(p, n)] * 2), [SplineCurve.line(a, b)])
            chord_err = max(chord_err, abs(dom.area() - clip_area(a, b)))
    curve = SplineCurve.from_points(2, [(0.0, 0.15), (0.55, 1.15), (1.0, 0.35)])
    mismatches = 0
    for n in (2, 5, 8):
        for p in (1, 2, 3):
            space = SplineSpace([uniform_knots(p, n)] * 2)
            dom = classify_elements(space, [curve])
            mismatches += set(dom.active_functions(space).tolist()) != sampled_active(space, dom)
    elapsed = time.perf_counter() - t0
    ok = parabola.ok and chord_err < 1e-13 and mismatches == 0 and elapsed < 30
    verdict(2, ok, f"parabola area error {parabola.value:.1e}, chord area error {chord_err:.1e}, "
                   f"active-set mismatches {mismatches}", elapsed)
    assert ok


def test_criterion_03_projection(verdict):
    t0 = time.perf_counter()
    model = two_squares(3, 5, 3)
    space = build_interface(model, 0)
    op = projection_matrices(model, space)
    u = np.random.default_rng(0).standard_normal(op.dofs.size)
    orth = max(np.abs(op.M @ op.solve(F @ u) - F @ u).max()
               for F in list(op.F_disp) + list(op.F_rot))
    idem = 0.0
    for p in (2, 3, 4):
        sp_ = build_interface(two_squares(3, 4, p), 0)
        R = sp_.reduced_values()
        c = np.random.default_rng(p).random((R.shape[1], 3))
        idem = max(idem, np.abs(sp_.project(R @ c) - c).max())
    s0 = build_interface(two_squares(1, 1, 2), 0)
    avg = abs(s0.project(s0.s)[0, 0] - 0.5)
    elapsed = time.perf_counter() - t0
    ok = orth < 1e-11 and idem < 1e-12 and avg == 0.0 and elapsed < 5
    verdict(3, ok, f"orthogonality {orth:.1e}, idempotence {idem:.1e}, "
                   f"degree-0 average error {avg:.1e}", elapsed)
    assert ok


def test_criterion_04_four_patch_convergence(verdict):
    t0 = time.perf_counter()
    bounds = {2: (2.7, 0.8), 3: (3.7, 1.8)}
    lines, ok = [], True
    for p, (l2_min, h2_min) in bounds.items():
        rep = run_convergence("four-patch", "projected", "pp1", p, 5)
        l2, h2 = rep.slopes("L2")[-2:], rep.slopes("H2")[-2:]
        good = min(l2) >= l2_min and min(h2) >= h2_min
        lines.append(f"p={p} beta=p+1 L2 slopes {l2[0]:.2f},{l2[1]:.2f} (>= {l2_min}) "
                     f"H2 slopes {h2[0]:.2f},{h2[1]:.2f} (>= {h2_min})")
        rep = run_convergence("four-patch", "projected", "pm1", p, 5)
        h2m = rep.slopes("H2")[-2:]
        good &= min(h2m) >= h2_min
        lines.append(f"p={p} beta=p-1 H2 slopes {h2m[0]:.2f},{h2m[1]:.2f}")
        ok &= good
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    verdict(4, ok, "; ".join(lines), elapsed)
    assert ok


def test_criterion_05_locking_ordering(verdict):
    t0 = time.perf_counter()
    lines, ok = [], True
    for case, t in (("three-patch", 0.01), ("astroid", 0.005)):
        for p in (2, 3):
            proj = run_convergence(case, "projected", "pp1", p, 3, {"t": t})
            cls = run_convergence(case, "classic", "pp1", p, 3, {"t": t})
            for k in (0, 1):
                for norm in ("L2", "H2"):
                    a, b = proj.levels[k].errors[norm], cls.levels[k].errors[norm]
                    ok &= a < b
                    lines.append(f"{case} p={p} level {k + 1} {norm} {a:.2e} < {b:.2e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    verdict(5, ok, "; ".join(lines[::4]) + f" ({len(lines)} comparisons)", elapsed)
    assert ok, "\n".join(lines)


def test_criterion_06_scordelis_lo(verdict):
    t0 = time.perf_counter()
    rep = run_convergence("scordelis-lo", "projected", "pp1", 3, 5)
    w = np.array(rep.column("u_z_normalized"))
    dist = np.abs(w[-3:] - 1.0)
    # the distance to the reference shrinks strictly over the last three levels
    monotone = bool(np.all(np.diff(dist) < 0))
    elapsed = time.perf_counter() - t0
    ok = dist[-1] < 0.01 and monotone and elapsed < 300
    verdict(6, ok, "normalized u_z per level " + ", ".join(f"{x:.6f}" for x in w)
            + ", last distances to 1 " + ", ".join(f"{x:.1e}" for x in dist), elapsed)
    assert ok


def test_criterion_07_l_beam(verdict):
    t0 = time.perf_counter()
    rep = run_convergence("l-beam", "projected", "pp1", 2, 4)
    angle_err = np.abs(np.array(rep.column("angle_deg")) - 90.0)
    tip = np.array(rep.column("tip_u_z"))
    diffs = np.abs(np.diff(tip))
    elapsed = time.perf_counter() - t0
    ratio = angle_err[0] / angle_err[-1]
    ok = ratio >= 4 and bool(np.all(np.diff(diffs) < 0)) and elapsed < 300
    verdict(7, ok, f"angle error {angle_err[0]:.2e} -> {angle_err[-1]:.2e} (x{ratio:.1f}), "
                   "tip differences " + ", ".join(f"{d:.2e}" for d in diffs), elapsed)
    assert ok


def test_criterion_08_trimmed_cylinder(verdict):
    t0 = time.perf_counter()
    lines, ok = [], True
    for p in (2, 3):
        rep = run_convergence("cylinder", "projected", "pp1", p, 3)
        s = rep.slopes("energy")[-1]
        ok &= s >= p - 1 - 0.2
        lines.append(f"p={p} energy slope {s:.2f} (>= {p - 1.2:.1f})")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    verdict(8, ok, "; ".join(lines), elapsed)
    assert ok


def test_criterion_09_mechanics_invariants(verdict):
    t0 = time.perf_counter()
    checks = [verify.rigid_body_energy(), verify.stiffness_symmetry(),
              verify.laminate_isotropic(), verify.symmetric_stack()]
    elapsed = time.perf_counter() - t0
    ok = all(c.ok for c in checks) and elapsed < 30
    verdict(9, ok, ", ".join(f"{c.name} {c.value:.1e}" for c in checks), elapsed)
    assert ok


def test_criterion_10_determinism(verdict, tmp_path, capsys):
    args = ["run", "--case", "astroid", "--strategy", "projected,classic", "--degree", "2",
            "--levels", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    names = ("results.csv", "qoi.csv")
    same = [(tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names]
    ok = all(same)
    verdict(10, ok, "byte-identical " + ", ".join(n for n, s in zip(names, same) if s))
    assert ok
