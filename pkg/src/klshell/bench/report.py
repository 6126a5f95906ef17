"""CSV, summary table, gnuplot data and timing files for convergence reports."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Sequence

from .driver import NORMS, ConvergenceReport

META = ("case", "strategy", "beta", "degree", "level")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    x = float(x)
    return "" if math.isnan(x) else f"{x:.12e}"


def _norms(rep: ConvergenceReport) -> list[str]:
    return [n for n in NORMS if any(n in lv.errors for lv in rep.levels)]


def _qois(rep: ConvergenceReport) -> list[str]:
    names: list[str] = []
    for lv in rep.levels:
        names += [k for k in lv.qoi if k not in names]
    return names


def _level_columns(rep: ConvergenceReport) -> list[str]:
    norms = _norms(rep)
    return (["elements", "dofs"] + norms + [f"slope_{n}" for n in norms] + _qois(rep))


def _level_values(rep: ConvergenceReport) -> list[list[str]]:
    norms = _norms(rep)
    slopes = {n: [float("nan")] + rep.slopes(n) for n in norms}
    rows = []
    for k, lv in enumerate(rep.levels):
        row = [_fmt(lv.elements), _fmt(lv.dofs)]
        row += [_fmt(lv.errors[n]) for n in norms]
        row += [_fmt(slopes[n][k]) for n in norms]
        row += [_fmt(lv.qoi.get(q)) for q in _qois(rep)]
        rows.append(row)
    return rows


def convergence_csv(reports: Sequence[ConvergenceReport]) -> str:
    """One row per level.  Several reports of the same case and degree are
    laid out side by side with columns suffixed by ``@<strategy label>``."""
    if not reports:
        raise ValueError("at least one report is required")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if len(reports) == 1:
        rep = reports[0]
        w.writerow(list(META) + _level_columns(rep))
        for lv, vals in zip(rep.levels, _level_values(rep)):
            w.writerow([rep.case, rep.strategy, rep.beta, rep.degree, lv.level] + vals)
        return buf.getvalue()

    first = reports[0]
    if any(r.case != first.case or r.degree != first.degree for r in reports):
        raise ValueError("side-by-side reports must share case and degree")
    labels = [r.label for r in reports]
    if len(set(labels)) != len(labels):
        raise ValueError("side-by-side reports need distinct strategy labels")
    header = ["case", "degree", "level"]
    for r in reports:
        header += [f"{c}@{r.label}" for c in _level_columns(r)]
    w.writerow(header)
    values = [_level_values(r) for r in reports]
    levels = sorted({lv.level for r in reports for lv in r.levels})
    for level in levels:
        row = [first.case, first.degree, level]
        for r, vals in zip(reports, values):
            idx = [k for k, lv in enumerate(r.levels) if lv.level == level]
            row += vals[idx[0]] if idx else [""] * len(_level_columns(r))
        w.writerow(row)
    return buf.getvalue()


def qoi_csv(reports: Sequence[ConvergenceReport]) -> str:
    """Quantities of interest only; header-only when no report carries any."""
    names: list[str] = []
    for r in reports:
        names += [q for q in _qois(r) if q not in names]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(META) + ["dofs"] + names)
    if names:
        for r in reports:
            for lv in r.levels:
                w.writerow([r.case, r.strategy, r.beta, r.degree, lv.level, lv.dofs]
                           + [_fmt(lv.qoi.get(q)) for q in names])
    return buf.getvalue()


def summary_table(reports: Sequence[ConvergenceReport]) -> str:
    lines = []
    for r in reports:
        lines.append(f"{r.case}  strategy={r.label}  p={r.degree}")
        norms = _norms(r)
        head = f"{'level':>5} {'dofs':>8}" + "".join(f" {n:>11} {'rate':>6}" for n in norms)
        qois = _qois(r)
        head += "".join(f" {q:>16}" for q in qois)
        lines.append(head)
        slopes = {n: [float("nan")] + r.slopes(n) for n in norms}
        for k, lv in enumerate(r.levels):
            s = f"{lv.level:>5} {lv.dofs:>8}"
            for n in norms:
                rate = slopes[n][k]
                s += f" {lv.errors[n]:>11.4e} {'' if math.isnan(rate) else f'{rate:.2f}':>6}"
            s += "".join(f" {lv.qoi.get(q, float('nan')):>16.8g}" for q in qois)
            lines.append(s)
        lines.append("")
    return "\n".join(lines)


def gnuplot_data(rep: ConvergenceReport) -> str:
    """Whitespace-separated ``sqrt(dofs)`` followed by the error norms."""
    norms = _norms(rep)
    out = ["# sqrt_dofs " + " ".join(norms)]
    for lv in rep.levels:
        out.append(" ".join([f"{math.sqrt(lv.dofs):.10e}"]
                            + [f"{lv.errors[n]:.10e}" for n in norms]))
    return "\n".join(out) + "\n"


def timings_csv(reports: Sequence[ConvergenceReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    stages = ["build", "assemble", "coupling", "solve", "postprocess"]
    w.writerow(list(META) + stages)
    for r in reports:
        for lv in r.levels:
            w.writerow([r.case, r.strategy, r.beta, r.degree, lv.level]
                       + [f"{lv.timings.get(s, 0.0):.4f}" for s in stages])
    return buf.getvalue()


def write_reports(reports: Sequence[ConvergenceReport], out_dir) -> dict[str, Path]:
    """Write all report files into ``out_dir`` and return their paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    files = {
        "results.csv": convergence_csv(reports),
        "qoi.csv": qoi_csv(reports),
        "summary.txt": summary_table(reports),
        "timings.csv": timings_csv(reports),
    }
    for r in reports:
        if _norms(r):
            files[f"{r.case}_{r.label}_p{r.degree}.dat"] = gnuplot_data(r)
    paths = {}
    for name, text in files.items():
        p = out / name
        p.write_text(text)
        paths[name] = p
    return paths
