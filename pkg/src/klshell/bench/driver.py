"""Convergence driver: build, assemble, couple, solve and measure per level."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..coupling import PenaltyStrategy, couple
from ..errors import KLShellError
from ..numerics import solve
from ..shell import assemble_stiffness, error_norms
from .cases import BenchmarkCase, get_case

log = logging.getLogger(__name__)

NORMS = ("L2", "H1", "H2", "energy")


@dataclass
class LevelResult:
    level: int
    elements: int
    dofs: int
    errors: dict = field(default_factory=dict)
    qoi: dict = field(default_factory=dict)
    residual: float = 0.0
    diag_ratio: float = 0.0
    timings: dict = field(default_factory=dict)


@dataclass
class ConvergenceReport:
    case: str
    strategy: str
    beta: str
    degree: int
    levels: list[LevelResult] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return PenaltyStrategy(self.strategy, self.beta).label

    def slopes(self, norm: str) -> list[float]:
        """Slopes of ``log(error)`` against ``log(sqrt(dofs))`` between levels."""
        out = []
        for a, b in zip(self.levels[:-1], self.levels[1:]):
            ea, eb = a.errors.get(norm), b.errors.get(norm)
            if ea is None or eb is None or ea <= 0 or eb <= 0:
                out.append(float("nan"))
                continue
            out.append(-np.log(eb / ea) / np.log(np.sqrt(b.dofs / a.dofs)))
        return out

    def column(self, name: str) -> list[float]:
        return [lv.errors.get(name, lv.qoi.get(name, float("nan"))) for lv in self.levels]


def count_elements(model) -> int:
    return int(sum(np.count_nonzero(p.domain.active_elements()) for p in model.patches))


def run_level(case: BenchmarkCase, strategy: PenaltyStrategy, degree: int, level: int,
              params: dict | None = None) -> LevelResult:
    params = params or {}
    timings = {}
    t0 = time.perf_counter()
    setup = case.build(degree, level, **params)
    model = setup.model
    timings["build"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    system = model.system()
    for patch in model.patches:
        assemble_stiffness(system, patch, setup.exact)
    setup.apply_loads(system)
    setup.apply_boundary_conditions(system)
    timings["assemble"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    couple(system, model, strategy)
    timings["coupling"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sol = solve(system)
    timings["solve"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    res = LevelResult(level, count_elements(model), model.ndof, residual=sol.residual,
                      diag_ratio=sol.diag_ratio)
    if setup.exact is not None:
        res.errors = error_norms(model.patches, sol.u, setup.exact).as_dict()
    if setup.qoi is not None:
        res.qoi = setup.qoi(model, sol.u)
    timings["postprocess"] = time.perf_counter() - t0
    res.timings = timings
    log.info("%s %s p=%d level %d: %d dofs, residual %.1e", case.id, strategy.label,
             degree, level, model.ndof, sol.residual)
    return res


def run_convergence(case: BenchmarkCase | str, strategy: str = "projected", beta: str = "pp1",
                    degree: int = 2, levels: int = 3, params: dict | None = None,
                    first_level: int = 1) -> ConvergenceReport:
    """Run ``levels`` consecutive refinement levels starting at ``first_level``."""
    if isinstance(case, str):
        case = get_case(case)
    if degree not in (2, 3, 4):
        raise ValueError("degree must be 2, 3 or 4")
    if levels < 3:
        raise ValueError("a convergence study needs at least 3 levels")
    strat = PenaltyStrategy(strategy, beta)
    rep = ConvergenceReport(case.id, strategy, beta, degree, params=dict(params or {}))
    for level in range(first_level, first_level + levels):
        try:
            rep.levels.append(run_level(case, strat, degree, level, params))
        except KLShellError as exc:
            log.error("%s failed at level %d: %s", case.id, level, exc)
            exc.args = (f"{case.id} level {level}: {exc}",) + exc.args[1:]
            exc.level = level
            raise
    dofs = [lv.dofs for lv in rep.levels]
    if any(b <= a for a, b in zip(dofs[:-1], dofs[1:])):
        raise RuntimeError("dof counts must increase across levels")
    return rep
