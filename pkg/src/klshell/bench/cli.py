"""``bench`` command line: run convergence studies, list cases, verify properties."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import KLShellError
from .cases import case_catalogue, get_case
from .driver import run_convergence
from .report import summary_table, write_reports

log = logging.getLogger("klshell.bench")

CONFIG_KEYS = {"case", "strategy", "beta", "degree", "levels", "first_level", "params",
               "vtk"}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bench", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress per level")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a convergence study and write CSV reports")
    run.add_argument("--case", default="four-patch")
    run.add_argument("--strategy", default="projected",
                     help="classic, scaled or projected; comma separated for side-by-side runs")
    run.add_argument("--beta", default="pp1", choices=("pm1", "p", "pp1"))
    run.add_argument("--degree", type=int, default=2, choices=(2, 3, 4))
    run.add_argument("--levels", type=int, default=3)
    run.add_argument("--first-level", type=int, default=1)
    run.add_argument("--out", default="bench_out", help="output directory")
    run.add_argument("--config", help="JSON file whose keys override the flags")
    run.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                     help="override a case parameter, e.g. t=0.01")
    run.add_argument("--vtk", action="store_true", help="also dump the finest-level field")

    sub.add_parser("list", help="list the benchmark catalogue")
    sub.add_parser("verify", help="run the quick property suite")
    return ap


def _parse_param(item: str):
    key, sep, value = item.partition("=")
    if not sep:
        raise SystemExit(f"--param expects KEY=VALUE, got {item!r}")
    try:
        return key, float(value)
    except ValueError:
        return key, value


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge command-line flags with an optional JSON config (config wins)."""
    cfg = {"case": args.case, "strategy": args.strategy, "beta": args.beta,
           "degree": args.degree, "levels": args.levels, "first_level": args.first_level,
           "params": dict(_parse_param(p) for p in args.param), "vtk": args.vtk}
    if args.config:
        with open(args.config) as fh:
            extra = json.load(fh)
        unknown = set(extra) - CONFIG_KEYS
        if unknown:
            raise SystemExit(f"unknown config keys: {', '.join(sorted(unknown))}")
        params = {**cfg["params"], **extra.pop("params", {})}
        cfg.update(extra)
        cfg["params"] = params
    if isinstance(cfg["strategy"], str):
        cfg["strategy"] = [s.strip() for s in cfg["strategy"].split(",") if s.strip()]
    return cfg


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    case = get_case(cfg["case"])
    out = Path(args.out)
    reports = []
    for strategy in cfg["strategy"]:
        reports.append(run_convergence(case, strategy, cfg["beta"], int(cfg["degree"]),
                                       int(cfg["levels"]), cfg["params"],
                                       first_level=int(cfg["first_level"])))
    paths = write_reports(reports, out)
    if cfg["vtk"]:
        _dump_vtk(case, cfg, out)
    print(summary_table(reports))
    for name in sorted(paths):
        print(f"wrote {paths[name]}")
    return 0


def _dump_vtk(case, cfg, out: Path) -> None:
    from ..coupling import PenaltyStrategy, couple
    from ..io import write_vtk
    from ..numerics import solve
    from ..shell import assemble_stiffness

    level = int(cfg["first_level"]) + int(cfg["levels"]) - 1
    setup = case.build(int(cfg["degree"]), level, **cfg["params"])
    system = setup.model.system()
    for patch in setup.model.patches:
        assemble_stiffness(system, patch, setup.exact)
    setup.apply_loads(system)
    setup.apply_boundary_conditions(system)
    couple(system, setup.model, PenaltyStrategy(cfg["strategy"][0], cfg["beta"]))
    u = solve(system).u
    write_vtk(out / f"{case.id}_level{level}.vtk", setup.model.patches, u)


def cmd_list(args) -> int:
    for c in case_catalogue():
        kind = "manufactured" if c.manufactured else "qoi: " + ", ".join(c.qoi_names)
        defaults = ", ".join(f"{k}={v:g}" for k, v in c.defaults.items())
        print(f"{c.id:<14} {c.description}  [{kind}]  ({defaults})")
    return 0


def cmd_verify(args) -> int:
    from .verify import CHECKS

    failed = 0
    for check in CHECKS:
        res = check()
        print(res.line())
        failed += not res.ok
    print(f"{len(CHECKS) - failed}/{len(CHECKS)} checks passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "list": cmd_list, "verify": cmd_verify}[args.command]
    try:
        return handler(args)
    except (KLShellError, KeyError, ValueError, OSError) as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
