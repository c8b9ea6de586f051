"""Command-line entry point: ``lawsonrd {run,preset,audit,list}``."""

from __future__ import annotations

import argparse
import json
import sys
import warnings

from .discretization import SPACE_KINDS
from .harness import PRESETS, StudyConfig, assumption_audit, cached_space, emit_csv, get_preset, run_study
from .integrators import GLOBAL_CONVENTIONS, LOCAL_CONVENTIONS, SchemeKind
from .problems import PROBLEMS, get_problem
from .tableaus import TABLEAUS

EXIT_OK, EXIT_USAGE, EXIT_BLOWUP = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lawsonrd",
                     description="Lawson exponential integrators for 1-D reaction-diffusion "
                                 "problems, with boundary-corrected variants.")
    sub = parser.add_subparsers(dest="command", metavar="{run,preset,audit,list}",
                                parser_class=_Parser)
    sub.required = True

    run = sub.add_parser("run", help="run a custom convergence study")
    run.add_argument("--problem", required=True, choices=sorted(PROBLEMS),
                     help="registered manufactured problem")
    run.add_argument("--scheme", required=True, choices=[s.value for s in SchemeKind],
                     help="classical Lawson step or boundary-corrected variant")
    run.add_argument("--tableau", required=True, choices=sorted(TABLEAUS),
                     help="underlying explicit Runge-Kutta tableau")
    run.add_argument("--space", required=True, choices=SPACE_KINDS, help="space discretization")
    grid = run.add_mutually_exclusive_group(required=True)
    grid.add_argument("--h", type=_float_list,
                      help="grid spacing(s) for finite differences, comma separated, descending")
    grid.add_argument("--nodes", type=int, help="collocation node count")
    run.add_argument("--k", required=True, type=_float_list,
                     help="time step(s), comma separated, descending")
    run.add_argument("--T", type=float, default=1.0, help="final time (default 1)")
    run.add_argument("--boundary-mode", choices=("oracle", "data"), default="oracle",
                     help="exact boundary traces or traces from data plus numerical "
                          "differentiation (default oracle)")
    run.add_argument("--errors", default="local,global",
                     help="error kinds to compute: local, global or both (default both)")
    run.add_argument("--local-convention", choices=LOCAL_CONVENTIONS, default="first",
                     help="local error from the first step only, or the max over all steps")
    run.add_argument("--global-convention", choices=GLOBAL_CONVENTIONS, default="final",
                     help="global error at the final time, or the max over all steps")
    run.add_argument("--cfl-bound", type=float, default=50.0,
                     help="warn when k/h exceeds this in data-mode corrected3/4 runs")
    run.add_argument("--out", required=True, help="CSV output path")

    preset = sub.add_parser("preset", help="reproduce one of the stored table studies")
    preset.add_argument("--name", required=True, choices=sorted(PRESETS), help="preset name")
    preset.add_argument("--out", required=True, help="CSV output path")

    audit = sub.add_parser("audit", help="sample the operator bounds behind the theory")
    audit.add_argument("--space", required=True, choices=SPACE_KINDS, help="space discretization")
    agrid = audit.add_mutually_exclusive_group(required=True)
    agrid.add_argument("--h", type=float, help="grid spacing for finite differences")
    agrid.add_argument("--nodes", type=int, help="collocation node count")
    audit.add_argument("--k", type=_float_list, default=[0.1, 0.01],
                       help="time steps for the summation-by-parts sums (default 0.1,0.01)")
    audit.add_argument("--problem", choices=sorted(PROBLEMS),
                       help="also audit Jacobian similarity and consistency on this problem")

    sub.add_parser("list", help="list problems, presets, tableaus and spaces")
    return parser


def _cmd_run(args) -> int:
    if args.space == "collocation" and args.nodes is None:
        raise UsageError("collocation needs --nodes")
    if args.space != "collocation" and args.h is None:
        raise UsageError(f"{args.space} needs --h")
    errors = tuple(e.strip() for e in args.errors.split(",") if e.strip())
    try:
        cfg = StudyConfig(args.problem, args.scheme, args.tableau, args.space, tuple(args.k),
                          tuple(args.h or ()), args.nodes, args.boundary_mode, args.T, errors,
                          args.cfl_bound, args.local_convention, args.global_convention)
        problem = get_problem(args.problem)
        for h, nodes in cfg.grids():
            space = cached_space(cfg.space, h, nodes)
            if tuple(space.boundary_kinds) != tuple(problem.boundary_kinds):
                raise UsageError(f"problem {args.problem} has {problem.boundary_kinds} conditions "
                                 f"but space {args.space} expects {space.boundary_kinds}")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return _finish(run_study(cfg), args.out)


def _finish(report, out) -> int:
    emit_csv(report, out)
    for row in report.rows:
        print(f"k={row.k!r} h={row.h!r} local={row.local_error} global={row.global_error} "
              f"status={row.status}")
    return EXIT_BLOWUP if report.blew_up else EXIT_OK


def _cmd_preset(args) -> int:
    return _finish(run_study(get_preset(args.name)), args.out)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return float(value) if not isinstance(value, (int, str)) else value


def _cmd_audit(args) -> int:
    try:
        space = cached_space(args.space, args.h, args.nodes)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    problem = get_problem(args.problem) if args.problem else None
    record = assumption_audit(space, args.k, problem)
    print(json.dumps(_jsonable(record), indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_list(args) -> int:
    print("problems: " + ", ".join(sorted(PROBLEMS)))
    print("presets:  " + ", ".join(sorted(PRESETS, key=lambda n: int(n[5:]))))
    print("tableaus: " + ", ".join(sorted(TABLEAUS)))
    print("spaces:   " + ", ".join(SPACE_KINDS))
    print("schemes:  " + ", ".join(s.value for s in SchemeKind))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {"run": _cmd_run, "preset": _cmd_preset, "audit": _cmd_audit,
                   "list": _cmd_list}[args.command]
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return handler(args)
    except UsageError as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
