"""Command-line entry point: solve, validate, export-lp, render, precheck."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from .ilp import build_model, export_lp
from .instance import InstanceError, ProblemInstance, StudentId, load_instance, precheck
from .render import RenderOptions, render
from .schedule import ScheduleFormatError, dump_schedule, load_schedule
from .solver import INFEASIBLE, OPTIMAL, FEASIBLE, TIMEOUT_NO_SOLUTION, SolveParams, solve
from .validator import check_schedule

__all__ = ["RenderOptions", "main", "run"]

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_TIMEOUT, EXIT_VIOLATIONS = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="meetsched", description="Exact periodic meeting scheduler.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve an instance and write schedule JSON")
    p.add_argument("config")
    p.add_argument("--time-limit", type=float, default=0.0, metavar="S", help="seconds, 0 = unlimited")
    p.add_argument("--threads", type=int, default=1, metavar="N")
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--log-interval", type=float, default=5.0, metavar="S",
                   help="seconds between progress lines on stderr, 0 = every node")
    p.add_argument("--quiet", action="store_true", help="no progress lines")
    p.add_argument("--out", metavar="FILE")

    p = sub.add_parser("validate", help="check a schedule against every constraint")
    p.add_argument("config")
    p.add_argument("schedule")

    p = sub.add_parser("export-lp", help="write the model in LP format")
    p.add_argument("config")
    p.add_argument("--out", metavar="FILE")

    p = sub.add_parser("render", help="print a schedule as a timetable")
    p.add_argument("config")
    p.add_argument("schedule")
    scope = p.add_mutually_exclusive_group()
    scope.add_argument("--week", type=int, metavar="W")
    scope.add_argument("--student", metavar="C:I", help="cohort label, initial or 1-based index, then member")
    p.add_argument("--style", choices=("grid", "itinerary"), default="grid")

    p = sub.add_parser("precheck", help="screen an instance for obvious infeasibility")
    p.add_argument("config")
    return parser


def _student(instance: ProblemInstance, text: str) -> StudentId:
    cohort, sep, member = text.rpartition(":")
    if not sep or not cohort:
        raise UsageError(f"--student expects C:I, got {text!r}")
    labels = [c.label for c in instance.cohorts]
    if cohort in labels:
        index = labels.index(cohort)
    else:
        initials = [c.initial for c in instance.cohorts]
        if initials.count(cohort.upper()) == 1:
            index = initials.index(cohort.upper())
        elif cohort.isdigit() and 1 <= int(cohort) <= len(labels):
            index = int(cohort) - 1
        else:
            raise UsageError(f"unknown cohort {cohort!r}")
    try:
        return StudentId(index, int(member))
    except ValueError:
        raise UsageError(f"bad member index {member!r}") from None


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _solve(args: argparse.Namespace) -> int:
    instance = load_instance(args.config)
    try:
        params = SolveParams(
            time_limit=args.time_limit,
            thread_count=args.threads,
            deterministic=args.deterministic,
            log_interval=None if args.quiet else args.log_interval,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = solve(instance, params)
    objective = "-" if result.objective is None else result.objective
    line = (f"status={result.status} objective={objective} bound={result.lower_bound} "
            f"nodes={result.stats.nodes} time={result.stats.wall_time:.2f}s")
    print(line)
    if result.schedule is not None:
        text = dump_schedule(instance, result.schedule) + "\n"
        # without --out the schedule follows the summary line on stdout
        _write(text, args.out)
    return {
        OPTIMAL: EXIT_OK,
        FEASIBLE: EXIT_OK,
        INFEASIBLE: EXIT_INFEASIBLE,
        TIMEOUT_NO_SOLUTION: EXIT_TIMEOUT,
    }[result.status]


def _validate(args: argparse.Namespace) -> int:
    instance = load_instance(args.config)
    schedule = load_schedule(instance, args.schedule)
    violations = check_schedule(instance, schedule)
    for v in violations:
        print(f"{v.row_id}: {v.detail}")
    print(f"{len(violations)} violations")
    return EXIT_VIOLATIONS if violations else EXIT_OK


def _export(args: argparse.Namespace) -> int:
    _write(export_lp(build_model(load_instance(args.config))), args.out)
    return EXIT_OK


def _render(args: argparse.Namespace) -> int:
    instance = load_instance(args.config)
    schedule = load_schedule(instance, args.schedule)
    if args.week is not None:
        options = RenderOptions(scope="week", week=args.week, style=args.style)
    elif args.student is not None:
        options = RenderOptions(scope="student", student=_student(instance, args.student), style=args.style)
    else:
        options = RenderOptions(style=args.style)
    try:
        text = render(instance, schedule, options)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    sys.stdout.write(text)
    return EXIT_OK


def _precheck(args: argparse.Namespace) -> int:
    diagnostics = precheck(load_instance(args.config))
    for d in diagnostics:
        print(f"{d.severity} {d.code}: {d.message}")
    if not diagnostics:
        print("no problems found")
    return EXIT_INFEASIBLE if any(d.severity == "fatal" for d in diagnostics) else EXIT_OK


_COMMANDS = {
    "solve": _solve,
    "validate": _validate,
    "export-lp": _export,
    "render": _render,
    "precheck": _precheck,
}


def run(argv: Sequence[str] | None = None) -> int:
    """Execute one command and return its exit code."""
    try:
        args = _parser().parse_args(argv)
    except UsageError as exc:
        print(f"meetsched: {exc}", file=sys.stderr)
        return EXIT_USAGE
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    root = logging.getLogger("meetsched")
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    try:
        return _COMMANDS[args.command](args)
    except BrokenPipeError:
        raise
    except (UsageError, InstanceError, ScheduleFormatError, OSError, json.JSONDecodeError) as exc:
        print(f"meetsched: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        root.removeHandler(handler)


def main() -> None:
    try:
        code = run()
        sys.stdout.flush()
    except BrokenPipeError:
        # the reader went away, e.g. output piped into head
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = EXIT_USAGE
    sys.exit(code)


if __name__ == "__main__":
    main()
