"""Command-line front end: ``timely run <scenario>`` and ``timely list-examples``.

Exit status is 0 when every check passes, 1 when any check fails or errors,
and 2 when the scenario cannot be read or validated.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .errors import ParseError, TimelyError
from .scenarios import list_examples, load_scenario, run_scenario

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="timely", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"timely {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file or a builtin scenario by name")
    run.add_argument("scenario", help="path to a scenario JSON file, or a builtin name")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--out", metavar="DIR", help="write report.json and trajectory CSVs here")
    run.add_argument("--format", choices=("json", "text"), default="text",
                     help="format of the report printed to stdout")
    run.add_argument("--tol", type=float, help="override every check tolerance")
    run.add_argument("--horizon", type=float, help="override the integration horizon")

    sub.add_parser("list-examples", help="list the builtin scenarios")
    return parser


def _list(out) -> int:
    rows = list_examples()
    width = max(len(name) for name, _, _ in rows)
    for name, description, topic in rows:
        print(f"{name:<{width}}  {description}", file=out)
        if topic:
            print(f"{'':<{width}}  [{topic}]", file=out)
    return EXIT_OK


def _run(args, out, err) -> int:
    try:
        scenario = load_scenario(args.scenario)
        if args.seed is not None or args.tol is not None or args.horizon is not None:
            scenario = scenario.with_overrides(args.seed, args.tol, args.horizon)
    except ParseError as exc:
        print(f"error: {args.scenario}: {exc}", file=err)
        return EXIT_CONFIG
    except (OSError, TimelyError, ValueError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_CONFIG
    report = run_scenario(scenario, args.out)
    print(report.to_json() if args.format == "json" else report.to_text(), file=out)
    return report.exit_status


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    if args.command == "list-examples":
        return _list(out)
    return _run(args, out, err)
