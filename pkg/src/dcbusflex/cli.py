"""Command-line front end.

    dcbusflex run (SCENARIO.json | --case N) [--trace CSV] [--summary JSON] ...
    dcbusflex validate SCENARIO.json
    dcbusflex cases

Exit codes: 0 ok, 1 unreadable or malformed input, 2 invalid scenario,
3 bus collapse during the run.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .engine import run
from .output import format_report, write_gnuplot_columns, write_summary_json, write_trace_csv
from .scenario import (CASE_EXPECTATIONS, CASE_TITLES, ScenarioError, UnknownKeyError,
                       builtin_case, load_scenario, validate_scenario)

EXIT_OK, EXIT_INPUT, EXIT_INVALID, EXIT_COLLAPSE = 0, 1, 2, 3

_LABELS = {"grid_converter": "AC/DC", "battery": "BATTERY", "ev_charger": "EV"}


def _err(msg: str) -> None:
    print(f"dcbusflex: {msg}", file=sys.stderr)


def _load(path: str):
    """Return (spec, exit_code); spec is None on failure."""
    try:
        return load_scenario(path), EXIT_OK
    except OSError as exc:
        _err(f"cannot read {path}: {exc.strerror or exc}")
        return None, EXIT_INPUT
    except UnknownKeyError as exc:
        _err(f"{path}: unknown key(s): {', '.join(exc.keys)}")
        return None, EXIT_INVALID
    except ScenarioError as exc:
        _err(f"{path}: {exc}")
        return None, EXIT_INPUT


def cmd_run(args) -> int:
    if args.case is not None:
        spec = builtin_case(args.case)
    else:
        spec, code = _load(args.scenario)
        if spec is None:
            return code
    overrides = {}
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.t_end is not None:
        overrides["t_end"] = args.t_end
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        spec = replace(spec, **overrides)

    violations = validate_scenario(spec)
    if violations:
        for v in violations:
            print(v, file=sys.stderr)
        return EXIT_INVALID

    trace_path = Path(args.trace or f"{spec.name}_trace.csv")
    summary_path = Path(args.summary or f"{spec.name}_summary.json")
    paths = [trace_path, summary_path] + ([Path(args.gnuplot)] if args.gnuplot else [])
    if len({p.resolve() for p in paths}) != len(paths):
        _err("output paths must be distinct")
        return EXIT_INVALID

    trace, summary = run(spec)
    try:
        write_trace_csv(trace, trace_path)
        write_summary_json(summary, summary_path)
        if args.gnuplot:
            write_gnuplot_columns(trace, args.gnuplot)
    except OSError as exc:
        _err(f"cannot write output: {exc}")
        return EXIT_INPUT
    if not args.quiet:
        print(format_report(summary))
        print(f"  trace   -> {trace_path}")
        print(f"  summary -> {summary_path}")
    return EXIT_COLLAPSE if summary.collapsed else EXIT_OK


def cmd_validate(args) -> int:
    spec, code = _load(args.scenario)
    if spec is None:
        return code
    violations = validate_scenario(spec)
    for v in violations:
        print(v)
    return EXIT_INVALID if violations else EXIT_OK


def describe_case(n: int) -> str:
    spec = builtin_case(n)
    roster = []
    for node in spec.nodes:
        item = f"{_LABELS[node.kind]} {node.p_rated:g} kW k={node.k:g}"
        if node.soc_pct is not None:
            item += f" SOC {node.soc_pct:g}"
        roster.append(item)
    modes = ", ".join(f"{_LABELS[nd.kind]}={nd.initial_mode}" for nd in spec.nodes)
    ev = spec.events[0]
    target = _LABELS[spec.node(ev.target).kind]
    return "\n".join([
        f"case {n}: {CASE_TITLES[n]}",
        f"  roster:   {', '.join(roster)}",
        f"  bus:      {spec.bus.u_nominal:g} V nominal, band +/-{spec.bus.du_set:g} V",
        f"  modes:    {modes}",
        f"  event:    t={ev.t:g} s {target} {ev.action}({ev.value:g} kW)",
        f"  expected: {CASE_EXPECTATIONS[n]}",
    ])


def cmd_cases(args) -> int:
    print("\n\n".join(describe_case(n) for n in (1, 2, 3)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcbusflex", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario file or a built-in case")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("scenario", nargs="?", help="scenario JSON file")
    src.add_argument("--case", type=int, choices=(1, 2, 3), help="built-in test case")
    r.add_argument("--trace", help="trace CSV path (default <name>_trace.csv)")
    r.add_argument("--summary", help="summary JSON path (default <name>_summary.json)")
    r.add_argument("--gnuplot", help="also write whitespace-separated numeric columns")
    r.add_argument("--dt", type=float, help="override simulation step (s)")
    r.add_argument("--t-end", type=float, help="override simulated duration (s)")
    r.add_argument("--seed", type=int, help="override scenario seed")
    r.add_argument("--quiet", action="store_true", help="no report on stdout")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("cases", help="list the built-in test cases")
    c.set_defaults(func=cmd_cases)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
