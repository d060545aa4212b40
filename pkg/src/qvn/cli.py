"""Command-line front end: ``qvn run|list-scenarios|demo|verify``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .core import QuantumError
from .scenarios import (ScenarioError, budget_check, builtin_scenario, dumps_report,
                        list_scenarios, load_scenario, run_scenario, validate_report)

EXIT_OK, EXIT_INVALID, EXIT_ABORT = 0, 2, 3


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("trials must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, help="override the scenario seed")
    common.add_argument("--out", type=Path, help="write the JSON report here (default stdout)")
    common.add_argument("--trials", type=_positive, help="number of independent trials")
    common.add_argument("--mode", choices=["postselect", "deterministic", "covariant"],
                        help="override the composition mode of every step")

    p = argparse.ArgumentParser(prog="qvn", description="Quantum von Neumann architecture simulator")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run a scenario file")
    run.add_argument("scenario", type=Path)
    sub.add_parser("list-scenarios", help="list built-in demo scenarios")
    demo = sub.add_parser("demo", parents=[common], help="run a built-in demo")
    demo.add_argument("name")
    ver = sub.add_parser("verify", help="validate reports and check their qubit budgets")
    ver.add_argument("reports", type=Path, nargs="+")
    return p


def _emit(report: dict, out: Path | None):
    text = dumps_report(report)
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _execute(scenario: dict, args) -> int:
    report = run_scenario(scenario, args.seed, args.trials, args.mode)
    _emit(report, args.out)
    return EXIT_ABORT if report["status"] == "abort" else EXIT_OK


def main(argv=None) -> int:
    level = os.environ.get("QVN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list-scenarios":
            print("\n".join(list_scenarios()))
            return EXIT_OK
        if args.command == "run":
            return _execute(load_scenario(args.scenario), args)
        if args.command == "demo":
            return _execute(builtin_scenario(args.name), args)
        results, ok = {}, True
        for path in args.reports:
            report = json.loads(path.read_text())
            validate_report(report)
            check = budget_check(report)
            results.update(check)
            ok &= all(c["pass"] for c in check.values())
        print(json.dumps(results, indent=2, sort_keys=True))
        return EXIT_OK if ok else EXIT_INVALID
    except (ScenarioError, json.JSONDecodeError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except QuantumError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
