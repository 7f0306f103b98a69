"""Command-line entry point: ``bicsim run | metrics | validate``.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 bound violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .engine import run_scenario
from .errors import (BoundViolation, DegenerateMachineError, InitializationError,
                     IntegrationDiverged, NetworkSingularError, ValidationError)
from .report import compute_metrics, export_csv, read_csv
from .scenario import load_scenario

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_BOUND = 0, 1, 2, 3


def _parse_window(text):
    try:
        t0, t1 = (float(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like t0:t1, got '{text}'") from None
    return t0, t1


def _describe(scenario):
    s = scenario.system
    lines = [f"scenario '{scenario.name}': {s.n_bus} buses, {s.n_gen} generators, "
             f"{len(scenario.events)} events, t_end={scenario.t_end} s, dt={scenario.dt} s"]
    lines += [f"default: {d}" for d in scenario.defaults_applied]
    return "\n".join(lines)


def cmd_validate(args):
    scenario = load_scenario(args.scenario)
    print(_describe(scenario))
    print("valid")
    return EXIT_OK


def cmd_run(args):
    scenario = load_scenario(args.scenario)
    print(_describe(scenario))
    traj = run_scenario(scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = export_csv(traj, out / "trajectory.csv")
    t1 = float(traj.time[-1])
    window = args.window or (max(float(traj.time[0]), t1 - 50.0), t1)
    report = compute_metrics(traj, traj.params, window)
    (out / "metrics.json").write_text(json.dumps(report.to_dict(), indent=2))
    print(f"wrote {csv_path} ({len(traj)} records)")
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_BOUND if report.bound_violations else EXIT_OK


def cmd_metrics(args):
    scenario = load_scenario(args.scenario)
    traj = read_csv(args.csv)
    report = compute_metrics(traj, scenario.controller, args.window)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_BOUND if report.bound_violations else EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="bicsim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario and export its trajectory")
    r.add_argument("scenario")
    r.add_argument("--out", default=".", help="output directory (default: current)")
    r.add_argument("--window", type=_parse_window, help="metrics window t0:t1 (default: last 50 s)")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("metrics", help="compute the steady-state report from a trajectory CSV")
    m.add_argument("csv")
    m.add_argument("--window", type=_parse_window, required=True)
    m.add_argument("--scenario", required=True, help="scenario file supplying gains and limits")
    m.set_defaults(func=cmd_metrics)

    v = sub.add_parser("validate", help="check a scenario file and echo resolved defaults")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except BoundViolation as exc:
        print(f"bound violation: {exc}", file=sys.stderr)
        return EXIT_BOUND
    except (IntegrationDiverged, NetworkSingularError, InitializationError,
            DegenerateMachineError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
