"""Command-line entry point: ``gvf run | reproduce | scan | sweep``."""

from __future__ import annotations

import argparse
import copy
import sys
from pathlib import Path

from .errors import GvfError, ValidationError
from .runner import REPRODUCTIONS, bundled_scenario, execute, write_artifacts
from .scenario import Scenario

EXIT_OK, EXIT_INPUT, EXIT_IO = 0, 2, 3


def _with_mode(scn: Scenario, mode: str, **overrides) -> Scenario:
    doc = copy.deepcopy(scn.doc)
    doc["mode"] = mode
    for key, val in overrides.items():
        if val is not None:
            if mode not in doc:
                raise ValidationError(f"{mode}: section required for mode {mode!r}")
            doc[mode][key] = val
    return Scenario.from_dict(doc, scn.name)


def _summary_line(report: dict, out: Path) -> str:
    mode = report["mode"]
    if mode == "scan":
        pts = ", ".join("(" + ", ".join(f"{v:.8g}" for v in p) + ")" for p in report["singular_points"])
        detail = f"{report['count']} singular point(s) {pts}".rstrip()
    elif mode == "sweep":
        detail = f"{report['random_converged']}/{report['random_total']} random starts converged"
    else:
        detail = f"{report['termination']}, final |e| = {report['convergence']['final_error']:.3e}"
    return f"{report['name']} [{mode}]: {detail} -> {out}"


def _execute(scn: Scenario, out: Path | None, workers: int | None) -> int:
    out = out or Path("gvf-out") / scn.name
    result = execute(scn, workers)
    write_artifacts(scn, result, out)
    print(_summary_line(result.report, out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gvf", description="Guiding-vector-field path-following simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("scenario", type=Path)
    p.add_argument("-o", "--out", type=Path, help="output directory (default gvf-out/<name>)")
    p.add_argument("--sweep", action="store_true", help="fan out the scenario's sweep section")
    p.add_argument("--workers", type=int, default=None, help="worker threads for sweeps")

    p = sub.add_parser("reproduce", help="run a bundled reproduction scenario")
    p.add_argument("name", help=f"one of: {', '.join(REPRODUCTIONS)}")
    p.add_argument("-o", "--out", type=Path)

    p = sub.add_parser("scan", help="audit a field for singular points")
    p.add_argument("scenario", type=Path)
    p.add_argument("-o", "--out", type=Path)
    p.add_argument("--grid", type=int, default=None, help="grid points per axis (>= 8)")

    p = sub.add_parser("sweep", help="run many seeded random starts")
    p.add_argument("scenario", type=Path)
    p.add_argument("-o", "--out", type=Path)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "reproduce":
            if args.name not in REPRODUCTIONS:
                raise ValidationError(f"unknown reproduction {args.name!r}; expected one of {', '.join(REPRODUCTIONS)}")
            scn = bundled_scenario(args.name)
            return _execute(scn, args.out, None)
        scn = Scenario.load(args.scenario)
        if args.command == "scan":
            scn = _with_mode(scn, "scan", grid=args.grid)
        elif args.command == "sweep" or getattr(args, "sweep", False):
            scn = _with_mode(scn, "sweep", count=getattr(args, "count", None))
        workers = getattr(args, "workers", None)
        if workers is not None and workers < 1:
            raise ValidationError("--workers: must be >= 1")
        return _execute(scn, args.out, workers)
    except OSError as exc:
        print(f"gvf: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (GvfError, ValueError) as exc:
        print(f"gvf: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
