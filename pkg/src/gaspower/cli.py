"""Command line interface.

Subcommands: run, mc, optimize, schema, extract, max-deviation.  Exit codes:
0 success, 2 input error, 3 simulation failure, 4 infeasible optimization.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import mc, optimization, output, schemas
from .bundle import BundleError
from .network import NetworkError
from .problem import Problem

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_INFEASIBLE = 4


def _load_problem(args) -> Problem:
    return Problem.load(args.problem_dir, getattr(args, "step", None))


def cmd_run(args) -> int:
    problem = _load_problem(args)
    result = problem.simulate(seed=args.seed, sigma=args.sigma)
    doc = output.build_output_document(problem, result)
    path = output.write_output_atomic(doc, problem.output_dir())
    print(path)
    if result.status != "ok":
        print(result.message, file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_mc(args) -> int:
    out_dir = Path(args.out or Path(args.problem_dir) / "output")
    out_dir.mkdir(parents=True, exist_ok=True)
    levels = args.quantiles
    total_failed = 0
    for sigma in (args.sigma or [None]):
        ensemble = mc.run_ensemble(args.problem_dir, args.runs,
                                   args.master_seed, sigma, args.workers,
                                   getattr(args, "step", None))
        total_failed += len(ensemble.failed_seeds)
        if ensemble.failed_seeds:
            print(f"{len(ensemble.failed_seeds)} of {args.runs} runs failed "
                  f"(sigma={sigma}): seeds {ensemble.failed_seeds}",
                  file=sys.stderr)
        if not ensemble.documents:
            continue
        for key in args.series:
            rows = mc.quantile_rows(ensemble, key, levels)
            tag = key.replace(".", "_")
            sig = "det" if sigma is None else f"{sigma:g}"
            path = out_dir / f"quantiles_{tag}_sigma{sig}.csv"
            with open(path, "w", newline="") as handle:
                writer = csv.DictWriter(handle, fieldnames=list(rows[0]))
                writer.writeheader()
                writer.writerows(rows)
            print(path)
    return EXIT_OK if total_failed == 0 else EXIT_SOLVER


def cmd_optimize(args) -> int:
    problem = _load_problem(args)
    result = optimization.optimize(problem)
    report = {
        "status": result.status,
        "message": result.message,
        "cost": result.cost,
        "history": result.history,
        "stride_one_audit": result.audit,
    }
    out_dir = problem.output_dir()
    control_path = output.write_output_atomic(
        {"provenance": {"tool": "gaspower"}, **result.controls.to_document()},
        out_dir, prefix="optimized_control")
    report_path = output.write_output_atomic(
        {"provenance": {"tool": "gaspower"}, **report}, out_dir,
        prefix="optimization_report")
    print(control_path)
    print(report_path)
    if result.status != "optimal":
        print(result.message, file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_schema(args) -> int:
    if args.action == "make-full-factory":
        for path in schemas.write_schemas(args.problem_dir):
            print(path)
    else:
        for path in schemas.insert_schema_keys(args.problem_dir):
            print(path)
    return EXIT_OK


def cmd_extract(args) -> int:
    doc = json.loads(Path(args.output_file).read_text())
    if args.out:
        with open(args.out, "w", newline="") as handle:
            output.extract_csv(doc, args.series, handle)
        print(args.out)
    else:
        output.extract_csv(doc, args.series, sys.stdout)
    return EXIT_OK


def cmd_max_deviation(args) -> int:
    baseline = json.loads(Path(args.baseline).read_text())
    ensemble = [json.loads(Path(p).read_text()) for p in args.outputs]
    rows = mc.max_deviation_rows(baseline, ensemble)
    destination = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(destination, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            destination.close()
            print(args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaspower",
        description="Transient simulation and optimal control of coupled "
                    "gas-power networks")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one problem directory")
    run.add_argument("problem_dir")
    run.add_argument("--seed", type=int, default=None,
                     help="override the boundary seed")
    run.add_argument("--sigma", type=float, default=None,
                     help="override the diffusion of all stochastic nodes")
    run.add_argument("--step", type=float, default=None,
                     help="override the time step in seconds")
    run.set_defaults(func=cmd_run)

    mc_p = sub.add_parser("mc", help="seeded Monte Carlo ensemble with "
                                     "quantile tables")
    mc_p.add_argument("problem_dir")
    mc_p.add_argument("--runs", type=int, default=100)
    mc_p.add_argument("--sigma", type=float, action="append", default=None)
    mc_p.add_argument("--quantiles", type=float, nargs="+",
                      default=[0.5, 0.75, 0.9])
    mc_p.add_argument("--series", nargs="+", required=True,
                      help="series keys, e.g. pipe1 or pipe1.flow_m3_s")
    mc_p.add_argument("--master-seed", type=int, default=1)
    mc_p.add_argument("--workers", type=int, default=1)
    mc_p.add_argument("--step", type=float, default=None)
    mc_p.add_argument("--out", default=None, help="directory for CSV tables")
    mc_p.set_defaults(func=cmd_mc)

    opt = sub.add_parser("optimize", help="compute optimal controls")
    opt.add_argument("problem_dir")
    opt.set_defaults(func=cmd_optimize)

    sch = sub.add_parser("schema", help="emit or insert JSON schemas")
    sch.add_argument("action", choices=["make-full-factory", "insert-key"])
    sch.add_argument("problem_dir")
    sch.set_defaults(func=cmd_schema)

    ext = sub.add_parser("extract", help="extract one series as CSV")
    ext.add_argument("output_file")
    ext.add_argument("series")
    ext.add_argument("--out", default=None)
    ext.set_defaults(func=cmd_extract)

    dev = sub.add_parser("max-deviation",
                         help="per-component max |value - baseline|")
    dev.add_argument("baseline")
    dev.add_argument("outputs", nargs="+")
    dev.add_argument("--out", default=None)
    dev.set_defaults(func=cmd_max_deviation)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BundleError, NetworkError, output.OutputError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
