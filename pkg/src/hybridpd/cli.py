"""Command-line entry points: run experiments, summarize records, export data."""
from __future__ import annotations

import argparse
import sys

from . import problems as problems_mod
from .errors import ConfigurationError
from .problems import export_static_csv, export_trajectories_csv, get_problem
from .runner import emit_summary, load_records, run_experiment


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="hybridpd",
        description="Hybrid additive model experiments (prior + ML residual)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="master seed override")
    p_run.add_argument("--scale", type=float, default=None,
                       help="desk scale factor override")
    p_run.add_argument("--workers", type=int, default=1)

    p_sum = sub.add_parser("summarize", help="aggregate a records.jsonl file")
    p_sum.add_argument("records")
    p_sum.add_argument("--out", default=None, help="summary CSV path")

    p_exp = sub.add_parser("export-data", help="write a generated dataset to CSV")
    p_exp.add_argument("problem", choices=sorted(
        list(problems_mod.STATIC_GENERATORS) + list(problems_mod.DYNAMIC_GENERATORS)))
    p_exp.add_argument("seed", type=int)
    p_exp.add_argument("out_dir")
    p_exp.add_argument("--scale", type=float, default=1.0)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            records_path, reports = run_experiment(
                args.config, out_dir=args.out, scale=args.scale,
                master_seed=args.seed, workers=args.workers)
            failed = sum(1 for r in reports if r.error is not None)
            print(f"wrote {records_path} ({len(reports)} records, {failed} failed)")
            return 1 if failed else 0
        if args.command == "summarize":
            out = args.out or args.records.replace(".jsonl", "_summary.csv")
            rows = emit_summary(args.records, out)
            n_rec = len(load_records(args.records))
            print(f"wrote {out} ({len(rows)} cells from {n_rec} records)")
            return 0
        if args.command == "export-data":
            problem = get_problem(args.problem, args.seed, scale=args.scale)
            if args.problem in problems_mod.DYNAMIC_GENERATORS:
                out = export_trajectories_csv(problem, args.out_dir)
            else:
                out = export_static_csv(problem, args.out_dir)
            print(f"wrote {out}")
            return 0
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
