"""Benchmark command line: single runs, the full solver-comparison matrix,
and result aggregation into profile/scalability CSVs.

Outputs are plain headered CSVs with floats at 17 significant digits, so
replaying aggregation over the same inputs is byte-identical.
"""

# Pin BLAS threading before numpy loads anywhere in this process: results
# must not depend on the host's core count, and benchmark workers must not
# oversubscribe each other.
import os

for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import INF
from .engine import TraceRow
from .metrics import (DEFAULT_ALPHAS, distribution_summary, performance_profile,
                      speedup_efficiency)
from .problems import CATALOG, get_problem
from .solvers import SOLVER_KINDS, RunRecord, SolverConfig, run_solver

TRACE_FIELDS = ("iteration", "phase", "block_index", "q", "best_f", "best_h",
                "delta_mesh", "delta_poll")
SUMMARY_FIELDS = ("problem", "solver", "q", "run", "seed", "blocks", "evals",
                  "final_f", "final_h", "wall_seconds")


def fmt(v) -> str:
    """Serialize a value for CSV; floats keep 17 significant digits."""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return f"{v:.17g}"
    return str(v)


def run_id(problem: str, solver: str, q: int, run: int) -> str:
    return f"{problem}_{solver}_q{q}_r{run}"


def write_trace(path: Path, trace: Sequence[TraceRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_FIELDS)
        for row in trace:
            w.writerow([row.iteration, row.phase, row.block_index, row.q,
                        fmt(row.best_f), fmt(row.best_h),
                        fmt(row.delta_mesh), fmt(row.delta_poll)])


def write_report(path: Path, report: Sequence[dict]) -> None:
    with open(path, "w") as fh:
        for row in report:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def read_trace(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return [dict(r) for r in csv.DictReader(fh)]


def _record_from_files(out_dir: Path, row: dict) -> RunRecord:
    rid = run_id(row["problem"], row["solver"], int(row["q"]), int(row["run"]))
    trace = read_trace(out_dir / f"trace_{rid}.csv")
    best_f = np.array([float(r["best_f"]) for r in trace])
    best_h = np.array([float(r["best_h"]) for r in trace])
    return RunRecord(
        problem=row["problem"], solver=row["solver"], q=int(row["q"]),
        run=int(row["run"]), seed=int(row["seed"]),
        best_f=best_f, best_h=best_h,
        final_f=float(row["final_f"]), final_h=float(row["final_h"]),
        final_x=None, evals=int(row["evals"]), blocks=int(row["blocks"]),
        wall_seconds=float(row["wall_seconds"]))


def _summary_row(record: RunRecord) -> dict:
    return {
        "problem": record.problem, "solver": record.solver, "q": record.q,
        "run": record.run, "seed": record.seed, "blocks": record.blocks,
        "evals": record.evals, "final_f": record.final_f,
        "final_h": record.final_h, "wall_seconds": record.wall_seconds,
    }


def _execute_cell(args: tuple) -> dict:
    """Worker for one benchmark cell; writes trace/report files and returns
    the summary row."""
    problem, solver, q, run, blocks, seed, sleep_ms, out_dir = args
    entry = get_problem(problem)
    config = SolverConfig(kind=solver, q=q, block_budget=blocks, seed=seed,
                          sleep_ms=sleep_ms)
    result = run_solver(config, entry, run=run)
    out = Path(out_dir)
    rid = run_id(problem, solver, q, run)
    write_trace(out / f"trace_{rid}.csv", result.trace)
    if result.report:
        write_report(out / f"search_report_{rid}.jsonl", result.report)
    return _summary_row(result.record)


# ------------------------------------------------------------- subcommands
def cmd_run(args: argparse.Namespace) -> int:
    entry = get_problem(args.problem)
    config = SolverConfig(kind=args.solver, q=args.q, block_budget=args.blocks,
                          seed=args.seed, eval_workers=args.threads,
                          sleep_ms=args.sleep_ms)
    result = run_solver(config, entry, run=args.run)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rid = run_id(args.problem, args.solver, args.q, args.run)
    write_trace(out / f"trace_{rid}.csv", result.trace)
    write_report(out / f"search_report_{rid}.jsonl", result.report)
    rec = result.record
    print(f"{rid}: blocks={rec.blocks} evals={rec.evals} "
          f"best_f={fmt(rec.final_f)} best_h={fmt(rec.final_h)}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = [(p, s, q, r, args.blocks, args.seed, args.sleep_ms, str(out))
             for p in args.problems
             for s in args.solvers
             for q in args.q
             for r in range(args.runs)]
    for p, s, q, r, *_ in cells:
        get_problem(p)
        if s not in SOLVER_KINDS:
            raise KeyError(f"unknown solver {s!r}")
    if args.threads > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(_execute_cell, cells))
    else:
        rows = [_execute_cell(c) for c in cells]
    rows.sort(key=lambda r: (r["problem"], r["solver"], r["q"], r["run"]))
    with open(out / "bench_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_FIELDS)
        for row in rows:
            w.writerow([fmt(row[k]) if isinstance(row[k], float) else row[k]
                        for k in SUMMARY_FIELDS])
    print(f"bench: {len(rows)} runs -> {out / 'bench_summary.csv'}")
    return 0


def cmd_profiles(args: argparse.Namespace) -> int:
    out = Path(args.out_dir)
    summary_path = out / "bench_summary.csv"
    if not summary_path.exists():
        print(f"error: {summary_path} not found; run `bench` first", file=sys.stderr)
        return 2
    with open(summary_path, newline="") as fh:
        summary = [dict(r) for r in csv.DictReader(fh)]
    records = [_record_from_files(out, row) for row in summary]
    f_star = {name: entry.best_known_f for name, entry in CATALOG.items()}

    qs = sorted({r.q for r in records})
    for tau in args.tau:
        path = out / f"profiles_tau{tau:g}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("q", "solver", "alpha", "proportion"))
            for q in qs:
                try:
                    curves = performance_profile(records, tau, q, f_star,
                                                 alphas=DEFAULT_ALPHAS)
                except ValueError:
                    continue
                for curve in curves:
                    for a, prop in zip(curve.alphas, curve.proportions):
                        w.writerow((q, curve.solver, fmt(float(a)), fmt(float(prop))))
        print(f"profiles: tau={tau:g} -> {path}")

    rows = speedup_efficiency(records)
    with open(out / "scalability.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("solver", "q", "speedup", "efficiency", "pairs", "excluded"))
        for row in rows:
            w.writerow((row.solver, row.q, fmt(row.speedup), fmt(row.efficiency),
                        row.pairs, row.excluded))
    print(f"scalability -> {out / 'scalability.csv'}")

    dist = distribution_summary(records)
    with open(out / "distribution.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("problem", "solver", "q", "runs", "f_min", "f_q1",
                    "f_median", "f_q3", "f_max", "feasible_runs"))
        for row in dist:
            w.writerow((row.problem, row.solver, row.q, row.runs, fmt(row.f_min),
                        fmt(row.f_q1), fmt(row.f_median), fmt(row.f_q3),
                        fmt(row.f_max), row.feasible_runs))
    print(f"distribution -> {out / 'distribution.csv'}")
    return 0


# ------------------------------------------------------------------ parser
def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok]


def _str_list(text: str) -> list[str]:
    return [tok for tok in text.split(",") if tok]


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blockmads",
                                     description="Block-parallel surrogate-assisted "
                                                 "direct search benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single configured run, trace CSV out")
    p_run.add_argument("--problem", required=True, choices=sorted(CATALOG))
    p_run.add_argument("--solver", required=True, choices=SOLVER_KINDS)
    p_run.add_argument("--q", type=int, default=8)
    p_run.add_argument("--blocks", type=int, default=100)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--run", type=int, default=0)
    p_run.add_argument("--threads", type=int, default=1,
                       help="concurrent blackbox evaluations within a block")
    p_run.add_argument("--sleep-ms", type=float, default=0.0,
                       help="debug delay per blackbox call")
    p_run.add_argument("--out-dir", default="out")
    p_run.set_defaults(func=cmd_run)

    p_bench = sub.add_parser("bench", help="full problems x solvers x q x runs matrix")
    p_bench.add_argument("--problems", type=_str_list, default=sorted(CATALOG))
    p_bench.add_argument("--solvers", type=_str_list, default=list(SOLVER_KINDS))
    p_bench.add_argument("--q", type=_int_list, default=[1, 8])
    p_bench.add_argument("--runs", type=int, default=10)
    p_bench.add_argument("--blocks", type=int, default=100)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                         help="benchmark cells executed in parallel")
    p_bench.add_argument("--sleep-ms", type=float, default=0.0)
    p_bench.add_argument("--out-dir", default="out")
    p_bench.set_defaults(func=cmd_bench)

    p_prof = sub.add_parser("profiles", help="aggregate bench CSVs into profiles, "
                                             "scalability and distribution tables")
    p_prof.add_argument("--tau", type=_float_list, default=[1e-2])
    p_prof.add_argument("--out-dir", default="out")
    p_prof.set_defaults(func=cmd_profiles)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
