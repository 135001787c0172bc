"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. The benchmark-backed
criteria execute real solver runs (shared across tests and parallelized
over processes); expect the full suite to take tens of minutes on a small
machine, of which the q = 16 benchmark batches dominate.
"""

import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import pytest

from blockmads.cli import write_trace
from blockmads.core import aggregate_violation
from blockmads.lowess import (KERNEL_ORDER, KERNEL_SUPPORT, Kernel,
                              LowessModel, aoecv, kernel_eval)
from blockmads.metrics import speedup_efficiency
from blockmads.problems import CATALOG, get_problem
from blockmads.selection import SelectionContext, SelectionState, cycle_select
from blockmads.solvers import RunRecord, SolverConfig, run_solver

from reference_selection import RefProblem, RefState, ref_cycle_select
from test_selection import make_ctx, make_ref, random_fixture

SEED = 0
BLOCKS = 100
RUNS = 10
F_STAR = {name: entry.best_known_f for name, entry in CATALOG.items()}


def _report(criterion, passed, detail):
    print(f"\nACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")
    assert passed, detail


# ----------------------------------------------------------- run execution
def _cell(args):
    problem, kind, q, run, blocks, workers = args
    config = SolverConfig(kind=kind, q=q, block_budget=blocks, seed=SEED,
                          eval_workers=workers)
    result = run_solver(config, get_problem(problem), run=run)
    rec = result.record
    with tempfile.NamedTemporaryFile(suffix=".csv", delete=False) as fh:
        path = Path(fh.name)
    write_trace(path, result.trace)
    trace_bytes = path.read_bytes()
    path.unlink()
    return {
        "key": args,
        "problem": problem, "solver": kind, "q": q, "run": run,
        "best_f": rec.best_f, "best_h": rec.best_h,
        "final_f": rec.final_f, "final_h": rec.final_h,
        "blocks": rec.blocks, "evals": rec.evals,
        "trace_bytes": trace_bytes,
    }


class RunPool:
    def __init__(self):
        self.cache = {}
        self.workers = max(1, min(4, os.cpu_count() or 1))

    def run(self, cells):
        cells = [tuple(c) for c in cells]
        missing = [c for c in cells if c not in self.cache]
        if missing:
            if self.workers > 1 and len(missing) > 1:
                with ProcessPoolExecutor(max_workers=self.workers) as pool:
                    for out in pool.map(_cell, missing):
                        self.cache[out["key"]] = out
            else:
                for c in missing:
                    out = _cell(c)
                    self.cache[out["key"]] = out
        return [self.cache[c] for c in cells]

    def records(self, cells):
        outs = self.run(cells)
        return [RunRecord(problem=o["problem"], solver=o["solver"], q=o["q"],
                          run=o["run"], seed=SEED, best_f=o["best_f"],
                          best_h=o["best_h"], final_f=o["final_f"],
                          final_h=o["final_h"], final_x=None, evals=o["evals"],
                          blocks=o["blocks"], wall_seconds=0.0)
                for o in outs]


@pytest.fixture(scope="session")
def pool():
    return RunPool()


def _batch(problem, kind, q, blocks=BLOCKS, runs=RUNS, workers=1):
    return [(problem, kind, q, r, blocks, workers) for r in range(runs)]


# -------------------------------------------------------------- criterion 1
def test_criterion_1_best_known_oracle():
    worst_rel = 0.0
    worst_h = 0.0
    for name, entry in sorted(CATALOG.items()):
        f, c = entry.spec.evaluator(entry.best_known_x)
        h = aggregate_violation(c)
        rel = abs(f - entry.best_known_f) / abs(entry.best_known_f)
        worst_rel = max(worst_rel, rel)
        worst_h = max(worst_h, h)
        assert h <= 1e-6, f"{name}: h = {h}"
        assert rel <= 1e-4, f"{name}: rel error {rel}"
    _report(1, True, f"best-known oracle: max rel err {worst_rel:.2e}, max h {worst_h:.2e}")


# -------------------------------------------------------------- criterion 2
def test_criterion_2_headline_quality(pool):
    detail = []
    ok = True
    for problem in ("vessel", "welded"):
        lowess = pool.records(_batch(problem, "lowess-b", 16))
        mads = pool.records(_batch(problem, "mads", 16))
        f_star = F_STAR[problem]
        med_lowess = float(np.median([r.final_f for r in lowess]))
        med_mads = float(np.median([r.final_f for r in mads]))
        within = abs(med_lowess - f_star) <= 0.01 * abs(f_star)
        beats = med_lowess <= med_mads
        ok = ok and within and beats
        detail.append(f"{problem}: lowess-b median {med_lowess:.4g} "
                      f"(f* {f_star:.4g}, within 1%: {within}), "
                      f"mads median {med_mads:.4g} (lowess <= mads: {beats})")
    _report(2, ok, "; ".join(detail))


# -------------------------------------------------------------- criterion 3
def test_criterion_3_tcsd_feasibility(pool):
    lowess = pool.records(_batch("tcsd", "lowess-b", 8))
    mads = pool.records(_batch("tcsd", "mads", 8))
    n_lowess = sum(1 for r in lowess if r.final_h == 0.0)
    n_mads = sum(1 for r in mads if r.final_h == 0.0)
    ok = n_lowess >= 8 and n_mads <= n_lowess
    _report(3, ok, f"feasible runs out of {RUNS}: lowess-b {n_lowess} (need >= 8), "
                   f"mads {n_mads} (need <= lowess-b)")


# -------------------------------------------------------------- criterion 4
def test_criterion_4_selection_oracle_equivalence():
    rng = np.random.default_rng(2024)
    mismatches = 0
    for trial in range(1000):
        coords, fhat, hhat, cmax, x_coords, dm, q, cycle = random_fixture(rng)
        ctx = make_ctx(coords, fhat, hhat, cmax, x_coords, dm)
        ref = make_ref(coords, fhat, hhat, cmax, x_coords, dm)
        got = cycle_select(ctx, q, cycle, SelectionState())
        want = ref_cycle_select(ref, q, cycle, RefState())
        if got != want:
            mismatches += 1
    _report(4, mismatches == 0,
            f"1000 random fixtures, all six methods cycled: {mismatches} mismatches")


# -------------------------------------------------------------- criterion 5
def test_criterion_5_lowess_suite():
    rng = np.random.default_rng(77)
    worst = 0.0
    for trial in range(200):
        n = int(rng.integers(1, 6))
        p = int(rng.integers(n + 2, 41))
        x = rng.random((p, n))
        coef = rng.normal(size=(n, 2))
        intercept = rng.normal(size=2)
        y = x @ coef + intercept
        lam = float(rng.uniform(0.5, 3.0))
        kernel = (Kernel.GAUSSIAN, Kernel.INVERSE_QUADRATIC,
                  Kernel.INVERSE_MULTI_QUADRATIC, Kernel.EXP_ROOT)[trial % 4]
        model = LowessModel(x, y, lam, kernel)
        xi = rng.random(n)
        expected = xi @ coef + intercept
        rel = float(np.max(np.abs(model.predict(xi) - expected)
                           / np.maximum(np.abs(expected), 1e-12)))
        worst = max(worst, rel)
    assert worst <= 1e-8, f"affine exactness violated: {worst:.2e}"

    for kernel in KERNEL_ORDER:
        assert kernel_eval(kernel, 0.0) == 1.0
        d = np.linspace(-3, 3, 101)
        np.testing.assert_array_equal(kernel_eval(kernel, d), kernel_eval(kernel, -d))
        support = KERNEL_SUPPORT[kernel]
        if support is not None:
            assert kernel_eval(kernel, support) == 0.0
            assert kernel_eval(kernel, support * 1.5) == 0.0

    # perfect-order model: affine data reproduced by cross-validation
    x = np.random.default_rng(5).random((12, 2))
    y = np.column_stack([x @ np.array([1.0, -2.0]) + 0.4])
    assert aoecv(LowessModel(x, y, 1.0, Kernel.GAUSSIAN)) == 0.0
    # reversed two-point fixture: exactly half the ordered pairs disagree
    x2 = np.array([[0.0], [1.0]])
    y2 = np.array([[0.0], [1.0]])
    assert aoecv(LowessModel(x2, y2, 1.0, Kernel.GAUSSIAN)) == 0.5
    _report(5, True, f"affine exactness worst rel {worst:.2e}; all 7 kernels pass; "
                     f"AOECV fixtures exact")


# -------------------------------------------------------------- criterion 6
def test_criterion_6_determinism(pool):
    mismatched = []
    for kind in ("mads", "multistart", "lhsearch", "lowess-a", "lowess-b"):
        got = pool.run([("welded", kind, 8, 0, BLOCKS, 1),
                        ("welded", kind, 8, 0, BLOCKS, 8)])
        if got[0]["trace_bytes"] != got[1]["trace_bytes"]:
            mismatched.append(kind)
    _report(6, not mismatched,
            f"trace CSVs byte-identical for workers 1 vs 8 on welded q=8 "
            f"(all five solvers){'; mismatches: ' + ','.join(mismatched) if mismatched else ''}")


# -------------------------------------------------------------- criterion 7
def _synthetic_record(solver, problem, run, q, best_f):
    best_f = np.asarray(best_f, dtype=float)
    return RunRecord(problem=problem, solver=solver, q=q, run=run, seed=0,
                     best_f=best_f, best_h=np.zeros_like(best_f),
                     final_f=float(best_f[-1]), final_h=0.0, final_x=None,
                     evals=best_f.size, blocks=best_f.size, wall_seconds=0.0)


def test_criterion_7_scalability_machinery(pool):
    from blockmads.metrics import performance_profile

    # hand-computed profile: solvers reach tau at blocks 5 and 10
    fast = _synthetic_record("fast", "p", 0, 4, [10.0] * 4 + [1.0] * 8)
    slow = _synthetic_record("slow", "p", 0, 4, [10.0] * 9 + [1.0] * 3)
    curves = {c.solver: c for c in performance_profile(
        [fast, slow], 0.1, 4, {"p": 1.0}, alphas=[1.0, 2.0])}
    assert list(curves["fast"].proportions) == [1.0, 1.0]
    assert list(curves["slow"].proportions) == [0.0, 1.0]

    # hand-computed speed-up: b_ref(1) = 40, b_ref(8) = 10 -> 4.0, eff 0.5
    r1 = _synthetic_record("s", "p", 0, 1, [10.0] * 39 + [2.0] * 11)
    r8 = _synthetic_record("s", "p", 0, 8, [10.0] * 9 + [2.0] * 41)
    rows = {(r.solver, r.q): r for r in speedup_efficiency([r1, r8])}
    assert rows[("s", 8)].speedup == pytest.approx(4.0)
    assert rows[("s", 8)].efficiency == pytest.approx(0.5)
    # geometric mean of ratios {2, 8} is 4
    recs = []
    for run, (b1, bq) in enumerate([(8, 4), (16, 2)]):
        recs.append(_synthetic_record("g", "p", run, 1,
                                      [9.0] * (b1 - 1) + [1.0] * (24 - b1 + 1)))
        recs.append(_synthetic_record("g", "p", run, 4,
                                      [9.0] * (bq - 1) + [1.0] * (24 - bq + 1)))
    rows = {(r.solver, r.q): r for r in speedup_efficiency(recs)}
    assert rows[("g", 4)].speedup == pytest.approx(4.0)

    # real runs: q = 1 speed-up is exactly 1 for every solver
    cells = []
    for kind in ("mads", "multistart", "lhsearch", "lowess-a", "lowess-b"):
        cells += _batch("welded", kind, 1, blocks=12, runs=2)
    records = pool.records(cells)
    failures = []
    for row in speedup_efficiency(records):
        if row.q == 1 and row.pairs > 0 and not math.isclose(row.speedup, 1.0):
            failures.append(row.solver)
    _report(7, not failures,
            "profiles and speed-up match hand values; real q=1 speed-up is 1 "
            f"for all solvers{'; failures: ' + ','.join(failures) if failures else ''}")


# -------------------------------------------------------------- criterion 8
def test_criterion_8_monotone_scaling(pool):
    f_target = 1.05 * F_STAR["welded"]
    medians = {}
    for q in (1, 4, 16):
        records = pool.records(_batch("welded", "lowess-b", q))
        blocks = []
        for rec in records:
            reached = np.nonzero(rec.best_f <= f_target)[0]
            blocks.append(float(reached[0] + 1) if reached.size else float("inf"))
        medians[q] = float(np.median(blocks))
    ok = medians[1] >= medians[4] >= medians[16]
    _report(8, ok, "median blocks to reach 1.05 f*: "
                   f"q=1: {medians[1]:g}, q=4: {medians[4]:g}, q=16: {medians[16]:g} "
                   f"(nonincreasing: {ok})")
