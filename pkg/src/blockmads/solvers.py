"""The five benchmark solvers and the per-run record they produce.

All solvers share the same engine; they differ only in the SEARCH step:
no search (the poll-only baseline), q independent single-evaluation runs
(multistart), a fresh Latin hypercube block per iteration, or surrogate
optimization with either the plain (methods 1-2) or the diversified
(methods 3-6) selection cycle.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import rng as rngmod
from .core import INF
from .engine import (EngineConfig, LhsSearch, MadsEngine, NoSearch,
                     ScaledProblem, TraceRow)
from .problems import ProblemCatalogEntry, lhs_sample
from .search import SurrogateSearch

SOLVER_KINDS = ("mads", "multistart", "lhsearch", "lowess-a", "lowess-b")

#: Selection-method cycles of the two surrogate solvers.
LOWESS_A_CYCLE = (1, 2)
LOWESS_B_CYCLE = (3, 4, 5, 6)

#: Starting-point sets hold this many rows, mirroring the benchmark design
#: of drawing one Latin hypercube set per run and slicing per solver.
START_SET_SIZE = 64


@dataclass
class SolverConfig:
    kind: str
    q: int
    block_budget: int = 100
    seed: int = 0
    eval_workers: int = 1
    sleep_ms: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in SOLVER_KINDS:
            raise ValueError(f"unknown solver kind {self.kind!r}; choose from {SOLVER_KINDS}")
        if self.q < 1:
            raise ValueError("q must be >= 1")


@dataclass
class RunRecord:
    """History of one solver run: best-so-far (f, h) after each block."""

    problem: str
    solver: str
    q: int
    run: int
    seed: int
    best_f: np.ndarray
    best_h: np.ndarray
    final_f: float
    final_h: float
    final_x: Optional[np.ndarray]
    evals: int
    blocks: int
    wall_seconds: float

    def f_after(self, b: int) -> float:
        """Best-so-far objective after b blocks (1-based); runs that stop
        early hold their final value."""
        if self.best_f.size == 0:
            return INF
        idx = min(b, self.best_f.size) - 1
        return float(self.best_f[idx])


def starting_points(entry: ProblemCatalogEntry, seed: int, run: int,
                    count: int = START_SET_SIZE) -> np.ndarray:
    """The run's starting-point set (original coordinates); identical for
    every solver and block size at the same (seed, problem, run)."""
    gen = rngmod.substream(seed, rngmod.START_POINTS,
                           rngmod.derive_key(entry.name), run)
    return lhs_sample(entry.spec.lower, entry.spec.upper, count, gen)


def _run_seed(config: SolverConfig, entry: ProblemCatalogEntry, run: int, instance: int = 0) -> int:
    return rngmod.derive_key(config.seed, entry.name, config.kind, config.q, run, instance)


def _search_for(kind: str):
    if kind == "lhsearch":
        return LhsSearch()
    if kind == "lowess-a":
        return SurrogateSearch(LOWESS_A_CYCLE)
    if kind == "lowess-b":
        return SurrogateSearch(LOWESS_B_CYCLE)
    return NoSearch()


@dataclass
class SolverRun:
    record: RunRecord
    trace: list[TraceRow]
    report: list[dict]


def _record_from_trace(trace: Sequence[TraceRow], config: SolverConfig, entry: ProblemCatalogEntry,
                       run: int, final_x: Optional[np.ndarray], evals: int,
                       wall: float) -> RunRecord:
    best_f = np.array([row.best_f for row in trace])
    best_h = np.array([row.best_h for row in trace])
    return RunRecord(
        problem=entry.name, solver=config.kind, q=config.q, run=run, seed=config.seed,
        best_f=best_f, best_h=best_h,
        final_f=float(best_f[-1]) if best_f.size else INF,
        final_h=float(best_h[-1]) if best_h.size else INF,
        final_x=final_x, evals=evals, blocks=len(trace), wall_seconds=wall)


def _run_single(config: SolverConfig, entry: ProblemCatalogEntry, run: int,
                starts: np.ndarray) -> SolverRun:
    scaled = ScaledProblem(entry.spec, sleep_ms=config.sleep_ms)
    engine_cfg = EngineConfig(q=config.q, block_budget=config.block_budget,
                              eval_workers=config.eval_workers)
    engine = MadsEngine(scaled, engine_cfg, _run_seed(config, entry, run),
                        search=_search_for(config.kind))
    result = engine.run([scaled.to_scaled(p) for p in starts])
    anchor = result.incumbents.anchor_point()
    final_x = scaled.to_original(anchor.x) if anchor is not None else None
    record = _record_from_trace(result.trace, config, entry, run, final_x,
                                result.evals, result.wall_seconds)
    return SolverRun(record=record, trace=result.trace, report=result.report)


def _run_multistart(config: SolverConfig, entry: ProblemCatalogEntry, run: int,
                    starts: np.ndarray) -> SolverRun:
    """q independent poll-only runs, one evaluation per instance per block;
    the merged best-so-far is the min across instances."""
    t0 = time.perf_counter()
    instances: list[SolverRun] = []
    for i in range(config.q):
        sub = SolverConfig(kind="mads", q=1, block_budget=config.block_budget,
                           seed=config.seed, eval_workers=1, sleep_ms=config.sleep_ms)
        scaled = ScaledProblem(entry.spec, sleep_ms=config.sleep_ms)
        engine = MadsEngine(scaled, EngineConfig(q=1, block_budget=config.block_budget),
                            _run_seed(config, entry, run, instance=i), search=NoSearch())
        result = engine.run([scaled.to_scaled(starts[i % len(starts)])])
        anchor = result.incumbents.anchor_point()
        final_x = scaled.to_original(anchor.x) if anchor is not None else None
        instances.append(SolverRun(
            record=_record_from_trace(result.trace, sub, entry, run, final_x,
                                      result.evals, result.wall_seconds),
            trace=result.trace, report=result.report))

    blocks = max(len(inst.trace) for inst in instances)
    best_f = np.full(blocks, INF)
    best_h = np.full(blocks, INF)
    dm = np.full(blocks, INF)
    dp = np.full(blocks, INF)
    for inst in instances:
        rec = inst.record
        for b in range(blocks):
            f_b = rec.f_after(b + 1)
            idx = min(b, rec.best_h.size - 1)
            h_b = float(rec.best_h[idx]) if rec.best_h.size else INF
            best_f[b] = min(best_f[b], f_b)
            best_h[b] = min(best_h[b], h_b)
            row = inst.trace[min(b, len(inst.trace) - 1)]
            dm[b] = min(dm[b], row.delta_mesh)
            dp[b] = min(dp[b], row.delta_poll)
    trace = [TraceRow(iteration=b + 1, phase="multistart", block_index=b + 1,
                      q=config.q, best_f=float(best_f[b]), best_h=float(best_h[b]),
                      delta_mesh=float(dm[b]), delta_poll=float(dp[b]))
             for b in range(blocks)]
    finals = [inst.record for inst in instances]
    keys = [(rec.final_h, rec.final_f) for rec in finals]
    best_inst = finals[int(np.lexsort((
        np.array([k[1] for k in keys]), np.array([k[0] for k in keys])))[0])]
    wall = time.perf_counter() - t0
    record = RunRecord(
        problem=entry.name, solver=config.kind, q=config.q, run=run, seed=config.seed,
        best_f=best_f, best_h=best_h,
        final_f=float(best_f[-1]) if blocks else INF,
        final_h=float(best_h[-1]) if blocks else INF,
        final_x=best_inst.final_x,
        evals=sum(r.evals for r in finals), blocks=blocks, wall_seconds=wall)
    return SolverRun(record=record, trace=trace, report=[])


def run_solver(config: SolverConfig, entry: ProblemCatalogEntry, run: int = 0,
               starts: Optional[np.ndarray] = None) -> SolverRun:
    """Execute one configured run. ``starts`` defaults to the seeded
    starting-point set; non-multistart solvers use its first point and
    multistart uses its first q points."""
    if starts is None:
        starts = starting_points(entry, config.seed, run)
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    if config.kind == "multistart":
        if starts.shape[0] < config.q:
            raise ValueError(f"multistart with q={config.q} needs at least q starting points")
        return _run_multistart(config, entry, run, starts[:config.q])
    return _run_single(config, entry, run, starts[:1])
