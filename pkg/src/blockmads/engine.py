"""The direct-search iteration engine: progressive-barrier incumbents,
block-parallel evaluation, the poll step, and the outer loop that a search
strategy plugs into.

The engine works on a pre-scaled copy of the problem (unit box); all
candidate generation, caching and surrogate modelling happen in scaled
coordinates, and only the evaluator wrapper translates back.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import rng as rngmod
from .core import (INF, Cache, EvalTag, Evaluation, ProblemSpec, coord_key,
                   precedes)
from .mesh import (MeshState, initial_mesh, pad_poll, poll_directions,
                   project_to_mesh, update_mesh)

#: Range guess used to scale variables that have no finite upper bound.
UNBOUNDED_RANGE_GUESS = 1000.0


@dataclass
class EngineConfig:
    q: int
    block_budget: int
    eval_workers: int = 1
    delta_poll_init: float = 0.1
    training_cap: int = 500
    sleep_ms: float = 0.0


@dataclass(frozen=True)
class Incumbents:
    """Progressive-barrier incumbents: the best feasible point and the
    least-infeasible point with finite violation."""

    best_feasible: Optional[Evaluation] = None
    best_infeasible: Optional[Evaluation] = None

    def anchor_point(self) -> Optional[Evaluation]:
        return self.best_feasible if self.best_feasible is not None else self.best_infeasible


def update_incumbents(inc: Incumbents, new: Sequence[Evaluation]) -> tuple[Incumbents, bool]:
    """Fold a batch of evaluations into the incumbents.

    Success means some new point strictly precedes the previous best
    feasible point, or, while no feasible point exists, strictly precedes
    the previous best infeasible point. Ties keep the earlier entry.
    """
    prev_bf, prev_bi = inc.best_feasible, inc.best_infeasible
    bf, bi = prev_bf, prev_bi
    success = False
    for e in new:
        if e.h == 0.0:
            if bf is None or precedes(e, bf):
                bf = e
        elif e.h < INF:
            if bi is None or precedes(e, bi):
                bi = e
        if prev_bf is not None:
            if precedes(e, prev_bf):
                success = True
        else:
            if prev_bi is None:
                if e.h < INF:
                    success = True
            elif precedes(e, prev_bi):
                success = True
    return Incumbents(best_feasible=bf, best_infeasible=bi), success


@dataclass
class TraceRow:
    """One per-block trace line (the CSV interface of a run)."""

    iteration: int
    phase: str
    block_index: int
    q: int
    best_f: float
    best_h: float
    delta_mesh: float
    delta_poll: float


class ScaledProblem:
    """Diagonal pre-scaling of a problem onto the unit box.

    Variables without a finite range get a scaling-only range guess so the
    engine still sees order-one coordinates.
    """

    def __init__(self, spec: ProblemSpec, sleep_ms: float = 0.0) -> None:
        self.spec = spec
        self.sleep_ms = sleep_ms
        lo = spec.lower.copy()
        hi = spec.upper.copy()
        lo_f = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi - UNBOUNDED_RANGE_GUESS, 0.0))
        hi_f = np.where(np.isfinite(hi), hi, lo_f + UNBOUNDED_RANGE_GUESS)
        rng_len = hi_f - lo_f
        rng_len[rng_len <= 0.0] = 1.0
        self.offset = lo_f
        self.ranges = rng_len
        self.lower_s = np.zeros(spec.n)
        self.upper_s = np.ones(spec.n)
        # integer vars: number of integer steps per unit of scaled range
        self.integer_scale = np.where(spec.integer_mask, self.ranges, 0.0)

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def m(self) -> int:
        return self.spec.m

    def to_original(self, xs: np.ndarray) -> np.ndarray:
        return self.offset + np.asarray(xs, dtype=float) * self.ranges

    def to_scaled(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.offset) / self.ranges

    def evaluate(self, xs: np.ndarray) -> Evaluation:
        """Run the blackbox at a scaled point; failures become barrier
        entries with f = h = +inf."""
        if self.sleep_ms > 0.0:
            time.sleep(self.sleep_ms / 1000.0)
        x = self.to_original(xs)
        if np.any(self.spec.integer_mask):
            x = np.where(self.spec.integer_mask, np.rint(x), x)
        try:
            f, c = self.spec.evaluator(x)
        except Exception:
            return Evaluation(x=np.asarray(xs, dtype=float), f=INF, c=None, h=INF)
        return Evaluation.from_outputs(xs, f, c)


def evaluate_block(candidates: Sequence[np.ndarray], problem: ScaledProblem,
                   cache: Cache, workers: int = 1,
                   executor: Optional[ThreadPoolExecutor] = None) -> list[Evaluation]:
    """Evaluate a block of candidates, up to ``workers`` at a time.

    All evaluations complete before any result is visible; results are
    inserted into the cache in candidate order regardless of completion
    order, so the outcome does not depend on the worker count.
    """
    for cand in candidates:
        if cache.contains(cand):
            raise ValueError("block candidates must not already be cached")
    if workers > 1 and len(candidates) > 1:
        if executor is not None:
            results = list(executor.map(problem.evaluate, candidates))
        else:
            with ThreadPoolExecutor(max_workers=min(workers, len(candidates))) as pool:
                results = list(pool.map(problem.evaluate, candidates))
    else:
        results = [problem.evaluate(c) for c in candidates]
    for ev in results:
        cache.add(ev)
    return results


class SearchStrategy:
    """Base search step: propose candidate points for one block.

    ``propose`` returns (points, metas) with scaled, mesh-projected,
    deduplicated points; an empty proposal skips the search block. ``model``
    exposes the iteration's surrogate (when one exists) for poll ordering.
    """

    model = None

    def propose(self, engine: "MadsEngine", iteration: int) -> tuple[list[np.ndarray], list[dict]]:
        return [], []


class NoSearch(SearchStrategy):
    pass


class LhsSearch(SearchStrategy):
    """Fresh Latin hypercube block each iteration, projected to the mesh."""

    def propose(self, engine: "MadsEngine", iteration: int) -> tuple[list[np.ndarray], list[dict]]:
        from .problems import lhs_unit

        gen = rngmod.substream(engine.seed, rngmod.SEARCH_LHS, iteration)
        raw = lhs_unit(gen, engine.config.q, engine.problem.n)
        points, metas = [], []
        seen = engine.cache.keys()
        for row in raw:
            cand = project_to_mesh(row, engine.mesh, engine.problem.lower_s,
                                   engine.problem.upper_s, engine.problem.integer_scale)
            key = coord_key(cand)
            if key in seen:
                continue
            seen.add(key)
            points.append(cand)
            metas.append({"method": "lhs", "fhat": None, "hhat": None})
        return points, metas


@dataclass
class RunResult:
    trace: list[TraceRow]
    report: list[dict]
    incumbents: Incumbents
    cache: Cache
    blocks: int
    evals: int
    wall_seconds: float
    stopped_on: str


class MadsEngine:
    """Outer iteration driver: SEARCH (optional), then an opportunistic
    block-parallel POLL, then mesh and incumbent updates."""

    def __init__(self, problem: ScaledProblem, config: EngineConfig, seed: int,
                 search: Optional[SearchStrategy] = None) -> None:
        self.problem = problem
        self.config = config
        self.seed = seed
        self.search = search if search is not None else NoSearch()
        self.cache = Cache()
        self.incumbents = Incumbents()
        self.mesh: Optional[MeshState] = None
        self.trace: list[TraceRow] = []
        self.report: list[dict] = []
        self.blocks = 0
        self._executor: Optional[ThreadPoolExecutor] = None

    # ------------------------------------------------------------- plumbing
    def _record_block(self, iteration: int, phase: str, size: int) -> None:
        self.blocks += 1
        bf = self.incumbents.best_feasible
        bi = self.incumbents.best_infeasible
        best_f = bf.f if bf is not None else INF
        best_h = 0.0 if bf is not None else (bi.h if bi is not None else INF)
        mesh = self.mesh
        self.trace.append(TraceRow(
            iteration=iteration, phase=phase, block_index=self.blocks, q=size,
            best_f=best_f, best_h=best_h,
            delta_mesh=mesh.delta_mesh if mesh else float("nan"),
            delta_poll=mesh.delta_poll if mesh else float("nan")))

    def _eval_block(self, candidates: list[np.ndarray], iteration: int, phase: str) -> tuple[list[Evaluation], bool]:
        evals = evaluate_block(candidates, self.problem, self.cache,
                               workers=self.config.eval_workers, executor=self._executor)
        self.incumbents, success = update_incumbents(self.incumbents, evals)
        self._record_block(iteration, phase, len(candidates))
        return evals, success

    def training_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Finite evaluations as (X, Y) for surrogate fitting, capped for
        cost at training_cap rows.

        Beyond the cap, half the rows are the most recent and half a
        deterministic stride sample of the older history: a pure recency
        window collapses onto the incumbent cluster late in a run and the
        model loses the global landscape, stalling the search step.
        """
        usable = [e for e in self.cache.entries if not e.failed]
        cap = self.config.training_cap
        if len(usable) > cap:
            half = cap // 2
            older = usable[:-half]
            idx = np.unique(np.linspace(0, len(older) - 1, cap - half).round().astype(int))
            rows = [older[i] for i in idx] + usable[-half:]
        else:
            rows = usable
        if not rows:
            return np.empty((0, self.problem.n)), np.empty((0, self.problem.m + 1))
        x = np.stack([e.x for e in rows])
        y = np.empty((len(rows), self.problem.m + 1))
        for i, e in enumerate(rows):
            y[i, 0] = e.f
            if self.problem.m:
                y[i, 1:] = e.c if e.c is not None else INF
        return x, y

    # ------------------------------------------------------------ poll step
    def _order_poll(self, points: list[np.ndarray]) -> list[np.ndarray]:
        """Most promising candidates first: surrogate (h, f) order when a
        model exists, distance to the incumbent otherwise."""
        if len(points) <= 1:
            return points
        model = self.search.model
        arr = np.stack(points)
        if model is not None:
            pred, ok = model.predict_batch(arr)
            fhat = np.where(ok, pred[:, 0], INF)
            if self.problem.m:
                from .lowess import _violation_rows
                hhat = np.where(ok, _violation_rows(pred[:, 1:]), INF)
            else:
                hhat = np.where(ok, 0.0, INF)
            order = np.lexsort((fhat, hhat))
        else:
            anchor_ev = self.incumbents.anchor_point()
            ref = anchor_ev.x if anchor_ev is not None else self.mesh.anchor
            d2 = np.einsum("ij,ij->i", arr - ref, arr - ref)
            order = np.argsort(d2, kind="stable")
        return [points[i] for i in order]

    def _poll_step(self, iteration: int) -> bool:
        q = self.config.q
        gen = rngmod.substream(self.seed, rngmod.OUTER_POLL, iteration)
        pts = poll_directions(self.mesh, gen, self.problem.lower_s, self.problem.upper_s,
                              self.problem.integer_scale)
        pad_gen = rngmod.substream(self.seed, rngmod.POLL_PAD, iteration)
        pts = pad_poll(pts, q, self.mesh, pad_gen, self.problem.lower_s,
                       self.problem.upper_s, self.cache.keys(), self.problem.integer_scale)
        if not pts:
            return False
        pts = self._order_poll(pts)
        success = False
        for s in range(0, len(pts), q):
            if self.blocks >= self.config.block_budget:
                break
            _, ok = self._eval_block(pts[s:s + q], iteration, "poll")
            if ok:
                success = True
                break  # opportunistic: skip remaining blocks
        return success

    # ------------------------------------------------------------- main run
    def run(self, start_points: Sequence[np.ndarray]) -> RunResult:
        """Execute until the block budget is spent or the mesh underflows.

        ``start_points`` are scaled coordinates; they are evaluated together
        as the first block.
        """
        t0 = time.perf_counter()
        cfg = self.config
        if cfg.eval_workers > 1:
            self._executor = ThreadPoolExecutor(max_workers=cfg.eval_workers)
        try:
            starts = []
            seen = set()
            for p in start_points:
                p = np.asarray(p, dtype=float)
                key = coord_key(p)
                if key not in seen:
                    seen.add(key)
                    starts.append(p)
            self.mesh = initial_mesh(starts[0], cfg.delta_poll_init)
            self._eval_block(starts, 0, "init")
            anchor_ev = self.incumbents.anchor_point()
            if anchor_ev is not None:
                self.mesh = MeshState(self.mesh.delta_mesh, self.mesh.delta_poll, anchor_ev.x)

            stopped_on = "budget"
            iteration = 0
            while self.blocks < cfg.block_budget:
                if self.mesh.underflow():
                    stopped_on = "mesh_underflow"
                    break
                iteration += 1
                success = False
                from_full_poll = False

                points, metas = self.search.propose(self, iteration)
                if points:
                    evals, success = self._eval_block(points, iteration, "search")
                    if metas:
                        self.report.append({
                            "iteration": iteration,
                            "selections": [
                                {**meta, "f": ev.f, "h": ev.h}
                                for meta, ev in zip(metas, evals)
                            ],
                        })
                if not success and self.blocks < cfg.block_budget:
                    success = self._poll_step(iteration)
                    from_full_poll = success

                self.mesh = update_mesh(self.mesh, success, from_full_poll)
                anchor_ev = self.incumbents.anchor_point()
                if anchor_ev is not None:
                    self.mesh = MeshState(self.mesh.delta_mesh, self.mesh.delta_poll, anchor_ev.x)
            else:
                stopped_on = "budget"
        finally:
            if self._executor is not None:
                self._executor.shutdown(wait=True)
                self._executor = None
        return RunResult(trace=self.trace, report=self.report, incumbents=self.incumbents,
                         cache=self.cache, blocks=self.blocks, evals=len(self.cache),
                         wall_seconds=time.perf_counter() - t0, stopped_on=stopped_on)
