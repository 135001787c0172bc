"""Result aggregation: performance profiles, speed-up/efficiency, and the
distribution summary of final objective values.

A run "solves" a problem at tolerance tau once its best-so-far objective is
within tau (relatively) of the best-known value; profiles report, per
solver, the fraction of (problem, run) instances solved within alpha times
the per-instance minimal block budget. Speed-up compares how many blocks a
q-CPU run needs to reach the value its own q = 1 twin achieved; it is
reported as b(1)/b(q) so that larger means faster.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import INF
from .solvers import RunRecord

#: Default alpha grid for profile curves.
DEFAULT_ALPHAS = (1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0,
                  12.0, 16.0, 20.0, 24.0, 32.0, 48.0, 64.0, 100.0)


def blocks_to_tolerance(record: RunRecord, f_star: float, tau: float) -> Optional[int]:
    """Smallest block count whose best-so-far f satisfies
    |f - f*| <= tau * |f*|; None when the run never does."""
    if f_star == 0.0:
        raise ValueError("relative tolerance is undefined for f* = 0")
    thresh = tau * abs(f_star)
    ok = np.abs(record.best_f - f_star) <= thresh
    idx = np.nonzero(ok)[0]
    if idx.size == 0:
        return None
    return int(idx[0]) + 1


@dataclass
class ProfileCurve:
    solver: str
    alphas: np.ndarray
    proportions: np.ndarray


def performance_profile(records: Sequence[RunRecord], tau: float, q: int,
                        f_star: dict[str, float],
                        alphas: Sequence[float] = DEFAULT_ALPHAS) -> list[ProfileCurve]:
    """Profile curves over the records with the given block size.

    Instances never solved by a solver count as unsolved at every alpha;
    instances no solver solves stay in the denominator.
    """
    recs = [r for r in records if r.q == q]
    if not recs:
        raise ValueError(f"no records with q={q}")
    solvers = sorted({r.solver for r in recs})
    instances = sorted({(r.problem, r.run) for r in recs})
    for s in solvers:
        have = {(r.problem, r.run) for r in recs if r.solver == s}
        missing = set(instances) - have
        if missing:
            raise ValueError(f"solver {s!r} is missing instances {sorted(missing)[:3]}...")

    b = {}
    for r in recs:
        b[(r.solver, r.problem, r.run)] = blocks_to_tolerance(r, f_star[r.problem], tau)
    b_min = {}
    for (prob, run) in instances:
        vals = [b[(s, prob, run)] for s in solvers if b[(s, prob, run)] is not None]
        b_min[(prob, run)] = min(vals) if vals else None

    alphas = np.asarray(alphas, dtype=float)
    curves = []
    for s in solvers:
        props = np.zeros(alphas.size)
        for (prob, run) in instances:
            bs = b[(s, prob, run)]
            bm = b_min[(prob, run)]
            if bs is None or bm is None:
                continue
            props += bs <= alphas * bm
        props /= len(instances)
        curves.append(ProfileCurve(solver=s, alphas=alphas, proportions=props))
    return curves


@dataclass
class ScalabilityRow:
    solver: str
    q: int
    speedup: float
    efficiency: float
    pairs: int
    excluded: int


def _first_block_reaching(record: RunRecord, target: float) -> Optional[int]:
    ok = record.best_f <= target
    idx = np.nonzero(ok)[0]
    if idx.size == 0:
        return None
    return int(idx[0]) + 1


def speedup_efficiency(records: Sequence[RunRecord]) -> list[ScalabilityRow]:
    """Geometric-mean speed-up and efficiency per (solver, q).

    The reference value of a (solver, problem, run) triple is the best f of
    its q = 1 record; pairs whose q-run never reaches the reference are
    excluded from the geometric mean and tallied.
    """
    by_key: dict[tuple, dict[int, RunRecord]] = {}
    for r in records:
        by_key.setdefault((r.solver, r.problem, r.run), {})[r.q] = r
    qs = sorted({r.q for r in records})
    solvers = sorted({r.solver for r in records})

    rows = []
    for s in solvers:
        for q in qs:
            ratios = []
            excluded = 0
            for (s2, prob, run), by_q in by_key.items():
                if s2 != s or 1 not in by_q or q not in by_q:
                    continue
                ref_rec = by_q[1]
                f_ref = float(ref_rec.best_f.min()) if ref_rec.best_f.size else INF
                b1 = _first_block_reaching(ref_rec, f_ref)
                bq = _first_block_reaching(by_q[q], f_ref)
                if b1 is None or bq is None:
                    excluded += 1
                    continue
                ratios.append(b1 / bq)
            if ratios:
                speedup = float(np.exp(np.mean(np.log(ratios))))
                rows.append(ScalabilityRow(solver=s, q=q, speedup=speedup,
                                           efficiency=speedup / q,
                                           pairs=len(ratios), excluded=excluded))
            else:
                rows.append(ScalabilityRow(solver=s, q=q, speedup=float("nan"),
                                           efficiency=float("nan"),
                                           pairs=0, excluded=excluded))
    return rows


@dataclass
class DistributionRow:
    problem: str
    solver: str
    q: int
    runs: int
    f_min: float
    f_q1: float
    f_median: float
    f_q3: float
    f_max: float
    feasible_runs: int


def distribution_summary(records: Sequence[RunRecord]) -> list[DistributionRow]:
    """Min/quartiles/median/max of final objective per (problem, solver, q)."""
    groups: dict[tuple, list[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.problem, r.solver, r.q), []).append(r)
    rows = []
    for (prob, solver, q), recs in sorted(groups.items()):
        finals = np.array([r.final_f for r in recs])
        feasible = int(sum(1 for r in recs if r.final_h == 0.0))
        finite = finals[np.isfinite(finals)]

        def _pct(p: float) -> float:
            if np.all(np.isfinite(finals)):
                return float(np.percentile(finals, p))
            # infinities poison interpolation; fall back to order statistics
            srt = np.sort(finals)
            k = min(int(np.ceil(p / 100.0 * finals.size)) - 1, finals.size - 1)
            return float(srt[max(k, 0)])

        rows.append(DistributionRow(
            problem=prob, solver=solver, q=q, runs=len(recs),
            f_min=float(finite.min()) if finite.size else INF,
            f_q1=_pct(25.0), f_median=_pct(50.0), f_q3=_pct(75.0),
            f_max=float(finals.max()),
            feasible_runs=feasible))
    return rows
