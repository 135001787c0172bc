"""Solving the surrogate subproblem with an inner direct search.

The surrogate cache is populated in three phases sharing one evaluation
budget: a Latin hypercube sweep, neighborhood-restart descents (the
diversification share), and plain polling at the inner incumbent. Up to
four seed points join the cache: the true problem's incumbents and the
bests of the previous surrogate solve. Every point is evaluated with the
surrogate only; prediction failures enter the cache as worst-possible
entries.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import rng as rngmod
from .core import INF, coord_key, precedes_keys
from .engine import Incumbents
from .lowess import LowessModel, _violation_rows
from .mesh import MeshState, initial_mesh, poll_directions, project_to_mesh, update_mesh
from .selection import SurrogateCacheView

#: Hard cap on the surrogate cache size.
XHAT_CAP = 13000

#: VNS perturbation radii cycle these multiples of the inner poll size.
_VNS_RADIUS_CYCLE = (1, 2, 3, 4, 5)


@dataclass
class SearchConfig:
    """Budget split of the inner solve and the selection-method cycle."""

    inner_budget: int = 10000
    lhs_fraction: float = 0.30
    vns_fraction: float = 0.75
    method_cycle: tuple[int, ...] = (3, 4, 5, 6)

    def __post_init__(self) -> None:
        if not (0.0 <= self.lhs_fraction <= 1.0 and 0.0 <= self.vns_fraction <= 1.0):
            raise ValueError("fractions must lie in [0, 1]")
        if not self.method_cycle:
            raise ValueError("method_cycle must be nonempty")

    def budgets(self) -> tuple[int, int, int]:
        """(lhs, vns, poll) evaluation budgets."""
        n_lhs = round(self.inner_budget * self.lhs_fraction)
        rem = self.inner_budget - n_lhs
        n_vns = round(rem * self.vns_fraction)
        return n_lhs, n_vns, rem - n_vns


class _InnerCache:
    """Growable surrogate cache with exact-coordinate dedup and a running
    incumbent under the surrogate (h, f) order."""

    def __init__(self, model: LowessModel, n: int, m: int, cap: int = XHAT_CAP) -> None:
        self.model = model
        self.n = n
        self.m = m
        self.cap = cap
        self.coords: list[np.ndarray] = []
        self.fhat: list[float] = []
        self.hhat: list[float] = []
        self.cmax: list[float] = []
        self._index: dict[bytes, int] = {}
        self.best_idx: Optional[int] = None

    def __len__(self) -> int:
        return len(self.coords)

    def add_batch(self, pts: np.ndarray) -> list[int]:
        """Insert points (deduplicated), predicting new ones in one batch.

        Returns the cache index of every input point in order.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out: list[int] = []
        fresh_rows: list[int] = []
        fresh_pts: list[np.ndarray] = []
        for row in pts:
            key = coord_key(row)
            idx = self._index.get(key)
            if idx is None:
                if len(self.coords) + len(fresh_pts) >= self.cap:
                    out.append(-1)
                    continue
                idx = len(self.coords) + len(fresh_pts)
                self._index[key] = idx
                fresh_rows.append(idx)
                fresh_pts.append(row)
            out.append(idx)
        if fresh_pts:
            batch = np.stack(fresh_pts)
            pred, ok = self.model.predict_batch(batch, refine=False)
            if self.m:
                h = _violation_rows(pred[:, 1:])
                cm = np.max(pred[:, 1:], axis=1)
            else:
                h = np.zeros(len(fresh_pts))
                cm = np.full(len(fresh_pts), -INF)
            f = pred[:, 0].copy()
            f[~ok] = INF
            h = np.where(ok, h, INF)
            cm = np.where(ok, cm, INF)
            for j, row in enumerate(fresh_pts):
                self.coords.append(row)
                self.fhat.append(float(f[j]))
                self.hhat.append(float(h[j]))
                self.cmax.append(float(cm[j]))
                i = fresh_rows[j]
                if self.best_idx is None or precedes_keys(
                        self.hhat[i], self.fhat[i],
                        self.hhat[self.best_idx], self.fhat[self.best_idx]):
                    self.best_idx = i
        return out

    def key(self, i: int) -> tuple[float, float]:
        return self.hhat[i], self.fhat[i]

    def view(self) -> SurrogateCacheView:
        coords = np.stack(self.coords) if self.coords else np.empty((0, self.n))
        return SurrogateCacheView(coords, np.array(self.fhat), np.array(self.hhat),
                                  np.array(self.cmax))

    def bests(self) -> tuple[Optional[np.ndarray], Optional[np.ndarray]]:
        """(best feasible, best infeasible) points under the surrogate order."""
        h = np.array(self.hhat)
        f = np.array(self.fhat)
        bf = bi = None
        feas = h == 0.0
        if feas.any():
            idx = np.nonzero(feas)[0]
            bf = self.coords[int(idx[np.argmin(f[idx])])]
        infeas = (h > 0.0) & (h < INF)
        if infeas.any():
            idx = np.nonzero(infeas)[0]
            order = np.lexsort((f[idx], h[idx]))
            bi = self.coords[int(idx[order[0]])]
        return bf, bi


def _ball_point(rng: np.random.Generator, center: np.ndarray, radius: float) -> np.ndarray:
    """Uniform draw from the ball of the given radius around center."""
    n = center.size
    while True:
        direction = rng.standard_normal(n)
        norm = np.linalg.norm(direction)
        if norm > 1e-12:
            break
    r = radius * rng.random() ** (1.0 / n)
    return center + (r / norm) * direction


def _descend(cache: _InnerCache, start_idx: int, mesh: MeshState, rng: np.random.Generator,
             budget: int, lower: np.ndarray, upper: np.ndarray) -> int:
    """Plain poll descent from a start point until one poll round fails to
    improve the chain; returns the budget left."""
    current = start_idx
    while budget > 0:
        local_mesh = replace(mesh, anchor=cache.coords[current])
        cands = poll_directions(local_mesh, rng, lower, upper)[:budget]
        if not cands:
            break
        budget -= len(cands)
        idxs = [i for i in cache.add_batch(np.stack(cands)) if i >= 0]
        if not idxs:
            break
        best = min(idxs, key=lambda i: cache.key(i))
        if precedes_keys(*cache.key(best), *cache.key(current)):
            current = best
        else:
            break
    return budget


def solve_surrogate(model: LowessModel, n: int, m: int, incumbents: Incumbents,
                    last_surrogate_bests: tuple[Optional[np.ndarray], Optional[np.ndarray]],
                    config: SearchConfig, seed: int, iteration: int,
                    delta_poll_init: float = 0.1,
                    ) -> tuple[SurrogateCacheView, tuple[Optional[np.ndarray], Optional[np.ndarray]]]:
    """Populate the surrogate cache by LHS plus an inner direct search.

    Returns the cache view (in insertion order) and the best
    feasible/infeasible surrogate points for seeding the next solve.
    """
    from .problems import lhs_unit

    lower = np.zeros(n)
    upper = np.ones(n)
    n_lhs, vns_budget, poll_budget = config.budgets()
    cache = _InnerCache(model, n, m)

    gen_lhs = rngmod.substream(seed, rngmod.INNER_LHS, iteration)
    if n_lhs > 0:
        cache.add_batch(lhs_unit(gen_lhs, n_lhs, n))

    seeds = []
    if incumbents.best_feasible is not None:
        seeds.append(incumbents.best_feasible.x)
    if incumbents.best_infeasible is not None:
        seeds.append(incumbents.best_infeasible.x)
    for p in last_surrogate_bests:
        if p is not None:
            seeds.append(p)
    if seeds:
        cache.add_batch(np.stack(seeds))
    if len(cache) == 0:
        return cache.view(), (None, None)

    gen_vns = rngmod.substream(seed, rngmod.INNER_VNS, iteration)
    gen_poll = rngmod.substream(seed, rngmod.INNER_POLL, iteration)
    mesh = initial_mesh(cache.coords[cache.best_idx], delta_poll_init)
    radius_pos = 0

    while vns_budget > 0 or poll_budget > 0:
        best_before = cache.best_idx
        if vns_budget > 0:
            # perturbation radii scale with the fixed initial poll size, not
            # the decaying inner mesh: restarts must keep reaching other
            # attraction basins even after the inner incumbent settles
            radius = _VNS_RADIUS_CYCLE[radius_pos % len(_VNS_RADIUS_CYCLE)] * delta_poll_init
            radius_pos += 1
            center = cache.coords[cache.best_idx]
            y0 = project_to_mesh(_ball_point(gen_vns, center, radius), mesh, lower, upper)
            vns_budget -= 1
            start = cache.add_batch(y0[None, :])[0]
            if start >= 0:
                vns_budget = _descend(cache, start, mesh, gen_vns, vns_budget, lower, upper)
        success = cache.best_idx != best_before
        poll_success = False
        if not success and poll_budget > 0:
            local_mesh = replace(mesh, anchor=cache.coords[cache.best_idx])
            cands = poll_directions(local_mesh, gen_poll, lower, upper)[:poll_budget]
            if cands:
                poll_budget -= len(cands)
                cache.add_batch(np.stack(cands))
            poll_success = cache.best_idx != best_before
            success = poll_success
        mesh = update_mesh(mesh, success, from_full_poll=poll_success)
        if mesh.underflow():
            mesh = initial_mesh(cache.coords[cache.best_idx], delta_poll_init)
    return cache.view(), cache.bests()
