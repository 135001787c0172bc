"""Greedy candidate selection from the surrogate cache.

Six methods pick points from the surrogate cache, each with its own goal:
the surrogate-best point, the most distant point, the best point beyond a
growing distance floor, the best safely-feasible point, the most isolated
local minimum, and the most densely surrounded neglected point. A cycle
over a configured subset fills a block of q candidates, stopping early when
every method in the cycle fails consecutively.

All ties break to the earliest surrogate-cache entry, matching the strict
comparisons of the reference loops. Squared distances come from cdist's
elementwise kernel, which is bitwise-identical to a direct difference
computation, so coincident points are at distance exactly zero and
duplicate handling needs no tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .core import INF, coord_key

_CHUNK = 2048


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return cdist(np.atleast_2d(a), np.atleast_2d(b), "sqeuclidean")


@dataclass
class SelectionState:
    """Cursors of the stateful methods, reset at each outer iteration."""

    d_min: float = 0.0
    c_margin: float = 0.0
    m3_initialized: bool = False
    m4_initialized: bool = False


class SurrogateCacheView:
    """Immutable view of the surrogate cache for one outer iteration."""

    def __init__(self, coords: np.ndarray, fhat: np.ndarray, hhat: np.ndarray,
                 cmax: np.ndarray) -> None:
        self.coords = np.ascontiguousarray(coords, dtype=float)
        self.fhat = np.asarray(fhat, dtype=float)
        self.hhat = np.asarray(hhat, dtype=float)
        self.cmax = np.asarray(cmax, dtype=float)
        self.keys = [coord_key(row) for row in self.coords]

    def __len__(self) -> int:
        return self.coords.shape[0]


class SelectionContext:
    """Tracks S, the distances to X union S, and the per-iteration caches
    behind the isolation and density criteria."""

    def __init__(self, view: SurrogateCacheView, x_coords: np.ndarray,
                 x_keys: set[bytes], delta_mesh: float) -> None:
        self.view = view
        self.delta_mesh = float(delta_mesh)
        self.selected: list[int] = []
        n_pts = len(view)
        self.in_xs = np.array([k in x_keys for k in view.keys], dtype=bool)
        self.d2_xs = np.full(n_pts, INF)
        x_coords = np.atleast_2d(np.asarray(x_coords, dtype=float))
        if x_coords.size and n_pts:
            for s in range(0, n_pts, _CHUNK):
                block = _sq_dists(view.coords[s:s + _CHUNK], x_coords)
                self.d2_xs[s:s + _CHUNK] = block.min(axis=1)
        self.d2_xs[self.in_xs] = 0.0
        self.d_xs = np.sqrt(self.d2_xs)
        self._rank: Optional[np.ndarray] = None
        self._n_iso: Optional[np.ndarray] = None
        self._iso_bound: Optional[np.ndarray] = None
        self._iso_fresh: Optional[np.ndarray] = None
        self._density_bound: Optional[np.ndarray] = None
        self._density_fresh: Optional[np.ndarray] = None

    # ------------------------------------------------------------- mutation
    def select(self, i: int) -> None:
        """Add surrogate point i to S and refresh the distance tracker.

        Density counts only shrink when S grows, so existing counts stay
        valid as upper bounds; rows whose distance shrank are merely marked
        stale for lazy re-evaluation.
        """
        col = _sq_dists(self.view.coords, self.view.coords[i][None, :])[:, 0]
        col[i] = 0.0
        shrunk = col < self.d2_xs
        shrunk[i] = True
        self.in_xs[i] = True
        np.minimum(self.d2_xs, col, out=self.d2_xs)
        self.d2_xs[i] = 0.0
        self.d_xs = np.sqrt(self.d2_xs)
        if self._density_fresh is not None:
            self._density_fresh &= ~shrunk
            self._density_bound[i] = 0
        self.selected.append(i)

    # -------------------------------------------------------------- ranking
    def rank(self) -> np.ndarray:
        """Dense rank of the strict surrogate (h, f) order: rank r points
        are strictly preceded exactly by the points of ranks < r."""
        if self._rank is None:
            v = self.view
            n_pts = len(v)
            order = np.lexsort((v.fhat, v.hhat))
            hs, fs = v.hhat[order], v.fhat[order]
            new_group = np.empty(n_pts, dtype=bool)
            new_group[0] = True
            new_group[1:] = (hs[1:] != hs[:-1]) | (fs[1:] != fs[:-1])
            rank = np.empty(n_pts, dtype=np.int64)
            rank[order] = np.cumsum(new_group) - 1
            self._rank = rank
        return self._rank

    # ------------------------------------------------------- lazy criteria
    def n_iso(self) -> np.ndarray:
        """Isolation numbers over the surrogate cache (independent of S):
        for each point, how many cache points lie strictly closer than the
        nearest strictly better point."""
        if self._n_iso is not None:
            return self._n_iso
        v = self.view
        n_pts = len(v)
        rank = self.rank()
        order = np.lexsort((v.fhat, v.hhat))
        group_start = np.empty(n_pts, dtype=np.int64)
        rank_sorted = rank[order]
        starts_sorted = np.nonzero(np.r_[True, rank_sorted[1:] != rank_sorted[:-1]])[0]
        group_start = starts_sorted[rank_sorted]
        coords_sorted = np.ascontiguousarray(v.coords[order])

        n_iso_sorted = np.empty(n_pts, dtype=np.int64)
        for s in range(0, n_pts, _CHUNK):
            e = min(s + _CHUNK, n_pts)
            rows = np.arange(s, e)
            gs = group_start[rows]
            d2 = _sq_dists(coords_sorted[rows], coords_sorted)
            d2[rows - s, rows] = 0.0
            d_iso2 = np.full(rows.size, INF)
            # rows whose tie group began before this chunk share one start
            lead = int(np.count_nonzero(gs < s))
            if lead:
                g0 = int(gs[0])
                if g0 > 0:
                    d_iso2[:lead] = d2[:lead, :g0].min(axis=1)
            if lead < rows.size:
                if s > 0:
                    d_iso2[lead:] = d2[lead:, :s].min(axis=1)
                acc = np.minimum.accumulate(
                    np.ascontiguousarray(d2[lead:, s:e]), axis=1)
                off = gs[lead:] - s
                has_within = off > 0
                if has_within.any():
                    take = acc[np.arange(lead, rows.size)[has_within] - lead,
                               off[has_within] - 1]
                    d_iso2[lead:][has_within] = np.minimum(
                        d_iso2[lead:][has_within], take)
            n_iso_sorted[rows] = (d2 < d_iso2[:, None]).sum(axis=1)
        niso = np.empty(n_pts, dtype=np.int64)
        niso[order] = n_iso_sorted
        self._n_iso = niso
        return niso

    # ---- lazy isolation argmax: n_iso does not depend on S, so bounds and
    # ---- exact values stay valid for the whole iteration
    def _exact_iso_rows(self, rows: np.ndarray) -> None:
        v = self.view
        rank = self.rank()
        for s in range(0, rows.size, _CHUNK):
            chunk = rows[s:s + _CHUNK]
            d2 = _sq_dists(v.coords[chunk], v.coords)
            d2[np.arange(chunk.size), chunk] = 0.0
            better = rank[None, :] < rank[chunk][:, None]
            d_iso2 = np.where(better, d2, INF).min(axis=1)
            self._iso_bound[chunk] = (d2 < d_iso2[:, None]).sum(axis=1)
        self._iso_fresh[rows] = True

    def _init_iso_bounds(self) -> None:
        v = self.view
        n_pts = len(v)
        rank = self.rank()
        order = np.lexsort((v.fhat, v.hhat))
        top = order[: min(64, n_pts)]
        d2_top = _sq_dists(v.coords, v.coords[top])
        better = rank[top][None, :] < rank[:, None]
        with np.errstate(invalid="ignore"):
            rad2 = np.where(better, d2_top, INF).min(axis=1)
        bound = np.full(n_pts, n_pts, dtype=np.int64)
        fresh = np.zeros(n_pts, dtype=bool)
        finite = np.isfinite(rad2)
        if finite.any():
            tree = cKDTree(v.coords)
            radii = np.sqrt(rad2[finite]) * (1.0 + 4e-16) + 1e-300
            bound[finite] = tree.query_ball_point(v.coords[finite], radii,
                                                  return_length=True)
        # rows without any strictly better point have isolation distance
        # +inf and exactly n_pts within it
        fresh[rank == 0] = True
        self._iso_bound = bound
        self._iso_fresh = fresh

    def iso_argmax(self, mask: np.ndarray) -> Optional[int]:
        """First index maximizing the isolation number under the mask."""
        if self._n_iso is not None:
            idx = np.nonzero(mask)[0]
            if idx.size == 0:
                return None
            nm = self._n_iso[idx]
            nmax = nm.max()
            return int(idx[nm == nmax][0]) if nmax > 0 else None
        if self._iso_bound is None:
            self._init_iso_bounds()
        bound, fresh = self._iso_bound, self._iso_fresh
        idx = np.nonzero(mask)[0]
        if idx.size == 0:
            return None
        singles = 0
        while True:
            sub = np.argmax(bound[idx])
            i = int(idx[sub])
            if bound[i] <= 0:
                return None
            if fresh[i]:
                return i
            singles += 1
            if singles <= 3:
                self._exact_iso_rows(np.array([i]))
                continue
            fresh_masked = idx[fresh[idx]]
            best_fresh = int(bound[fresh_masked].max()) if fresh_masked.size else 0
            contenders = idx[~fresh[idx] & (bound[idx] >= best_fresh)]
            self._exact_iso_rows(contenders)

    def _recount_density_rows(self, rows: np.ndarray) -> None:
        """Exact density counts for the given rows under the current
        X union S; updates bounds in place and marks the rows fresh."""
        v = self.view
        for s in range(0, rows.size, _CHUNK):
            chunk = rows[s:s + _CHUNK]
            d2 = _sq_dists(v.coords[chunk], v.coords)
            d2[np.arange(chunk.size), chunk] = 0.0
            counts = (d2 < self.d2_xs[chunk][:, None]).sum(axis=1)
            self._density_bound[chunk] = counts
        self._density_bound[rows[self.d2_xs[rows] <= 0.0]] = 0
        self._density_fresh[rows] = True

    def density_argmax(self) -> tuple[Optional[int], int]:
        """First index maximizing the density number, lazily.

        Closed-ball counts from a KD-tree (with a rounding-safe radius
        inflation) give valid upper bounds; stale rows are re-counted
        exactly one bound tier at a time until the champion is exact, which
        preserves the first-wins tie break of a direct argmax.
        """
        v = self.view
        n_pts = len(v)
        if n_pts == 0:
            return None, 0
        if self._density_bound is None:
            tree = cKDTree(v.coords)
            finite = np.isfinite(self.d2_xs)
            radii = np.sqrt(self.d2_xs[finite]) * (1.0 + 4e-16) + 1e-300
            counts = np.full(n_pts, n_pts, dtype=np.int64)
            if finite.any():
                counts[finite] = tree.query_ball_point(
                    v.coords[finite], radii, return_length=True)
            self._density_bound = counts
            self._density_fresh = np.zeros(n_pts, dtype=bool)
            zero = self.d2_xs <= 0.0
            counts[zero] = 0
            self._density_fresh[zero] = True
        bound = self._density_bound
        fresh = self._density_fresh
        singles = 0
        while True:
            i = int(np.argmax(bound))
            if bound[i] <= 0:
                return None, 0
            if fresh[i]:
                return i, int(bound[i])
            singles += 1
            if singles <= 3:
                self._recount_density_rows(np.array([i]))
                continue
            fresh_idx = np.nonzero(fresh)[0]
            best_fresh = int(bound[fresh_idx].max()) if fresh_idx.size else 0
            contenders = np.nonzero(~fresh & (bound >= best_fresh))[0]
            self._recount_density_rows(contenders)


def _lex_argmin_hf(h: np.ndarray, f: np.ndarray, mask: np.ndarray) -> Optional[int]:
    """First index minimizing (h, f) under the mask; None when nothing
    strictly precedes the virtual worst candidate."""
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        return None
    hm = h[idx]
    cand = idx[hm == hm.min()]
    fm = f[cand]
    best = int(cand[fm == fm.min()][0])
    if h[best] == INF and f[best] == INF:
        return None
    return best


def select_method1(ctx: SelectionContext, state: SelectionState) -> Optional[int]:
    """Best surrogate point not yet evaluated or selected."""
    return _lex_argmin_hf(ctx.view.hhat, ctx.view.fhat, ctx.d_xs > 0.0)


def select_method2(ctx: SelectionContext, state: SelectionState) -> Optional[int]:
    """Point most distant from the evaluated and selected sets."""
    if len(ctx.view) == 0:
        return None
    i = int(np.argmax(ctx.d_xs))
    if not ctx.d_xs[i] > 0.0:
        return None
    return i


def select_method3(ctx: SelectionContext, state: SelectionState) -> Optional[int]:
    """Best point at least d_min away; the floor then grows by one mesh
    size so later picks cannot collapse onto one node after projection.
    Duplicates (distance zero) are excluded even while d_min is zero."""
    if not state.m3_initialized:
        state.d_min = 0.0
        state.m3_initialized = True
    mask = (ctx.d_xs >= state.d_min) & (ctx.d_xs > 0.0)
    i = _lex_argmin_hf(ctx.view.hhat, ctx.view.fhat, mask)
    if i is None:
        return None
    state.d_min += ctx.delta_mesh
    return i


def select_method4(ctx: SelectionContext, state: SelectionState) -> Optional[int]:
    """Lowest-objective point that the surrogate predicts to be feasible
    with margin; each pick doubles the required margin."""
    if not state.m4_initialized:
        feas = ctx.view.cmax < 0.0
        state.c_margin = min(0.0, float(ctx.view.cmax[feas].max())) if feas.any() else 0.0
        state.m4_initialized = True
    mask = (ctx.view.cmax <= state.c_margin) & (ctx.d_xs > ctx.delta_mesh)
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        return None
    fm = ctx.view.fhat[idx]
    fmin = fm.min()
    if fmin == INF:
        return None
    i = int(idx[fm == fmin][0])
    state.c_margin = 2.0 * float(ctx.view.cmax[i])
    return i


def select_method5(ctx: SelectionContext, state: SelectionState) -> Optional[int]:
    """Most isolated point: argmax of the isolation number among points
    not yet in X union S.

    Points of the top (h, f) group have no better point, hence isolation
    distance +inf and the maximal isolation number (the cache size); while
    such a point remains selectable the argmax needs no distance work.
    """
    mask = ctx.d_xs > 0.0
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        return None
    if ctx._n_iso is None and ctx._iso_bound is None:
        top = idx[ctx.rank()[idx] == 0]
        if top.size:
            return int(top[0])
    return ctx.iso_argmax(mask)


def select_method6(ctx: SelectionContext, state: SelectionState) -> Optional[int]:
    """Point in the most densely surrogate-explored but blackbox-neglected
    area: argmax of the density number."""
    i, count = ctx.density_argmax()
    if i is None or count <= 0:
        return None
    return i


_METHODS = {
    1: select_method1,
    2: select_method2,
    3: select_method3,
    4: select_method4,
    5: select_method5,
    6: select_method6,
}


def cycle_select(ctx: SelectionContext, q: int, method_cycle: Sequence[int],
                 state: Optional[SelectionState] = None) -> list[tuple[int, int]]:
    """Cycle through the methods until q points are selected or every
    method in the cycle has failed consecutively.

    Returns (surrogate index, method id) pairs in selection order; the
    context's selected set is updated in place.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    if not method_cycle:
        raise ValueError("method_cycle must be nonempty")
    state = state if state is not None else SelectionState()
    picks: list[tuple[int, int]] = []
    consecutive_failures = 0
    pos = 0
    n_methods = len(method_cycle)
    while len(picks) < q and consecutive_failures < n_methods:
        mid = method_cycle[pos % n_methods]
        pos += 1
        i = _METHODS[mid](ctx, state)
        if i is None:
            consecutive_failures += 1
        else:
            consecutive_failures = 0
            ctx.select(i)
            picks.append((i, mid))
    return picks
