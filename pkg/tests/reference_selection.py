"""Literal loop translations of the six selection methods, used as the
independent reference the production implementations must match exactly.

Everything here sticks to plain Python loops, explicit Euclidean norms, and
a virtual worst candidate, mirroring the reference pseudocode one line per
line. No code is shared with the production path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INF = float("inf")


@dataclass
class RefState:
    d_min: float = 0.0
    c_margin: float = 0.0
    m3_init: bool = False
    m4_init: bool = False


@dataclass
class RefProblem:
    """Fixture shared by the reference methods: the surrogate cache, the
    evaluated set X, the selected set S (indices into the cache), and the
    mesh size."""

    coords: np.ndarray           # (N, n) surrogate cache points
    fhat: np.ndarray
    hhat: np.ndarray
    cmax: np.ndarray
    x_coords: np.ndarray         # (k, n) evaluated points
    delta_mesh: float
    selected: list[int] = field(default_factory=list)

    def d_to_xs(self, i: int) -> float:
        """Euclidean distance from cache point i to X union S.

        All distances go through the same row-batched norm so that a point
        measured once as part of the cache and once as a selected member
        yields bitwise-identical values.
        """
        best = INF
        if len(self.x_coords):
            best = min(best, float(np.linalg.norm(self.x_coords - self.coords[i], axis=1).min()))
        if self.selected:
            cache_d = self.dists_to_cache(i)
            best = min(best, float(min(cache_d[j] for j in self.selected)))
        return best

    def dists_to_cache(self, i: int) -> np.ndarray:
        return np.linalg.norm(self.coords - self.coords[i], axis=1)

    def prec_hat(self, i: int, j: int) -> bool:
        return self.hhat[i] < self.hhat[j] or (
            self.hhat[i] == self.hhat[j] and self.fhat[i] < self.fhat[j])


def ref_method1(p: RefProblem, state: RefState):
    best = None  # the virtual worst: h = f = +inf, d(., X) = 0
    best_h, best_f = INF, INF
    for i in range(len(p.coords)):
        better = p.hhat[i] < best_h or (p.hhat[i] == best_h and p.fhat[i] < best_f)
        if better and p.d_to_xs(i) > 0.0:
            best, best_h, best_f = i, p.hhat[i], p.fhat[i]
    return best


def ref_method2(p: RefProblem, state: RefState):
    best = None
    best_d = 0.0  # d(virtual worst, X) = 0
    for i in range(len(p.coords)):
        d = p.d_to_xs(i)
        if d > best_d:
            best, best_d = i, d
    return best


def ref_method3(p: RefProblem, state: RefState):
    if not state.m3_init:
        state.d_min = 0.0
        state.m3_init = True
    best = None
    best_h, best_f = INF, INF
    for i in range(len(p.coords)):
        d = p.d_to_xs(i)
        better = p.hhat[i] < best_h or (p.hhat[i] == best_h and p.fhat[i] < best_f)
        if better and d >= state.d_min and d > 0.0:
            best, best_h, best_f = i, p.hhat[i], p.fhat[i]
    if best is not None:
        state.d_min += p.delta_mesh
    return best


def ref_method4(p: RefProblem, state: RefState):
    if not state.m4_init:
        feas = [p.cmax[i] for i in range(len(p.coords)) if p.cmax[i] < 0.0]
        state.c_margin = min(0.0, max(feas)) if feas else 0.0
        state.m4_init = True
    best = None
    best_f = INF
    for i in range(len(p.coords)):
        if (p.cmax[i] <= state.c_margin and p.fhat[i] < best_f
                and p.d_to_xs(i) > p.delta_mesh):
            best, best_f = i, p.fhat[i]
    if best is not None:
        state.c_margin = 2.0 * p.cmax[best]
    return best


def ref_d_iso(p: RefProblem, i: int) -> float:
    better = (p.hhat < p.hhat[i]) | ((p.hhat == p.hhat[i]) & (p.fhat < p.fhat[i]))
    if not better.any():
        return INF
    return float(p.dists_to_cache(i)[better].min())


def ref_n_iso(p: RefProblem, i: int) -> int:
    # independent of S, so safe to memoize per problem instance
    if not hasattr(p, "_n_iso_memo"):
        p._n_iso_memo = {}
    if i not in p._n_iso_memo:
        radius = ref_d_iso(p, i)
        p._n_iso_memo[i] = int(np.count_nonzero(p.dists_to_cache(i) < radius))
    return p._n_iso_memo[i]


def ref_method5(p: RefProblem, state: RefState):
    best = None
    best_n = 0  # n_iso(virtual worst) = 0
    for i in range(len(p.coords)):
        n = ref_n_iso(p, i)
        if n > best_n and p.d_to_xs(i) > 0.0:
            best, best_n = i, n
    return best


def ref_n_density(p: RefProblem, i: int) -> int:
    radius = p.d_to_xs(i)
    return int(np.count_nonzero(p.dists_to_cache(i) < radius))


def ref_method6(p: RefProblem, state: RefState):
    best = None
    best_n = 0  # n_density(virtual worst) = 0
    for i in range(len(p.coords)):
        n = ref_n_density(p, i)
        if n > best_n:
            best, best_n = i, n
    return best


REF_METHODS = {1: ref_method1, 2: ref_method2, 3: ref_method3,
               4: ref_method4, 5: ref_method5, 6: ref_method6}


def ref_cycle_select(p: RefProblem, q: int, cycle, state=None):
    state = state if state is not None else RefState()
    picks = []
    failures = 0
    pos = 0
    while len(picks) < q and failures < len(cycle):
        mid = cycle[pos % len(cycle)]
        pos += 1
        i = REF_METHODS[mid](p, state)
        if i is None:
            failures += 1
        else:
            failures = 0
            p.selected.append(i)
            picks.append((i, mid))
    return picks
