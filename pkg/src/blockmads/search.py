"""The surrogate-driven search step: fit a LOWESS model on the true cache,
solve the surrogate subproblem, then greedily select a block of candidates
from the surrogate cache."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .core import coord_key
from .engine import MadsEngine, SearchStrategy
from .inner import SearchConfig, solve_surrogate
from .lowess import FitError, fit
from .mesh import project_to_mesh
from .selection import SelectionContext, SelectionState, cycle_select


class SurrogateSearch(SearchStrategy):
    """SEARCH step built on one multi-output surrogate per problem.

    ``method_cycle`` picks the selection flavor: (1, 2) cycles the
    surrogate-best and max-distance methods; (3, 4, 5, 6) cycles the
    distance-floor, feasibility-margin, isolation and density methods.
    """

    def __init__(self, method_cycle: Sequence[int], config: Optional[SearchConfig] = None) -> None:
        self.config = config if config is not None else SearchConfig(method_cycle=tuple(method_cycle))
        self.model = None
        self.prev_bests: tuple[Optional[np.ndarray], Optional[np.ndarray]] = (None, None)

    def propose(self, engine: MadsEngine, iteration: int) -> tuple[list[np.ndarray], list[dict]]:
        self.model = None
        x, y = engine.training_arrays()
        n = engine.problem.n
        if x.shape[0] < n + 2:
            return [], []
        try:
            self.model = fit(x, y)
        except FitError:
            return [], []

        view, self.prev_bests = solve_surrogate(
            self.model, n, engine.problem.m, engine.incumbents, self.prev_bests,
            self.config, engine.seed, iteration,
            delta_poll_init=engine.config.delta_poll_init)
        if len(view) == 0:
            return [], []

        ctx = SelectionContext(view, engine.cache.coords(), engine.cache.keys(),
                               engine.mesh.delta_mesh)
        picks = cycle_select(ctx, engine.config.q, self.config.method_cycle, SelectionState())

        points: list[np.ndarray] = []
        metas: list[dict] = []
        seen = engine.cache.keys()
        for idx, method_id in picks:
            cand = project_to_mesh(view.coords[idx], engine.mesh, engine.problem.lower_s,
                                   engine.problem.upper_s, engine.problem.integer_scale)
            key = coord_key(cand)
            if key in seen:
                continue  # projection collision: the later selection is dropped
            seen.add(key)
            points.append(cand)
            metas.append({
                "method": method_id,
                "fhat": float(view.fhat[idx]),
                "hhat": float(view.hhat[idx]),
            })
        return points, metas
