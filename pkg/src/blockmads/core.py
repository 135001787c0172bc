"""Domain types shared by every module: points, evaluations, caches,
constraint aggregation, the (h, f) order, and set distances.

Feasibility is handled through the aggregate violation
``h(x) = sum_j max(0, c_j(x))^2`` and the lexicographic order on (h, f):
a point precedes another when it is less infeasible, or equally infeasible
and lower in objective.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

INF = float("inf")


class EvalTag(enum.Enum):
    TRUE_EVAL = "true"
    SURROGATE_EVAL = "surrogate"


def aggregate_violation(c) -> float:
    """Aggregate constraint violation sum_j max(0, c_j)^2.

    Returns 0 iff every constraint is satisfied. Any non-finite entry marks
    the evaluation as failed and yields +inf.
    """
    c = np.asarray(c, dtype=float)
    if c.size == 0:
        return 0.0
    if not np.all(np.isfinite(c)):
        return INF
    v = np.maximum(0.0, c)
    return float(np.dot(v, v))


@dataclass(frozen=True)
class Evaluation:
    """One blackbox (or surrogate) evaluation of a design vector.

    Failed evaluations carry f = h = +inf and c = None so they are cached
    and never re-evaluated.
    """

    x: np.ndarray
    f: float
    c: Optional[np.ndarray]
    h: float
    tag: EvalTag = EvalTag.TRUE_EVAL

    @staticmethod
    def from_outputs(x, f, c, tag: EvalTag = EvalTag.TRUE_EVAL) -> "Evaluation":
        """Build an evaluation, deriving h and normalizing failures."""
        x = np.asarray(x, dtype=float)
        c_arr = None if c is None else np.asarray(c, dtype=float)
        try:
            f_val = float(f)
        except (TypeError, ValueError):
            f_val = INF
        failed = not math.isfinite(f_val)
        if c_arr is not None and not np.all(np.isfinite(c_arr)):
            failed = True
        if failed:
            return Evaluation(x=x, f=INF, c=None, h=INF, tag=tag)
        h = aggregate_violation(c_arr) if c_arr is not None else 0.0
        return Evaluation(x=x, f=f_val, c=c_arr, h=h, tag=tag)

    @property
    def feasible(self) -> bool:
        return self.h == 0.0

    @property
    def failed(self) -> bool:
        return self.f == INF and self.h == INF


#: Sentinel for the worst possible candidate: h = f = +inf and zero distance
#: to the evaluated set. Any evaluation with finite outputs strictly
#: precedes it.
VIRTUAL_WORST = Evaluation(x=np.empty(0), f=INF, c=None, h=INF, tag=EvalTag.SURROGATE_EVAL)


def precedes_keys(h_a: float, f_a: float, h_b: float, f_b: float) -> bool:
    """Strict order on (h, f) pairs: dominance in h, then in f."""
    return h_a < h_b or (h_a == h_b and f_a < f_b)


def precedes(a: Evaluation, b: Evaluation) -> bool:
    """True iff a strictly precedes b under the (h, f) order."""
    return precedes_keys(a.h, a.f, b.h, b.f)


def precedes_eq(a: Evaluation, b: Evaluation) -> bool:
    """Non-strict companion order: not (b precedes a). A total preorder,
    deliberately not antisymmetric."""
    return not precedes(b, a)


def coord_key(x: np.ndarray) -> bytes:
    """Bitwise coordinate key used for exact cache deduplication.

    Adding 0.0 canonicalizes -0.0 so mesh arithmetic cannot split one
    physical point into two keys.
    """
    return (np.ascontiguousarray(x, dtype=float) + 0.0).tobytes()


class Cache:
    """Insertion-ordered set of evaluations with exact-coordinate lookup.

    No two entries share identical coordinates (bitwise on the float64
    representation; mesh projection reproduces coordinates exactly, so no
    epsilon is involved). Reads may happen concurrently; writes occur only
    at block boundaries from the owning run.
    """

    def __init__(self) -> None:
        self.entries: list[Evaluation] = []
        self._index: dict[bytes, int] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Evaluation]:
        return iter(self.entries)

    def contains(self, x) -> bool:
        return coord_key(np.asarray(x, dtype=float)) in self._index

    def lookup(self, x) -> Optional[Evaluation]:
        i = self._index.get(coord_key(np.asarray(x, dtype=float)))
        return None if i is None else self.entries[i]

    def add(self, ev: Evaluation) -> bool:
        """Insert; returns False (and keeps the original) on duplicate."""
        key = coord_key(ev.x)
        if key in self._index:
            return False
        self._index[key] = len(self.entries)
        self.entries.append(ev)
        return True

    def coords(self) -> np.ndarray:
        """All coordinates stacked in insertion order, shape (k, n)."""
        if not self.entries:
            return np.empty((0, 0))
        return np.stack([e.x for e in self.entries])

    def keys(self) -> set[bytes]:
        return set(self._index.keys())


def set_distance(a, b) -> float:
    """Euclidean distance between two point sets; +inf if either is empty."""
    a = np.atleast_2d(np.asarray(a, dtype=float)) if len(a) else np.empty((0, 0))
    b = np.atleast_2d(np.asarray(b, dtype=float)) if len(b) else np.empty((0, 0))
    if a.shape[0] == 0 or b.shape[0] == 0:
        return INF
    diff = a[:, None, :] - b[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    return float(np.sqrt(d2.min()))


@dataclass
class ProblemSpec:
    """A constrained blackbox problem min f(x) s.t. c_j(x) <= 0.

    ``evaluator`` maps a point to (f, c) and may raise or return non-finite
    values; such calls are recorded as failed evaluations.
    """

    n: int
    m: int
    lower: np.ndarray
    upper: np.ndarray
    evaluator: Callable[[np.ndarray], tuple]
    integer_mask: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.m < 0:
            raise ValueError("m must be >= 0")
        if self.lower.shape != (self.n,) or self.upper.shape != (self.n,):
            raise ValueError("bound vectors must have shape (n,)")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bounds must not exceed upper bounds")
        if self.integer_mask is None:
            self.integer_mask = np.zeros(self.n, dtype=bool)
        else:
            self.integer_mask = np.asarray(self.integer_mask, dtype=bool)
