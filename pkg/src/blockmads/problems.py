"""Analytic engineering design benchmarks and starting-point sampling.

Three classic constrained problems from the engineering-design benchmark
literature, each transcribed in c_j(x) <= 0 form and validated against its
published best-known solution: a tension/compression spring, a pressure
vessel, and a welded beam (Version I).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ProblemSpec


# --------------------------------------------------------------------- TCSD
def eval_tcsd(x) -> tuple[float, np.ndarray]:
    """Tension/compression spring: minimize weight subject to shear stress,
    surge frequency, deflection and diameter limits.

    Variables: wire diameter, mean coil diameter, number of active coils.
    """
    d, dm, n = float(x[0]), float(x[1]), float(x[2])
    f = (n + 2.0) * dm * d * d
    g1 = 1.0 - (dm ** 3 * n) / (71785.0 * d ** 4)
    g2 = (4.0 * dm * dm - d * dm) / (12566.0 * (dm * d ** 3 - d ** 4)) \
        + 1.0 / (5108.0 * d * d) - 1.0
    g3 = 1.0 - 140.45 * d / (dm * dm * n)
    g4 = (dm + d) / 1.5 - 1.0
    return f, np.array([g1, g2, g3, g4])


# ------------------------------------------------------------------- Vessel
def eval_vessel(x) -> tuple[float, np.ndarray]:
    """Pressure vessel: minimize total cost subject to shell/head thickness
    rules, a minimum volume, and a length limit. All variables continuous.

    Variables: shell thickness, head thickness, inner radius, length.
    """
    ts, th, r, length = (float(v) for v in x)
    f = (0.6224 * ts * r * length + 1.7781 * th * r * r
         + 3.1661 * ts * ts * length + 19.84 * ts * ts * r)
    g1 = -ts + 0.0193 * r
    g2 = -th + 0.00954 * r
    g3 = -math.pi * r * r * length - (4.0 / 3.0) * math.pi * r ** 3 + 1296000.0
    g4 = length - 240.0
    return f, np.array([g1, g2, g3, g4])


# ------------------------------------------------------------------- Welded
_WELDED_P = 6000.0
_WELDED_L = 14.0
_WELDED_E = 30e6
_WELDED_G = 12e6


def eval_welded(x) -> tuple[float, np.ndarray]:
    """Welded beam (Version I): minimize fabrication cost subject to shear
    stress, bending stress, geometry, cost, deflection and buckling limits.

    Variables: weld thickness, weld length, beam height, beam thickness.
    The buckling load uses the sqrt(E*G) form and the polar moment
    J = sqrt(2) h l (l^2/12 + ((h+t)/2)^2); these pin the variant whose
    constrained optimum is 2.38096.
    """
    h, l, t, b = (float(v) for v in x)
    p, big_l, e, g = _WELDED_P, _WELDED_L, _WELDED_E, _WELDED_G
    tau1 = p / (math.sqrt(2.0) * h * l)
    moment = p * (big_l + l / 2.0)
    r = math.sqrt(l * l / 4.0 + ((h + t) / 2.0) ** 2)
    j = math.sqrt(2.0) * h * l * (l * l / 12.0 + ((h + t) / 2.0) ** 2)
    tau2 = moment * r / j
    tau = math.sqrt(tau1 * tau1 + tau1 * tau2 * l / r + tau2 * tau2)
    sigma = 6.0 * p * big_l / (b * t * t)
    delta = 4.0 * p * big_l ** 3 / (e * t ** 3 * b)
    p_crit = (4.013 * math.sqrt(e * g * t * t * b ** 6 / 36.0) / (big_l * big_l)
              * (1.0 - t / (2.0 * big_l) * math.sqrt(e / (4.0 * g))))
    f = 1.10471 * h * h * l + 0.04811 * t * b * (14.0 + l)
    c = np.array([
        tau - 13600.0,
        sigma - 30000.0,
        h - b,
        0.10471 * h * h + 0.04811 * t * b * (14.0 + l) - 5.0,
        delta - 0.25,
        p - p_crit,
    ])
    return f, c


# ------------------------------------------------------------------ catalog
@dataclass(frozen=True)
class ProblemCatalogEntry:
    name: str
    spec: ProblemSpec
    best_known_f: float
    best_known_x: np.ndarray


def _make_catalog() -> dict[str, ProblemCatalogEntry]:
    entries = [
        ProblemCatalogEntry(
            name="tcsd",
            spec=ProblemSpec(
                n=3, m=4,
                lower=np.array([0.05, 0.25, 2.0]),
                upper=np.array([2.0, 1.3, 15.0]),
                evaluator=eval_tcsd),
            best_known_f=0.0126652,
            best_known_x=np.array([0.051686696913218, 0.356660815351066,
                                   11.292312882259289])),
        ProblemCatalogEntry(
            name="vessel",
            spec=ProblemSpec(
                n=4, m=4,
                lower=np.array([0.0625, 0.0625, 10.0, 10.0]),
                upper=np.array([6.1875, 6.1875, 200.0, 200.0]),
                evaluator=eval_vessel),
            best_known_f=5885.332,
            best_known_x=np.array([0.778168641330718, 0.384649162605973,
                                   40.319618721803231, 199.999999998822659])),
        ProblemCatalogEntry(
            name="welded",
            spec=ProblemSpec(
                n=4, m=6,
                lower=np.array([0.1, 0.1, 0.1, 0.1]),
                upper=np.array([2.0, 10.0, 10.0, 2.0]),
                evaluator=eval_welded),
            best_known_f=2.38096,
            best_known_x=np.array([0.244368407428265, 6.217496713101864,
                                   8.291517255567012, 0.244368666449562])),
    ]
    return {e.name: e for e in entries}


CATALOG = _make_catalog()


def get_problem(name: str) -> ProblemCatalogEntry:
    try:
        return CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(CATALOG)}") from None


# ----------------------------------------------------------------- sampling
def lhs_unit(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """Latin hypercube sample on the unit box: per coordinate, exactly one
    point in each of the ``count`` strata."""
    if count < 1:
        return np.empty((0, n))
    out = np.empty((count, n))
    for j in range(n):
        perm = rng.permutation(count)
        out[:, j] = (perm + rng.random(count)) / count
    return out


def lhs_sample(lower, upper, count: int, rng: np.random.Generator) -> np.ndarray:
    """Latin hypercube sample within finite bounds."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ValueError("lhs_sample requires finite bounds")
    unit = lhs_unit(rng, count, lower.size)
    return lower + unit * (upper - lower)
