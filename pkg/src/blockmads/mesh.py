"""Mesh state and poll geometry for the direct-search engine.

The engine works in a pre-scaled unit box, so poll and mesh size parameters
are dimensionless fractions of each variable's range. The mesh through the
current anchor is {anchor + delta_mesh * k, k integer} per coordinate, and
poll candidates come from an orthonormal basis built by a Householder
transform of a seeded random unit direction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import coord_key

#: Mesh size below which a run is considered converged.
DELTA_MIN = 1e-13

#: Poll size is capped at the box size in scaled coordinates.
DELTA_POLL_CAP = 1.0


@dataclass(frozen=True)
class MeshState:
    """Mesh/poll size parameters plus the anchor the mesh passes through."""

    delta_mesh: float
    delta_poll: float
    anchor: np.ndarray

    def underflow(self) -> bool:
        return self.delta_mesh < DELTA_MIN


def initial_mesh(anchor: np.ndarray, delta_poll: float = 0.1) -> MeshState:
    """Fresh mesh sized at a fraction of the (unit) box range."""
    dm = min(delta_poll, delta_poll * delta_poll)
    return MeshState(delta_mesh=dm, delta_poll=delta_poll, anchor=np.asarray(anchor, dtype=float))


def update_mesh(mesh: MeshState, success: bool, from_full_poll: bool = False) -> MeshState:
    """Coarsen on success (poll size doubles only for a full-distance poll
    success), refine on failure; delta_poll >= delta_mesh is preserved and
    the mesh also respects the standard square relation
    delta_mesh <= min(delta_poll, delta_poll^2), which keeps projection fine
    enough for the search step to place candidates precisely."""
    if success:
        dp = min(2.0 * mesh.delta_poll, DELTA_POLL_CAP) if from_full_poll else mesh.delta_poll
        dm = min(mesh.delta_mesh * 4.0, dp, dp * dp)
    else:
        dp = mesh.delta_poll / 2.0
        dm = min(mesh.delta_mesh / 4.0, dp, dp * dp)
    return replace(mesh, delta_mesh=dm, delta_poll=dp)


def project_to_mesh(x, mesh: MeshState, lower, upper,
                    integer_scale: Optional[np.ndarray] = None) -> np.ndarray:
    """Snap each coordinate to the nearest mesh node, then clamp onto the
    largest mesh node inside the bounds. Accepts a point or a stack of
    points (rows).

    ``integer_scale[i] > 0`` marks variable i as integral in the original
    space with that many integer steps per unit of scaled range; such
    coordinates are rounded onto integer-representable values once the mesh
    is at least that fine.
    """
    x = np.asarray(x, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    dm = mesh.delta_mesh
    anchor = mesh.anchor
    k = np.rint((x - anchor) / dm)
    snapped = anchor + k * dm + 0.0
    over = snapped > upper
    if over.any():
        k_hi = np.floor((np.broadcast_to(upper, snapped.shape) - anchor) / dm)
        snapped = np.where(over, anchor + k_hi * dm, snapped)
        while np.any(snapped > upper):
            k_hi = k_hi - 1.0
            snapped = np.where(snapped > upper, anchor + k_hi * dm, snapped)
    under = snapped < lower
    if under.any():
        k_lo = np.ceil((np.broadcast_to(lower, snapped.shape) - anchor) / dm)
        snapped = np.where(under, anchor + k_lo * dm, snapped)
        while np.any(snapped < lower):
            k_lo = k_lo + 1.0
            snapped = np.where(snapped < lower, anchor + k_lo * dm, snapped)
    if integer_scale is not None:
        scale = np.asarray(integer_scale, dtype=float)
        mask = (scale > 0.0) & (dm * scale <= 1.0)
        if mask.any():
            rounded = np.rint(snapped * scale) / np.where(scale > 0.0, scale, 1.0)
            snapped = np.where(mask, np.clip(rounded, lower, upper), snapped)
    return snapped + 0.0


def householder_basis(rng: np.random.Generator, n: int) -> np.ndarray:
    """Orthonormal basis from a Householder reflection of a random unit
    direction; columns are the basis vectors."""
    while True:
        v = rng.standard_normal(n)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            break
    v = v / norm
    return np.eye(n) - 2.0 * np.outer(v, v)


def poll_directions(mesh: MeshState, rng: np.random.Generator, lower, upper,
                    integer_scale: Optional[np.ndarray] = None) -> list[np.ndarray]:
    """2n poll candidates anchor +/- delta_poll * h_i, mesh-projected.

    The returned list may contain coincident points after projection near
    the bounds; callers deduplicate.
    """
    n = mesh.anchor.size
    basis = householder_basis(rng, n)
    raw = np.concatenate([
        mesh.anchor[None, :] + mesh.delta_poll * basis.T,
        mesh.anchor[None, :] - mesh.delta_poll * basis.T,
    ])
    projected = project_to_mesh(raw, mesh, lower, upper, integer_scale)
    return list(projected)


def pad_poll(points: list[np.ndarray], q: int, mesh: MeshState,
             rng: np.random.Generator, lower, upper,
             taken_keys: set[bytes],
             integer_scale: Optional[np.ndarray] = None,
             max_attempts_per_point: int = 64) -> list[np.ndarray]:
    """Extend a poll set to the smallest multiple of q at least
    max(len(points), q), using single directions from fresh seeded
    Householder bases at poll distance.

    Candidates duplicating the cache, the current set, or each other are
    skipped; if the mesh near the bounds cannot supply enough distinct
    nodes the result is returned short.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    seen = set(taken_keys)
    out = []
    for p in points:
        key = coord_key(p)
        if key not in seen:
            seen.add(key)
            out.append(p)
    target = q * max(1, -(-len(out) // q))
    attempts = max_attempts_per_point * max(target - len(out), 1)
    n = mesh.anchor.size
    while len(out) < target and attempts > 0:
        attempts -= 1
        basis = householder_basis(rng, n)
        col = int(rng.integers(n))
        sign = 1.0 if rng.random() < 0.5 else -1.0
        raw = mesh.anchor + sign * mesh.delta_poll * basis[:, col]
        cand = project_to_mesh(raw, mesh, lower, upper, integer_scale)
        key = coord_key(cand)
        if key in seen:
            continue
        seen.add(key)
        out.append(cand)
    return out
