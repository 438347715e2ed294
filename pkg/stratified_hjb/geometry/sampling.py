"""
Deterministic sampling helpers shared by the assumption checkers.
"""

from typing import Callable, Optional, Tuple

import numpy as np

from stratified_hjb.geometry.stratification import FlatStratification, Stratum

BISECTION_LEVELS = 10


def thin(points: np.ndarray, limit: int) -> np.ndarray:
    """Evenly spaced subset of at most `limit` rows, order preserved."""
    if points.shape[0] <= limit:
        return points
    picks = np.unique(np.linspace(0, points.shape[0] - 1, limit).round().astype(int))
    return points[picks]


def normal_directions(stratum: Stratum, extra: int = 8, seed: int = 0) -> np.ndarray:
    """
    Unit directions in the normal space of a stratum.

    Normal basis vectors with both signs, their pairwise diagonals and a seeded
    batch of random combinations. Empty for regions.
    """
    basis = stratum.normal_basis
    if basis.shape[0] == 0:
        return np.zeros((0, stratum.ambient_dim))
    directions = [basis, -basis]
    for i in range(basis.shape[0]):
        for j in range(i + 1, basis.shape[0]):
            for si in (1.0, -1.0):
                for sj in (1.0, -1.0):
                    directions.append(((si * basis[i] + sj * basis[j]) / np.sqrt(2.0))[None, :])
    if extra and basis.shape[0] > 1:
        rng = np.random.default_rng(seed)
        weights = rng.normal(size=(extra, basis.shape[0]))
        weights /= np.linalg.norm(weights, axis=1, keepdims=True)
        directions.append(weights @ basis)
    return np.concatenate(directions, axis=0)


def tangent_pairs(strat: FlatStratification, stratum: Stratum, sources: np.ndarray,
                  step: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pairs (y1, y2) on a stratum with y2 - y1 = step * v, v a tangent basis vector.

    Args:
        strat: Stratification
        stratum: Stratum carrying both points
        sources: Candidate first points, already on the stratum
        step: Pair separation

    Returns:
        Arrays (n, N) of first and second points; only pairs whose second point
        stays on the stratum are kept
    """
    empty = np.zeros((0, strat.dimension))
    if stratum.dim == 0 or sources.size == 0:
        return empty, empty
    firsts = np.repeat(sources, stratum.dim, axis=0)
    shifts = np.tile(step * stratum.tangent_basis, (sources.shape[0], 1))
    seconds = firsts + shifts
    keep = strat.on_stratum(seconds, stratum)
    return firsts[keep], seconds[keep]


def bisect_jump(gap: Callable[[np.ndarray, np.ndarray], Optional[float]], y1: np.ndarray,
                y2: np.ndarray, levels: int = BISECTION_LEVELS) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Shrink a pair onto the largest variation of `gap`.

    Each level splits the segment at its midpoint and keeps the half with the
    larger gap. A gap that survives the shrinking marks a jump.

    Args:
        gap: Function of a pair returning the variation, or None if the pair is unusable
        y1: First point
        y2: Second point

    Returns:
        (a, b, gap(a, b)) for the final pair
    """
    a, b = np.asarray(y1, dtype=float), np.asarray(y2, dtype=float)
    current = gap(a, b)
    if current is None:
        return a, b, 0.0
    for _ in range(levels):
        mid = 0.5 * (a + b)
        left = gap(a, mid)
        right = gap(mid, b)
        if left is None or right is None:
            break
        if left >= right:
            b, current = mid, left
        else:
            a, current = mid, right
    return a, b, float(current)
