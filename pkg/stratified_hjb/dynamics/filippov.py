"""
Filippov regularization for Stratified HJB.

BL_eps(x, t) is the convex hull, over sampled (z, s) with r = |z - x| + |t - s| <= eps,
of the blends (1 - r/eps) BL(z, s) + (r/eps) BL(x, t).
"""

from itertools import product
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from stratified_hjb.dynamics.bl_map import BLMap
from stratified_hjb.dynamics.generators import GeneratorSet, prune_to_vertices
from stratified_hjb.geometry.stratification import FlatStratification, Stratum
from stratified_hjb.utils.logging_utils import get_module_logger


def _blend(first: np.ndarray, second: np.ndarray, weight: float) -> np.ndarray:
    """Generators of (1 - weight) first + weight second (pairwise Minkowski sums)."""
    if weight <= 0.0:
        return first
    if weight >= 1.0:
        return second
    return ((1.0 - weight) * first[:, None, :] + weight * second[None, :, :]).reshape(-1, first.shape[1])


class FilippovMap(BLMap):
    """Epsilon-regularized version of a BLMap."""

    def __init__(self, source: BLMap, eps: float, samples_per_eps: int, horizon: Optional[float] = None):
        """
        Initialize the regularized map.

        Args:
            source: Map to regularize
            eps: Regularization radius (> 0)
            samples_per_eps: Lattice offsets per eps on each side of an axis
            horizon: Sampled times are kept in [0, horizon]; only in [0, inf) when omitted
        """
        super().__init__(source.rules, source.specific, source.closure_mode, source.bound)
        self.logger = get_module_logger("FilippovMap")
        self.source = source
        self.eps = float(eps)
        self.samples_per_eps = int(samples_per_eps)
        self.horizon = None if horizon is None else float(horizon)

    @property
    def is_piecewise_constant(self) -> bool:
        return False

    @property
    def is_autonomous(self) -> bool:
        return self.source.is_autonomous

    def _offsets(self, dimension: int) -> np.ndarray:
        """Lattice offsets (dz, ds) with |dz| + |ds| <= eps, the origin first."""
        steps = np.arange(-self.samples_per_eps, self.samples_per_eps + 1) * (self.eps / self.samples_per_eps)
        axes = dimension if self.is_autonomous else dimension + 1
        grid = np.array(list(product(steps, repeat=axes)))
        if self.is_autonomous:
            grid = np.column_stack([grid, np.zeros(grid.shape[0])])
        radius = np.linalg.norm(grid[:, :-1], axis=1) + np.abs(grid[:, -1])
        grid = grid[radius <= self.eps * (1 + 1e-12)]
        order = np.lexsort((np.linalg.norm(grid, axis=1),))
        return grid[order]

    def evaluate_on(self, strat: FlatStratification, stratum: Stratum, x: Sequence[float],
                    t: float) -> GeneratorSet:
        x = np.asarray(x, dtype=float)
        centre_set = self.source.evaluate_on(strat, stratum, x, t).points

        offsets = self._offsets(strat.dimension)
        z = strat.clip_to_box(x + offsets[:, :-1])
        s = np.clip(t + offsets[:, -1], 0.0, np.inf if self.horizon is None else self.horizon)
        r = np.linalg.norm(z - x, axis=1) + np.abs(s - t)
        weights = np.clip(r / self.eps, 0.0, 1.0)

        positions = strat.locate_many(z)
        # Blends are linear in the weight, so per source set only the extreme weights matter
        groups: Dict[Tuple, list] = {}
        for index, (position, point, time) in enumerate(zip(positions, z, s)):
            sample_stratum = strat.strata[position]
            if self.source.is_piecewise_constant:
                key = (int(position),)
            else:
                key = (int(position), *np.round(point, 12).tolist(), round(float(time), 12))
            entry = groups.get(key)
            if entry is None:
                points = self.source.evaluate_on(strat, sample_stratum, point, time).points
                groups[key] = [points, weights[index], weights[index]]
            else:
                entry[1] = min(entry[1], weights[index])
                entry[2] = max(entry[2], weights[index])

        pieces = [centre_set]
        for points, low, high in groups.values():
            pieces.append(_blend(points, centre_set, low))
            if high > low:
                pieces.append(_blend(points, centre_set, high))
        result = prune_to_vertices(GeneratorSet.from_points(np.concatenate(pieces, axis=0)))
        result.check_bound(self.bound, f" at {np.round(x, 12).tolist()} (eps {self.eps})")
        return result


def filippov_regularize(bl_map: BLMap, strat: FlatStratification, eps: float,
                        samples_per_eps: int = 3, horizon: Optional[float] = None) -> BLMap:
    """
    Filippov epsilon-regularization of a dynamics-cost map.

    Args:
        bl_map: Map to regularize
        strat: Stratification the map is defined over
        eps: Radius (>= 0); 0 returns the map unchanged
        samples_per_eps: Lattice offsets per eps on each side of an axis (>= 1)
        horizon: Final time of the problem; sampled times are clipped to it

    Returns:
        The regularized map
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if samples_per_eps < 1:
        raise ValueError("samples_per_eps must be at least 1")
    if eps == 0:
        return bl_map
    get_module_logger("Filippov").debug(f"Regularizing over {len(strat.strata)} strata with eps={eps}")
    return FilippovMap(bl_map, eps, samples_per_eps, horizon=horizon)
