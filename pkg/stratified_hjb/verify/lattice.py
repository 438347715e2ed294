"""
Lattice bookkeeping shared by the grid-based checks.
"""

from typing import Dict, List, Tuple

import numpy as np

from stratified_hjb.core.errors import GridMisaligned, ResolutionMismatch
from stratified_hjb.solver.problem import StratifiedProblem
from stratified_hjb.solver.value_grid import ValueGrid

HORIZON_TOL = 1e-9


def check_compatible(grid: ValueGrid, prob: StratifiedProblem) -> None:
    """
    Make sure a value grid was computed for this problem's box and horizon.

    Raises:
        ResolutionMismatch: dimension, box or horizon differ
    """
    strat = prob.strat
    if grid.dimension != strat.dimension:
        raise ResolutionMismatch(f"Grid is {grid.dimension}-dimensional, the problem lives in R^{strat.dimension}")
    scale = max(1.0, float(np.max(np.abs(strat.box_upper - strat.box_lower))))
    if (np.max(np.abs(grid.lower - strat.box_lower)) > 1e-9 * scale
            or np.max(np.abs(grid.upper - strat.box_upper)) > 1e-9 * scale):
        raise ResolutionMismatch(f"Grid box {grid.lower.tolist()}..{grid.upper.tolist()} differs from the "
                                 f"problem box {strat.box_lower.tolist()}..{strat.box_upper.tolist()}")
    if abs(grid.times[-1] - prob.horizon) > HORIZON_TOL * max(1.0, prob.horizon):
        raise ResolutionMismatch(f"Grid ends at t={grid.times[-1]:.12g}, the horizon is {prob.horizon:.12g}")


def inner_half_mask(nodes: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Nodes within the middle half of the box along every axis."""
    centre = 0.5 * (lower + upper)
    quarter = 0.25 * (upper - lower)
    return np.all(np.abs(nodes - centre) <= quarter * (1 + 1e-12), axis=1)


class Lattice:
    """Nodes of a value grid, their strata and their finite differences."""

    def __init__(self, grid: ValueGrid, prob: StratifiedProblem):
        check_compatible(grid, prob)
        self.grid = grid
        self.prob = prob
        strat = prob.strat
        self.nodes = grid.nodes()
        self.positions = strat.locate_many(self.nodes)

        for position, stratum in enumerate(strat.strata):
            if stratum.dim < strat.dimension and not stratum.is_axis_aligned:
                raise GridMisaligned(f"Stratum {stratum.id} is not axis-aligned")
            if not np.any(self.positions == position):
                raise GridMisaligned(f"No lattice node lies on stratum {stratum.id}")

        shape = np.array(grid.shape)
        index = np.indices(grid.shape).reshape(grid.dimension, -1).T
        self.interior = np.flatnonzero(np.all((index >= 1) & (index <= shape - 2), axis=1))

    def groups(self) -> Dict[int, np.ndarray]:
        """Interior nodes grouped by stratum position (indices into self.interior)."""
        positions = self.positions[self.interior]
        return {int(pos): np.flatnonzero(positions == pos) for pos in np.unique(positions)}

    def time_indices(self) -> List[int]:
        steps = self.grid.steps
        return list(range(1, steps)) if steps >= 2 else list(range(1, steps + 1))

    def time_derivative(self, n: int) -> np.ndarray:
        """Backward difference (U_n - U_{n-1}) / dt at the interior nodes."""
        grid = self.grid
        dt = grid.times[n] - grid.times[n - 1]
        change = (grid.values[n] - grid.values[n - 1]).reshape(-1)
        return change[self.interior] / dt

    def differences(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """Forward and backward space differences of slice n at the interior nodes, shape (n, N) each."""
        values = self.grid.values[n]
        dimension = self.grid.dimension
        forward, backward = [], []
        for i, axis in enumerate(self.grid.axes):
            spacing = np.diff(axis).reshape([-1 if j == i else 1 for j in range(dimension)])
            step = np.diff(values, axis=i) / spacing
            pad_shape = list(values.shape)
            pad_shape[i] = 1
            pad = np.full(pad_shape, np.nan)
            forward.append(np.concatenate([step, pad], axis=i).reshape(-1)[self.interior])
            backward.append(np.concatenate([pad, step], axis=i).reshape(-1)[self.interior])
        return np.stack(forward, axis=1), np.stack(backward, axis=1)
