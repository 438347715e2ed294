"""
Trajectories of the differential inclusion for Stratified HJB.

simulate() advances an Euler scheme: at each step a policy picks a pair (b, l)
in the local dynamics-cost set, membership is certified by an LP, and the state
and accumulated cost move by ds (b, l).
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from stratified_hjb.core.errors import InfeasibleSelection
from stratified_hjb.dynamics.generators import GeneratorSet
from stratified_hjb.geometry.stratification import FlatStratification, Stratum
from stratified_hjb.solver.problem import StratifiedProblem
from stratified_hjb.solver.semi_lagrangian import PaddedGenerators, one_step_costs
from stratified_hjb.solver.value_grid import ValueGrid
from stratified_hjb.utils.logging_utils import get_module_logger

Policy = Callable[[np.ndarray, float, GeneratorSet, Stratum], Tuple[np.ndarray, float]]


@dataclass
class Trajectory:
    """Discrete trajectory (X, L) on [0, t]."""

    times: np.ndarray
    states: np.ndarray
    costs: np.ndarray
    selections: List[Tuple[np.ndarray, float]] = field(default_factory=list)
    clamped_steps: int = 0

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def running_cost(self) -> float:
        return float(self.costs[-1])


class ConstantPolicy:
    """Always selects the same pair (b, l)."""

    def __init__(self, velocity: Sequence[float], cost: float):
        self.velocity = np.asarray(velocity, dtype=float)
        self.cost = float(cost)

    def __call__(self, x, remaining, gs, stratum):
        return self.velocity, self.cost


class GreedyDPPPolicy:
    """
    Picks the generator minimizing the one-step cost of the scheme.

    The lookahead uses the grid step dt and the slice of the remaining time
    minus dt, i.e. the same minimization the solver performs at nodes.
    """

    def __init__(self, grid: ValueGrid, problem: StratifiedProblem):
        self.grid = grid
        self.problem = problem
        self._interpolators: Dict[int, object] = {}

    def _interpolator(self, n: int):
        if n not in self._interpolators:
            self._interpolators[n] = self.grid.interpolator(n)
        return self._interpolators[n]

    def __call__(self, x, remaining, gs, stratum):
        grid = self.grid
        n = int(np.clip(round(remaining / grid.dt) - 1, 0, grid.steps))
        generators = PaddedGenerators.from_sets([gs])
        costs, _ = one_step_costs(self._interpolator(n), grid.lower, grid.upper,
                                  np.asarray(x, dtype=float)[None, :], generators, grid.dt)
        index = int(np.argmin(costs[0]))
        return gs.velocities[index], float(gs.costs[index])


def simulate(prob: StratifiedProblem, x: Sequence[float], t: float, policy: Policy, ds: float) -> Trajectory:
    """
    Euler trajectory of the differential inclusion.

    Step j evaluates the set at X_j and time t - (j+1) h, h = t / round(t / ds).

    Args:
        prob: Problem
        x: Start point
        t: Horizon of the trajectory (remaining time)
        policy: Maps (point, remaining time, local set, stratum) to a pair (b, l)
        ds: Target step length (> 0)

    Returns:
        Trajectory with one selection per step

    Raises:
        InfeasibleSelection: the policy returned a pair outside the hull
    """
    if ds <= 0:
        raise ValueError("ds must be positive")
    logger = get_module_logger("Simulate")
    strat = prob.strat
    steps = max(1, int(round(t / ds))) if t > 0 else 0
    h = t / steps if steps else 0.0

    states = [np.asarray(x, dtype=float).copy()]
    costs = [0.0]
    selections = []
    clamped = 0
    for j in range(steps):
        point = states[-1]
        stratum = strat.locate(point)
        remaining = t - j * h
        gs = prob.bl_map.evaluate_on(strat, stratum, point, t - (j + 1) * h)
        velocity, cost = policy(point, remaining, gs, stratum)
        velocity = np.asarray(velocity, dtype=float)
        if not gs.contains(velocity, cost):
            raise InfeasibleSelection(f"Step {j}: selection b={velocity.tolist()}, l={cost} at "
                                      f"{point.tolist()} is not in the dynamics hull")
        following = point + h * velocity
        inside = strat.clip_to_box(following)
        if not np.array_equal(inside, following):
            clamped += 1
        states.append(inside)
        costs.append(costs[-1] + h * cost)
        selections.append((velocity, float(cost)))

    if clamped:
        logger.warning(f"Trajectory clamped to the box at {clamped} step(s)")
    return Trajectory(times=h * np.arange(steps + 1), states=np.array(states), costs=np.array(costs),
                      selections=selections, clamped_steps=clamped)


def trajectory_total_cost(traj: Trajectory, prob: StratifiedProblem) -> float:
    """Running cost plus the terminal cost at the final state."""
    return traj.running_cost + prob.terminal_cost(traj.final_state)


def reaching_times(traj: Trajectory, strat: FlatStratification) -> List[Tuple[int, float]]:
    """
    First time the trajectory is on each stratum.

    Returns:
        (stratum id, first-hit time) for every stratum, inf if never reached
    """
    positions = strat.locate_many(traj.states)
    first: Dict[int, float] = {}
    for position, when in zip(positions, traj.times):
        stratum_id = strat.strata[position].id
        if stratum_id not in first:
            first[stratum_id] = float(when)
    return [(s.id, first.get(s.id, np.inf)) for s in sorted(strat.strata, key=lambda s: s.id)]


def reaching_times_by_dimension(traj: Trajectory, strat: FlatStratification) -> Dict[int, float]:
    """First time the trajectory is on M^j, for each j = 0..N."""
    hits = dict(reaching_times(traj, strat))
    result = {}
    for j in range(strat.dimension + 1):
        times = [hits[s.id] for s in strat.of_dimension(j)]
        result[j] = min(times) if times else np.inf
    return result
