"""
Brute-force oracle for Stratified HJB.

Exact minimum over every piecewise-constant generator sequence of a fixed
length. Paths reaching the same position are merged keeping the cheaper one,
which leaves the minimum unchanged since the remaining cost only depends on the
position and the step.
"""

from typing import Dict, Sequence, Tuple

import numpy as np

from stratified_hjb.core.errors import ComplexityGuard
from stratified_hjb.solver.problem import StratifiedProblem
from stratified_hjb.utils.logging_utils import get_module_logger

MAX_STEPS = 14
MAX_GENERATORS = 6
MAX_EXPANSIONS = 10 ** 8
MERGE_DECIMALS = 12


def _key(point: np.ndarray) -> Tuple[float, ...]:
    return tuple(np.round(point, MERGE_DECIMALS).tolist())


def brute_force_value(prob: StratifiedProblem, x: Sequence[float], t: float, steps: int,
                      max_generators: int = MAX_GENERATORS) -> float:
    """
    Minimum of sum (t/steps) l_j + g(X_final) over all generator sequences.

    Step j of a path started at remaining time t uses the set at X_j and time
    t - (j+1) t/steps; positions are clamped to the box.

    Args:
        prob: Problem
        x: Start point
        t: Remaining time (>= 0)
        steps: Sequence length (1..14)
        max_generators: Largest generator count allowed at a visited point

    Returns:
        The oracle value, an upper bound on U(x, t) for the piecewise-constant selections

    Raises:
        ComplexityGuard: steps or generator counts exceed the limits, or the
            enumeration would exceed 10^8 expansions
    """
    logger = get_module_logger("BruteForce")
    if steps < 1 or steps > MAX_STEPS:
        raise ComplexityGuard(f"steps must be in 1..{MAX_STEPS}, got {steps}")
    start = np.asarray(x, dtype=float)
    if t == 0:
        return prob.terminal_cost(start)

    strat = prob.strat
    h = t / steps
    frontier: Dict[Tuple[float, ...], Tuple[np.ndarray, float]] = {_key(start): (start, 0.0)}
    expansions = 0
    for j in range(steps):
        when = t - (j + 1) * h
        points = np.array([point for point, _ in frontier.values()])
        sets = prob.bl_map.evaluate_many(strat, points, when)
        widest = max(len(gs) for gs in sets)
        if widest > max_generators:
            raise ComplexityGuard(f"{widest} generators at a visited point exceed the limit {max_generators}")
        expansions += sum(len(gs) for gs in sets)
        if expansions > MAX_EXPANSIONS:
            raise ComplexityGuard(f"Enumeration exceeds {MAX_EXPANSIONS} expansions")

        following: Dict[Tuple[float, ...], Tuple[np.ndarray, float]] = {}
        for (point, cost), gs in zip(frontier.values(), sets):
            moved = strat.clip_to_box(point + h * gs.velocities)
            totals = cost + h * gs.costs
            for target, total in zip(moved, totals):
                key = _key(target)
                known = following.get(key)
                if known is None or total < known[1]:
                    following[key] = (target, float(total))
        frontier = following
        logger.debug(f"Step {j + 1}/{steps}: {len(frontier)} distinct positions")

    points = np.array([point for point, _ in frontier.values()])
    costs = np.array([cost for _, cost in frontier.values()])
    return float(np.min(costs + prob.terminal_cost.values(points)))
