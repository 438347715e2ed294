"""
Dynamic programming principle check for Stratified HJB.

For a site (x, t_n) and tau = k dt the discrete principle reads

    U(x, t_n) = min over k-step generator sequences of
                sum dt l_j + I[U_{n-k}](X_k)

with X_{j+1} = X_j + dt b_j clamped to the box and the set of step j taken at
time t_{n-j-1}. For k = 1 at nodes this is the scheme itself, so the residual
vanishes. For larger k the interpolation of the intermediate slices is skipped,
so the residual is bounded by k times the one-step interpolation error.
"""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from stratified_hjb.core.errors import ComplexityGuard, PreconditionError
from stratified_hjb.geometry.sampling import thin
from stratified_hjb.solver.oracle import MAX_EXPANSIONS, MAX_STEPS, MERGE_DECIMALS
from stratified_hjb.solver.problem import StratifiedProblem
from stratified_hjb.solver.semi_lagrangian import PaddedGenerators, one_step_costs
from stratified_hjb.solver.value_grid import ValueGrid
from stratified_hjb.utils.logging_utils import get_module_logger
from stratified_hjb.verify.lattice import Lattice, inner_half_mask
from stratified_hjb.verify.report import CheckReport

DEFAULT_SITE_COUNT = 25
FLOOR_FACTOR = 1e-12

Site = Tuple[Sequence[float], int]


def interpolation_bound(grid: ValueGrid, n: int) -> float:
    """
    Multilinear interpolation error bound of slice n.

    Sum over axes of max |second difference| / 8; the second difference
    already carries the dx^2 factor.
    """
    values = grid.values[n]
    total = 0.0
    for axis in range(grid.dimension):
        if values.shape[axis] < 3:
            continue
        total += float(np.max(np.abs(np.diff(values, n=2, axis=axis)))) / 8.0
    return total


def default_sites(grid: ValueGrid, prob: StratifiedProblem, count: int = DEFAULT_SITE_COUNT) -> List[Site]:
    """Interior nodes of the inner half box, evenly thinned, at the final time index."""
    lattice = Lattice(grid, prob)
    nodes = lattice.nodes[lattice.interior]
    inner = nodes[inner_half_mask(nodes, grid.lower, grid.upper)]
    return [(point, grid.steps) for point in thin(inner, count)]


def _key(point: np.ndarray) -> Tuple[float, ...]:
    return tuple(np.round(point, MERGE_DECIMALS).tolist())


def dpp_value(grid: ValueGrid, prob: StratifiedProblem, x: Sequence[float], n: int, tau_steps: int) -> float:
    """
    Right-hand side of the discrete principle at (x, t_n) over tau_steps steps.

    The last step reuses the scheme's one-step cost so that tau_steps = 1 at a
    node reproduces the computed value bit for bit.
    """
    strat = prob.strat
    dt = grid.dt
    start = np.asarray(x, dtype=float)
    frontier: Dict[Tuple[float, ...], Tuple[np.ndarray, float]] = {_key(start): (start, 0.0)}
    expansions = 0
    for j in range(tau_steps - 1):
        points = np.array([point for point, _ in frontier.values()])
        sets = prob.bl_map.evaluate_many(strat, points, grid.times[n - j - 1])
        expansions += sum(len(gs) for gs in sets)
        if expansions > MAX_EXPANSIONS:
            raise ComplexityGuard(f"DPP enumeration exceeds {MAX_EXPANSIONS} expansions")
        following: Dict[Tuple[float, ...], Tuple[np.ndarray, float]] = {}
        for (point, cost), gs in zip(frontier.values(), sets):
            moved = strat.clip_to_box(point + dt * gs.velocities)
            totals = cost + dt * gs.costs
            for target, total in zip(moved, totals):
                key = _key(target)
                known = following.get(key)
                if known is None or total < known[1]:
                    following[key] = (target, float(total))
        frontier = following

    points = np.array([point for point, _ in frontier.values()])
    accumulated = np.array([cost for _, cost in frontier.values()])
    sets = prob.bl_map.evaluate_many(strat, points, grid.times[n - tau_steps])
    generators = PaddedGenerators.from_sets(sets)
    costs, _ = one_step_costs(grid.interpolator(n - tau_steps), grid.lower, grid.upper, points, generators, dt)
    return float(np.min(accumulated + costs.min(axis=1)))


def dpp_check(grid: ValueGrid, prob: StratifiedProblem, tau_steps: int,
              sites: Optional[Sequence[Site]] = None, tol: Optional[float] = None) -> CheckReport:
    """
    Compare U with the discrete principle over tau = tau_steps dt.

    Args:
        grid: Computed value grid
        prob: Problem the grid was computed for
        tau_steps: Number of scheme steps in tau (1..14)
        sites: (point, time index) pairs; thinned inner nodes at the final time when omitted
        tol: Residual tolerance; tau_steps times the largest one-step
            interpolation bound of the slices involved when omitted

    Returns:
        CheckReport with one "dpp" site per checked (point, time)

    Raises:
        PreconditionError: tau_steps is out of range for a site
    """
    logger = get_module_logger("DPPCheck")
    if tau_steps < 1 or tau_steps > MAX_STEPS:
        raise PreconditionError(f"tau_steps must be in 1..{MAX_STEPS}, got {tau_steps}")
    if sites is None:
        sites = default_sites(grid, prob)
    else:
        Lattice(grid, prob)
    for _, n in sites:
        if n < tau_steps or n > grid.steps:
            raise PreconditionError(f"Time index {n} cannot look back {tau_steps} steps on a grid of {grid.steps}")

    slices = sorted({n - j - 1 for _, n in sites for j in range(tau_steps)})
    bound = max((interpolation_bound(grid, k) for k in slices), default=0.0)
    floor = FLOOR_FACTOR * (1.0 + float(np.max(np.abs(grid.values))))
    tolerance = tau_steps * bound + floor if tol is None else float(tol)
    report = CheckReport(check="dpp", tolerance=tolerance)
    logger.info(f"DPP check at {len(sites)} sites with tau = {tau_steps} dt (tol={tolerance:.3e})")

    for point, n in sites:
        point = np.asarray(point, dtype=float)
        value = float(grid.interpolate(point, n)[0])
        principle = dpp_value(grid, prob, point, n, tau_steps)
        signed = value - principle
        stratum = prob.strat.locate(point)
        report.add("dpp", point, abs(signed), time=grid.times[n], stratum_id=stratum.id, dim=stratum.dim,
                   signed=signed, grid_value=value, dpp_value=principle)

    report.summary = {
        "tau_steps": tau_steps,
        "tau": tau_steps * grid.dt,
        "interpolation_bound": bound,
        "exact": bool(report.max_residual == 0.0),
    }
    if not report.passed:
        logger.warning(f"DPP check failed at {report.failure_count} sites; max residual {report.max_residual:.3e}")
    return report
