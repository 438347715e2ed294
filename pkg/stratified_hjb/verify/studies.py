"""
Convergence studies for Stratified HJB.

filippov_study solves the problem once with its own dynamics and once per
regularization radius, and tracks how the value of the regularized problem
approaches it. refinement_study solves on a ladder of resolutions and checks
that successive differences shrink. scheme_agreement runs the same comparison
starting from two given resolutions.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np

from stratified_hjb.core.errors import PreconditionError
from stratified_hjb.dynamics.filippov import filippov_regularize
from stratified_hjb.solver.problem import StratifiedProblem
from stratified_hjb.solver.semi_lagrangian import solve_value
from stratified_hjb.solver.value_grid import ValueGrid
from stratified_hjb.utils.logging_utils import get_module_logger
from stratified_hjb.verify.lattice import inner_half_mask
from stratified_hjb.verify.report import CheckReport

MONOTONE_SLACK = 1.10
MIN_RATIO = 1.4
FILIPPOV_TOLERANCE = 0.1
ZERO_FACTOR = 1e-10


def inner_difference(first: ValueGrid, second: ValueGrid) -> float:
    """
    Max |first - second| over the inner half box, every time slice of `first`.

    `second` is interpolated at the nodes and times of `first`.
    """
    nodes = first.nodes()
    inner = nodes[inner_half_mask(nodes, first.lower, first.upper)]
    mask = inner_half_mask(nodes, first.lower, first.upper)
    worst = 0.0
    for n, t in enumerate(first.times):
        mine = first.values[n].reshape(-1)[mask]
        theirs = second.value_at(inner, t)
        worst = max(worst, float(np.max(np.abs(mine - theirs))))
    return worst


def filippov_study(prob: StratifiedProblem, eps_list: Sequence[float], dx: float, dt: float,
                   samples_per_eps: int = 3, tolerance: float = FILIPPOV_TOLERANCE,
                   threads: int = 1) -> CheckReport:
    """
    Solve with Filippov-regularized dynamics for every radius and compare.

    Args:
        prob: Problem
        eps_list: Radii, positive and decreasing
        dx: Space step
        dt: Time step
        samples_per_eps: Lattice density of the regularization offsets
        tolerance: Largest accepted error at the smallest radius
        threads: Solver threads

    Returns:
        CheckReport with an "error" site per radius, a "monotone" site per
        consecutive pair (10% slack) and the table in summary["table"]

    Raises:
        PreconditionError: a radius is below 2 dx or the list is not decreasing
    """
    logger = get_module_logger("FilippovStudy")
    radii = [float(eps) for eps in eps_list]
    if not radii:
        raise PreconditionError("eps_list is empty")
    for eps in radii:
        if eps < 2 * dx:
            raise PreconditionError(f"eps={eps} is below 2 dx = {2 * dx}; the regularization is not resolved")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise PreconditionError(f"eps_list must be strictly decreasing, got {radii}")

    logger.info(f"Filippov study over eps = {radii} (dx={dx}, dt={dt})")
    reference = solve_value(prob, dx, dt, threads=threads)
    errors = []
    for eps in radii:
        regularized = prob.with_map(filippov_regularize(prob.bl_map, prob.strat, eps, samples_per_eps,
                                                        horizon=prob.horizon))
        grid = solve_value(regularized, dx, dt, threads=threads)
        error = inner_difference(grid, reference)
        errors.append(error)
        logger.info(f"eps={eps:.6g}: inner-box error {error:.6g}")

    report = CheckReport(check="filippov_study", tolerance=tolerance)
    for index, (eps, error) in enumerate(zip(radii, errors)):
        final = index == len(radii) - 1
        report.add("error", None, error, tolerance=tolerance if final else np.inf, eps=eps)
    for (eps_a, error_a), (eps_b, error_b) in zip(zip(radii, errors), zip(radii[1:], errors[1:])):
        report.add("monotone", None, error_b - MONOTONE_SLACK * error_a, tolerance=0.0,
                   eps_from=eps_a, eps_to=eps_b)
    report.summary = {
        "table": [{"eps": eps, "error": error} for eps, error in zip(radii, errors)],
        "dx": dx,
        "dt": reference.dt,
        "samples_per_eps": samples_per_eps,
    }
    return report


def refinement_study(prob: StratifiedProblem, ladder: Sequence[Tuple[float, float]],
                     threads: int = 1, min_ratio: float = MIN_RATIO) -> CheckReport:
    """
    Solve on a ladder of resolutions and compare consecutive levels.

    Args:
        prob: Problem
        ladder: (dx, dt) pairs from coarse to fine, at least three
        threads: Solver threads
        min_ratio: Required shrink factor between consecutive differences

    Returns:
        CheckReport with a "ratio" site per consecutive pair of differences
        (residual min_ratio - ratio, passing at 0) and the table in summary["table"]
    """
    logger = get_module_logger("RefinementStudy")
    if len(ladder) < 3:
        raise PreconditionError(f"A refinement study needs at least three levels, got {len(ladder)}")
    grids: List[ValueGrid] = []
    for dx, dt in ladder:
        grids.append(solve_value(prob, dx, dt, threads=threads))
    differences = [inner_difference(coarse, fine) for coarse, fine in zip(grids, grids[1:])]
    scale = max(1.0, max(float(np.max(np.abs(g.values))) for g in grids))
    zero = ZERO_FACTOR * scale

    report = CheckReport(check="refinement_study", tolerance=0.0)
    table = []
    for index, (dx, dt) in enumerate(ladder):
        row = {"dx": dx, "dt": grids[index].dt}
        if index:
            row["difference"] = differences[index - 1]
        table.append(row)
    for index, (first, second) in enumerate(zip(differences, differences[1:])):
        if first <= zero and second <= zero:
            ratio = np.inf
            residual = 0.0
        else:
            ratio = first / second if second > 0 else np.inf
            residual = max(min_ratio - ratio, 0.0)
        table[index + 2]["ratio"] = ratio
        report.add("ratio", None, residual, first=first, second=second, ratio=ratio,
                   dx=ladder[index + 2][0])
        logger.info(f"Level {index + 2}: difference {second:.6g}, ratio {ratio:.3g}")
    report.summary = {"table": table, "min_ratio": min_ratio}
    return report


def scheme_agreement(prob: StratifiedProblem, dx1: float, dt1: float, dx2: float, dt2: float,
                     threads: int = 1, level3: Optional[Tuple[float, float]] = None) -> CheckReport:
    """
    Three-level agreement check from two resolutions.

    The third level halves the second one (dx2 / 2, dt2 / 2) unless given,
    so it stays on a lattice aligned with the interfaces whenever the second
    level is. Identical resolutions give zero differences, which pass.
    """
    if level3 is None:
        level3 = (0.5 * dx2, 0.5 * dt2)
    report = refinement_study(prob, [(dx1, dt1), (dx2, dt2), level3], threads=threads)
    report.check = "scheme_agreement"
    return report
