"""
Adaptedness check for Stratified HJB.

A stratification is adapted to BL when every restriction BL|_k is continuous on
its stratum. The check compares tangential restrictions at sampled pairs of
nearby points through support functions.
"""

from typing import Dict, Optional, Sequence

import numpy as np

from stratified_hjb.dynamics.bl_map import BLMap
from stratified_hjb.dynamics.generators import hausdorff_distance, support_directions, tangential_restriction
from stratified_hjb.geometry.sampling import bisect_jump, tangent_pairs, thin
from stratified_hjb.geometry.stratification import FlatStratification, Stratum
from stratified_hjb.utils.logging_utils import get_module_logger
from stratified_hjb.verify.report import CheckReport

PAIR_SCALES = (1.0, 0.25, 0.0625)
SOURCES_PER_STRATUM = 12
JUMP_KEEP_FRACTION = 0.5


def _restriction_gap(bl_map: BLMap, strat: FlatStratification, stratum: Stratum, t: float,
                     directions: np.ndarray):
    def gap(a: np.ndarray, b: np.ndarray) -> Optional[float]:
        if not np.all(strat.on_stratum(np.vstack([a, b]), stratum)):
            return None
        first = tangential_restriction(bl_map.evaluate_on(strat, stratum, a, t), stratum)
        second = tangential_restriction(bl_map.evaluate_on(strat, stratum, b, t), stratum)
        return hausdorff_distance(first, second, directions)
    return gap


def check_adapted(bl_map: BLMap, strat: FlatStratification, sample_density: float,
                  times: Sequence[float] = (0.0,), seed: int = 0) -> CheckReport:
    """
    Estimate the continuity modulus of BL|_k on every stratum.

    Args:
        bl_map: Dynamics-cost map
        strat: Stratification
        sample_density: Sample points per unit length (> 0)
        times: Times at which the sets are compared
        seed: Seed for the random support directions

    Returns:
        CheckReport with one site per stratum; a stratum fails when a Hausdorff
        gap survives bisection of its pair (a jump), with the pair as witness
    """
    if sample_density <= 0:
        raise ValueError("sample_density must be positive")
    logger = get_module_logger("CheckAdapted")
    logger.info("Checking continuity of the tangential restrictions")
    report = CheckReport(check="check_adapted", tolerance=0.0)
    directions = support_directions(strat.dimension + 1, extra=8, seed=seed)
    h = min(1.0 / sample_density, 0.1 * strat.diameter)
    moduli: Dict[str, float] = {}

    for stratum in strat.strata:
        if stratum.dim == 0:
            report.add("adapted", stratum.basepoint, 0.0, stratum_id=stratum.id, dim=0, modulus=0.0)
            moduli[str(stratum.id)] = 0.0
            continue
        sources = thin(strat.sample_stratum(stratum, sample_density), SOURCES_PER_STRATUM)
        modulus = 0.0
        lipschitz = 0.0
        by_scale = []
        jump = None
        for t in times:
            gap = _restriction_gap(bl_map, strat, stratum, t, directions)
            for factor in PAIR_SCALES:
                step = h * factor
                worst = 0.0
                firsts, seconds = tangent_pairs(strat, stratum, sources, step)
                for y1, y2 in zip(firsts, seconds):
                    distance = gap(y1, y2)
                    if distance is None:
                        continue
                    worst = max(worst, distance)
                    if jump is None and factor == PAIR_SCALES[0] and distance > 1e-9:
                        a, b, final = (y1, y2, distance) if np.isinf(distance) else bisect_jump(gap, y1, y2)
                        if final > JUMP_KEEP_FRACTION * distance:
                            jump = (a, b, final, t)
                by_scale.append((step, worst))
                modulus = max(modulus, worst)
                lipschitz = max(lipschitz, worst / step)

        moduli[str(stratum.id)] = modulus
        if jump is None:
            report.add("adapted", stratum.basepoint, 0.0, stratum_id=stratum.id, dim=stratum.dim,
                       modulus=modulus, lipschitz=lipschitz, by_scale=by_scale)
        else:
            a, b, final, t = jump
            report.add("adapted", a, 1.0, time=t, stratum_id=stratum.id, dim=stratum.dim,
                       witness_pair=[a.tolist(), b.tolist()], hausdorff_gap=final,
                       modulus=modulus, by_scale=by_scale)

    report.summary.update({"modulus": moduli, "worst_modulus": max(moduli.values(), default=0.0)})
    if not report.passed:
        logger.warning(f"BL|_k jumps inside {report.failure_count} stratum(s)")
    return report
