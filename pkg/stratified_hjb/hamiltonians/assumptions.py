"""
Assumption checkers for Stratified HJB.

Sampled validation of normal controllability (NC-BL and its Hamiltonian form),
tangential continuity (TC, TC-BL) and the Lipschitz bound (LP). Every checker
returns an AssumptionReport: a CheckReport carrying the fitted constants.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from stratified_hjb.dynamics.bl_map import BLMap
from stratified_hjb.dynamics.generators import GeneratorSet, hausdorff_distance, support_directions
from stratified_hjb.geometry.sampling import bisect_jump, normal_directions, tangent_pairs, thin
from stratified_hjb.geometry.stratification import FlatStratification, Stratum
from stratified_hjb.hamiltonians.hamiltonian import hamiltonian_tangential
from stratified_hjb.hamiltonians.simplex import OPTIMAL, linprog_eq
from stratified_hjb.utils.logging_utils import get_module_logger
from stratified_hjb.verify.report import CheckReport

DELTA_RESOLUTION = 1e-6
SOURCES_PER_STRATUM = 12
TC_SCALES = (1.0, 0.25, 0.0625)
LARGE_P = 100.0
JUMP_KEEP_FRACTION = 0.5


@dataclass
class AssumptionReport(CheckReport):
    """CheckReport with the constants of (NC), (TC) and (LP)."""

    nc_delta: Dict[int, float] = field(default_factory=dict)
    tc_constant: Optional[float] = None
    tc_bl_constant: Optional[float] = None
    modulus: List[Tuple[float, float]] = field(default_factory=list)
    lp_constant: Optional[float] = None

    def to_dict(self):
        data = super().to_dict()
        data.update({
            "nc_delta": {str(k): v for k, v in self.nc_delta.items()},
            "tc_constant": self.tc_constant,
            "tc_bl_constant": self.tc_bl_constant,
            "modulus": [list(entry) for entry in self.modulus],
            "lp_constant": self.lp_constant,
        })
        return data


def max_normal_reach(gs: GeneratorSet, direction: np.ndarray) -> float:
    """
    Largest delta with delta * direction in the velocity hull.

    Returns:
        0 when not even the zero velocity is reachable along the ray
    """
    m = len(gs)
    matrix = np.zeros((gs.dimension + 1, m + 1))
    matrix[:gs.dimension, :m] = gs.velocities.T
    matrix[:gs.dimension, m] = -direction
    matrix[gs.dimension, :m] = 1.0
    rhs = np.append(np.zeros(gs.dimension), 1.0)
    objective = np.zeros(m + 1)
    objective[m] = 1.0
    result = linprog_eq(objective, matrix, rhs, feas_tol=max(1e-10 * gs.max_speed, 1e-14))
    if result.status != OPTIMAL:
        return 0.0
    return float(result.x[m])


def velocity_set(gs: GeneratorSet) -> GeneratorSet:
    """The velocity projection B of a dynamics-cost set, as a set with zero costs."""
    return GeneratorSet(gs.velocities, np.zeros(len(gs)))


def _sample_radii(strat: FlatStratification, sample_density: float) -> Tuple[float, ...]:
    h = min(1.0 / sample_density, 0.1 * strat.diameter)
    return (0.5 * h, 0.1 * h)


def check_nc(bl_map: BLMap, strat: FlatStratification, delta_target: float, sample_density: float,
             times: Sequence[float] = (0.0,), seed: int = 0) -> AssumptionReport:
    """
    Certify normal controllability near every lower stratum.

    Args:
        bl_map: Dynamics-cost map
        strat: Stratification
        delta_target: Required radius delta (> 0)
        sample_density: Sample points per unit length
        times: Times at which the sets are evaluated
        seed: Seed for the random sample directions and covectors

    Returns:
        AssumptionReport with the certified delta per stratum
    """
    if delta_target <= 0:
        raise ValueError("delta_target must be positive")
    logger = get_module_logger("CheckNC")
    logger.info(f"Checking normal controllability (delta target {delta_target})")
    report = AssumptionReport(check="check_nc", tolerance=DELTA_RESOLUTION)
    rng = np.random.default_rng(seed)

    for stratum in strat.lower_strata:
        sources = thin(strat.sample_stratum(stratum, sample_density), SOURCES_PER_STRATUM)
        directions = normal_directions(stratum, seed=seed)
        certified = delta_target
        witness = None
        samples: List[Tuple[np.ndarray, Stratum, GeneratorSet, float]] = []

        for x in sources:
            for radius in _sample_radii(strat, sample_density):
                ys = x + radius * directions
                ys = ys[strat.in_box(ys, tol=0.0)]
                if ys.size == 0:
                    continue
                positions = strat.locate_many(ys)
                for y, position in zip(ys, positions):
                    y_stratum = strat.strata[position]
                    if y_stratum.dim <= stratum.dim:
                        continue
                    for t in times:
                        gs = bl_map.evaluate_on(strat, y_stratum, y, t)
                        samples.append((y, y_stratum, gs, t))
                        for d in directions:
                            reach = min(max_normal_reach(gs, d), delta_target)
                            if reach < certified:
                                certified = reach
                                witness = (y, d, t)

        certified = float(np.floor(certified / DELTA_RESOLUTION) * DELTA_RESOLUTION)
        report.nc_delta[stratum.id] = certified
        aspect = "full controllability" if stratum.dim == 0 else "normal controllability"
        if witness is None:
            report.add("nc_bl", stratum.basepoint, delta_target - certified, stratum_id=stratum.id,
                       dim=stratum.dim, delta=certified, aspect=aspect, samples=len(samples))
        else:
            y, d, t = witness
            report.add("nc_bl", y, delta_target - certified, time=t, stratum_id=stratum.id,
                       dim=stratum.dim, delta=certified, direction=d.tolist(), aspect=aspect,
                       samples=len(samples))

        _check_nc_hamiltonian(report, stratum, samples, min(certified, delta_target), rng)

    report.summary["nc_delta_min"] = min(report.nc_delta.values()) if report.nc_delta else None
    if not report.passed:
        logger.warning(f"Normal controllability fails on {report.failure_count} site(s)")
    return report


def _check_nc_hamiltonian(report: AssumptionReport, stratum: Stratum, samples, delta: float,
                          rng: np.random.Generator) -> None:
    """H^j(y,p) >= delta |p_bot| - C_2 (1 + |p_top|) for p tangent to the stratum through y."""
    worst = -np.inf
    witness = None
    for y, y_stratum, gs, t in samples:
        c2 = gs.max_speed + gs.max_cost
        for scale in (1.0, 10.0):
            p = y_stratum.projector @ (scale * rng.normal(size=y.size))
            p_top, p_bot = stratum.split_covector(p)
            bound = delta * np.linalg.norm(p_bot) - c2 * (1.0 + np.linalg.norm(p_top))
            value = hamiltonian_tangential(gs, y_stratum, p).value
            gap = bound - value
            if gap > worst:
                worst, witness = gap, (y, p, t)
    if witness is None:
        return
    y, p, t = witness
    report.add("nc_hamiltonian", y, max(worst, 0.0), time=t,
               stratum_id=stratum.id, dim=stratum.dim, covector=p.tolist(), margin=-worst)


def _hamiltonian_gap(bl_map: BLMap, strat: FlatStratification, stratum: Stratum, t: float,
                     covectors: np.ndarray):
    def gap(a: np.ndarray, b: np.ndarray) -> Optional[float]:
        if not np.all(strat.on_stratum(np.vstack([a, b]), stratum)):
            return None
        first = bl_map.evaluate_on(strat, stratum, a, t)
        second = bl_map.evaluate_on(strat, stratum, b, t)
        return float(np.max(_differences(_stratum_hamiltonians(first, stratum, covectors),
                                         _stratum_hamiltonians(second, stratum, covectors))))
    return gap


def _stratum_hamiltonians(gs: GeneratorSet, stratum: Stratum, covectors: np.ndarray) -> np.ndarray:
    return np.array([hamiltonian_tangential(gs, stratum, p).value for p in covectors])


def _differences(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """|first - second| where two empty restrictions (-inf) agree and one alone differs by inf."""
    both = np.isinf(first) & np.isinf(second)
    diff = np.abs(np.where(both, 0.0, first) - np.where(both, 0.0, second))
    return np.where(both, 0.0, diff)


def check_tc(bl_map: BLMap, strat: FlatStratification, sample_density: float,
             times: Sequence[float] = (0.0,), seed: int = 0, large_p: float = LARGE_P) -> AssumptionReport:
    """
    Fit the tangential continuity constants.

    Pairs y1, y2 on one stratum with y2 - y1 tangent are sampled at three
    scales. With unit covectors and covectors of size large_p, the growth of
    |H^j(y1,p) - H^j(y2,p)| in |p| gives C_1; the remainder at |p| = 1 gives
    the modulus m. A difference that does not shrink under bisection of the
    pair is reported as a jump (unbounded fit).

    Returns:
        AssumptionReport with tc_constant (C_1), tc_bl_constant and the modulus table
    """
    logger = get_module_logger("CheckTC")
    logger.info("Checking tangential continuity")
    report = AssumptionReport(check="check_tc", tolerance=0.0)
    h = min(1.0 / sample_density, 0.1 * strat.diameter)
    unit = support_directions(strat.dimension, extra=4, seed=seed)
    velocity_directions = support_directions(strat.dimension, extra=8, seed=seed)
    set_directions = support_directions(strat.dimension + 1, extra=8, seed=seed)

    c1 = 0.0
    c1_bl = 0.0
    modulus: Dict[float, float] = {}

    for stratum in strat.strata:
        if stratum.dim == 0:
            continue
        sources = thin(strat.sample_stratum(stratum, sample_density), SOURCES_PER_STRATUM)
        jump = None
        for t in times:
            for factor in TC_SCALES:
                step = h * factor
                firsts, seconds = tangent_pairs(strat, stratum, sources, step)
                for y1, y2 in zip(firsts, seconds):
                    first = bl_map.evaluate_on(strat, stratum, y1, t)
                    second = bl_map.evaluate_on(strat, stratum, y2, t)
                    diff_unit = _differences(_stratum_hamiltonians(first, stratum, unit),
                                             _stratum_hamiltonians(second, stratum, unit))
                    diff_large = _differences(_stratum_hamiltonians(first, stratum, large_p * unit),
                                              _stratum_hamiltonians(second, stratum, large_p * unit))
                    worst_unit = float(np.max(diff_unit))
                    c1 = max(c1, float(np.max((diff_large - diff_unit) / ((large_p - 1.0) * step))))
                    modulus[step] = max(modulus.get(step, 0.0), worst_unit)
                    c1_bl = max(c1_bl, hausdorff_distance(velocity_set(first), velocity_set(second),
                                                          velocity_directions) / step)

                    threshold = 1e-6 * (1.0 + first.max_speed + first.max_cost)
                    if jump is not None or factor != TC_SCALES[0] or worst_unit <= threshold:
                        continue
                    if np.isinf(worst_unit):
                        a, b, final = y1, y2, worst_unit
                    else:
                        covectors = unit[[int(np.argmax(diff_unit))]]
                        gap = _hamiltonian_gap(bl_map, strat, stratum, t, covectors)
                        a, b, final = bisect_jump(gap, y1, y2)
                        if final <= JUMP_KEEP_FRACTION * worst_unit:
                            continue
                    gap_bl = hausdorff_distance(bl_map.evaluate_on(strat, stratum, a, t),
                                                bl_map.evaluate_on(strat, stratum, b, t), set_directions)
                    jump = (a, b, final, t, gap_bl)

        if jump is None:
            report.add("tc", stratum.basepoint, 0.0, stratum_id=stratum.id, dim=stratum.dim)
        else:
            a, b, final, t, gap_bl = jump
            report.add("tc", a, 1.0, time=t, stratum_id=stratum.id, dim=stratum.dim,
                       witness_pair=[a.tolist(), b.tolist()], hamiltonian_gap=final,
                       hausdorff_gap=gap_bl, aspect="unbounded fit")

    jumps = report.failure_count
    report.tc_constant = np.inf if jumps else c1
    report.tc_bl_constant = np.inf if jumps else c1_bl
    # m(r) is what the linear-in-|p| part does not explain at |p| = 1
    report.modulus = sorted((step, max(value - c1 * step, 0.0)) for step, value in modulus.items())
    report.summary.update({"C1": report.tc_constant, "C1_bl": report.tc_bl_constant,
                           "modulus": report.modulus, "jumps": jumps})
    logger.info(f"C1 = {report.tc_constant}, C1(TC-BL) = {report.tc_bl_constant}")
    return report


def check_lp_constant(bl_map: BLMap, strat: FlatStratification, sample_density: float,
                      times: Sequence[float] = (0.0,), seed: int = 0) -> AssumptionReport:
    """
    Certify the Lipschitz constant of the Hamiltonians in p.

    C_3 is the largest generator speed over all sampled evaluations; seeded
    random pairs (p, q) confirm |H^j(y,p) - H^j(y,q)| <= C_3 |p - q|.
    """
    logger = get_module_logger("CheckLP")
    logger.info("Checking the Lipschitz constant in p")
    report = AssumptionReport(check="check_lp_constant", tolerance=1e-9)
    rng = np.random.default_rng(seed)

    evaluations = []
    for stratum in strat.strata:
        for y in thin(strat.sample_stratum(stratum, sample_density), SOURCES_PER_STRATUM):
            for t in times:
                evaluations.append((stratum, y, t, bl_map.evaluate_on(strat, stratum, y, t)))
    c3 = max((gs.max_speed for _, _, _, gs in evaluations), default=0.0)

    worst: Dict[int, Tuple[float, object]] = {}
    for stratum, y, t, gs in evaluations:
        p = rng.normal(size=strat.dimension)
        q = p + rng.normal(size=strat.dimension) * 0.5
        hp = hamiltonian_tangential(gs, stratum, p).value
        hq = hamiltonian_tangential(gs, stratum, q).value
        excess = 0.0 if not (np.isfinite(hp) and np.isfinite(hq)) else abs(hp - hq) - c3 * np.linalg.norm(p - q)
        if stratum.id not in worst or excess > worst[stratum.id][0]:
            worst[stratum.id] = (excess, (y, t))
    for stratum in strat.strata:
        if stratum.id not in worst:
            continue
        excess, (y, t) = worst[stratum.id]
        local = max(gs.max_speed for s, _, _, gs in evaluations if s is stratum)
        report.add("lp", y, max(excess, 0.0), time=t, stratum_id=stratum.id, dim=stratum.dim, local_C3=local)

    report.lp_constant = c3
    report.summary["C3"] = c3
    logger.info(f"C3 = {c3}")
    return report
