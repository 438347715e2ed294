"""
Discrete viscosity checks for Stratified HJB.

At every interior lattice node x on a stratum M^k and interior time t_n:

    sub:    phi_t + H^k(p_T)                                  <= tol
    super:  -max over one-sided gradients of phi_t + H(p)     <= tol

phi_t is the backward time difference and the gradients are taken on slice
n - 1, which makes both tests consistent with the scheme. The sub gradient p_T
is the central difference along the tangent axes of the stratum. Super
candidates use forward and backward differences along every axis, so at an
interface the normal differences come from each adjacent region.
"""

import itertools
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from stratified_hjb.dynamics.generators import GeneratorSet, tangential_restriction
from stratified_hjb.hamiltonians.hamiltonian import hamiltonian_tangential, stationary_cost
from stratified_hjb.solver.problem import StratifiedProblem
from stratified_hjb.solver.semi_lagrangian import PaddedGenerators, node_sets
from stratified_hjb.solver.value_grid import ValueGrid
from stratified_hjb.utils.logging_utils import get_module_logger
from stratified_hjb.verify.lattice import Lattice
from stratified_hjb.verify.report import CheckReport

VISCOSITY_TOL_FACTOR = 10.0
SUB_CHOICES = ("central",)
SUPER_CHOICES = ("forward", "backward")


def default_tolerance(grid: ValueGrid, factor: float = VISCOSITY_TOL_FACTOR) -> float:
    return factor * (grid.dx + grid.dt)


def _candidates(forward: np.ndarray, backward: np.ndarray, axes: Sequence[int],
                choices: Sequence[str], dimension: int) -> np.ndarray:
    """Candidate gradients (n, combos, N); axes outside `axes` stay 0."""
    columns = {
        "forward": forward,
        "backward": backward,
        "central": 0.5 * (forward + backward),
    }
    combos = list(itertools.product(choices, repeat=len(axes)))
    covectors = np.zeros((forward.shape[0], len(combos), dimension))
    for c, combo in enumerate(combos):
        for axis, choice in zip(axes, combo):
            covectors[:, c, axis] = columns[choice][:, axis]
    return covectors


def _hamiltonians(velocities: np.ndarray, costs: np.ndarray, covectors: np.ndarray) -> np.ndarray:
    """max_m -b_m.p - l_m for every node and candidate, shape (n, combos)."""
    products = np.einsum("ncd,nmd->ncm", covectors, velocities)
    return np.max(-products - costs[:, None, :], axis=2)


def _restricted(sets: List[GeneratorSet], strata) -> Tuple[np.ndarray, np.ndarray]:
    """
    Padded generators of the tangential restrictions.

    An empty restriction gets zero velocity and infinite cost, so its
    Hamiltonian is -inf.
    """
    cache: Dict[Tuple[int, int], Optional[GeneratorSet]] = {}
    pieces = []
    for gs, stratum in zip(sets, strata):
        key = (id(gs), stratum.id)
        if key not in cache:
            cache[key] = tangential_restriction(gs, stratum).generators
        pieces.append(cache[key])
    width = max(len(piece) for piece in pieces if piece is not None) if any(
        piece is not None for piece in pieces) else 1
    dimension = sets[0].dimension
    velocities = np.zeros((len(sets), width, dimension))
    costs = np.full((len(sets), width), np.inf)
    for index, piece in enumerate(pieces):
        if piece is None:
            continue
        points = piece.points
        padded = np.concatenate([points, np.repeat(points[:1], width - len(piece), axis=0)], axis=0)
        velocities[index] = padded[:, :-1]
        costs[index] = padded[:, -1]
    return velocities, costs


class _ViscosityChecker:
    """Shared loop of the sub- and supersolution checks."""

    def __init__(self, grid: ValueGrid, prob: StratifiedProblem, kind: str, tol: Optional[float]):
        self.logger = get_module_logger("ViscosityCheck")
        self.grid = grid
        self.prob = prob
        self.kind = kind
        self.tol = default_tolerance(grid) if tol is None else float(tol)
        self.lattice = Lattice(grid, prob)

    def _sets(self, n: int) -> List[GeneratorSet]:
        lattice = self.lattice
        interior = lattice.interior
        return node_sets(self.prob, lattice.nodes[interior], lattice.positions[interior], self.grid.times[n - 1])

    def run(self) -> CheckReport:
        grid, prob, lattice = self.grid, self.prob, self.lattice
        strat = prob.strat
        dimension = grid.dimension
        report = CheckReport(check=f"viscosity_{self.kind}", tolerance=self.tol)
        groups = lattice.groups()
        interior_strata = [strat.strata[pos] for pos in lattice.positions[lattice.interior]]

        worst = {pos: (-np.inf, None, None) for pos in groups}
        failing = {pos: 0 for pos in groups}
        checked = {pos: 0 for pos in groups}
        autonomous = prob.bl_map.is_autonomous
        sets = None
        arrays = None
        self.logger.info(f"Viscosity {self.kind} check on {lattice.interior.size} interior nodes x "
                         f"{len(lattice.time_indices())} times (tol={self.tol:.6g})")

        for n in lattice.time_indices():
            if sets is None or not autonomous:
                sets = self._sets(n)
                if self.kind == "sub":
                    arrays = _restricted(sets, interior_strata)
                else:
                    padded = PaddedGenerators.from_sets(sets)
                    arrays = (padded.velocities, padded.costs)
            velocities, costs = arrays
            phi_t = lattice.time_derivative(n)
            forward, backward = lattice.differences(n - 1)

            for pos, members in groups.items():
                stratum = strat.strata[pos]
                if self.kind == "sub":
                    axes = stratum.tangent_axes if stratum.dim < dimension else tuple(range(dimension))
                    covectors = _candidates(forward[members], backward[members], axes, SUB_CHOICES, dimension)
                    values = phi_t[members][:, None] + _hamiltonians(velocities[members], costs[members], covectors)
                    residuals = values[:, 0]
                else:
                    covectors = _candidates(forward[members], backward[members], tuple(range(dimension)),
                                            SUPER_CHOICES, dimension)
                    values = phi_t[members][:, None] + _hamiltonians(velocities[members], costs[members], covectors)
                    residuals = -values.max(axis=1)

                checked[pos] += residuals.size
                failing[pos] += int(np.count_nonzero(residuals > self.tol))
                top = int(np.argmax(residuals))
                if residuals[top] > worst[pos][0]:
                    worst[pos] = (float(residuals[top]), int(lattice.interior[members[top]]), n)

        for pos in sorted(groups, key=lambda p: (strat.strata[p].dim, strat.strata[p].id)):
            stratum = strat.strata[pos]
            residual, node, n = worst[pos]
            if node is None:
                continue
            detail = {"nodes_checked": checked[pos], "failing_nodes": failing[pos]}
            location = lattice.nodes[node]
            if self.kind == "sub" and stratum.dim == 0:
                gs = prob.bl_map.evaluate_on(strat, stratum, location, grid.times[n - 1])
                detail["h0"] = hamiltonian_tangential(gs, stratum, np.zeros(dimension)).value
                detail["stationary_cost"] = stationary_cost(gs)
            report.add(self.kind, location, residual, time=grid.times[n], stratum_id=stratum.id,
                       dim=stratum.dim, **detail)

        report.summary = {
            "nodes_checked": int(sum(checked.values())),
            "failing_nodes": int(sum(failing.values())),
            "worst_by_dimension": {
                k: max((site.residual for site in report.sites if site.dim == k), default=None)
                for k in range(dimension + 1)
            },
        }
        if report.passed:
            self.logger.info(f"Viscosity {self.kind} check passed; max residual {report.max_residual:.3e}")
        else:
            self.logger.warning(f"Viscosity {self.kind} check failed at {report.summary['failing_nodes']} "
                                f"node-times; max residual {report.max_residual:.3e}")
        return report


def viscosity_sub_check(grid: ValueGrid, prob: StratifiedProblem, tol: Optional[float] = None) -> CheckReport:
    """
    Subsolution test with the tangential Hamiltonians.

    Args:
        grid: Computed value grid
        prob: Problem the grid was computed for
        tol: Residual tolerance; 10 (dx + dt) when omitted

    Returns:
        CheckReport with one site per stratum holding its worst residual

    Raises:
        ResolutionMismatch: the grid belongs to another box or horizon
        GridMisaligned: a stratum carries no lattice node
    """
    return _ViscosityChecker(grid, prob, "sub", tol).run()


def viscosity_super_check(grid: ValueGrid, prob: StratifiedProblem, tol: Optional[float] = None) -> CheckReport:
    """
    Supersolution test with the full Hamiltonian of the hull set.

    Args:
        grid: Computed value grid
        prob: Problem the grid was computed for
        tol: Residual tolerance; 10 (dx + dt) when omitted

    Returns:
        CheckReport with one site per stratum holding its worst residual
    """
    return _ViscosityChecker(grid, prob, "super", tol).run()
