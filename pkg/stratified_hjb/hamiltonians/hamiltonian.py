"""
Hamiltonians for Stratified HJB.

H(x,t,p)   = max over BL(x,t)            of  -b.p - l
H^k(x,t,p) = max over BL(x,t) with b in V_k  of  -b.p - l

The full Hamiltonian is a max of linear functions, attained at a generator. The
tangential one is an LP in the mixture weights (see TangentialRestriction).
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from stratified_hjb.dynamics.generators import GeneratorSet, tangential_restriction
from stratified_hjb.geometry.stratification import Stratum
from stratified_hjb.hamiltonians.simplex import OPTIMAL, lexicographic_optimum, linprog_eq

NEG_INFINITY = -np.inf


@dataclass
class HamiltonianValue:
    """Value of a Hamiltonian together with an optimizer."""

    value: float
    argmax: Optional[np.ndarray] = None
    active_velocity: Optional[np.ndarray] = None
    active_cost: Optional[float] = None

    @property
    def is_finite(self) -> bool:
        return bool(np.isfinite(self.value))


def _from_weights(gs: GeneratorSet, mu: np.ndarray, p: np.ndarray) -> HamiltonianValue:
    velocity = mu @ gs.velocities
    cost = float(mu @ gs.costs)
    return HamiltonianValue(value=float(-velocity @ p - cost), argmax=mu,
                            active_velocity=velocity, active_cost=cost)


def hamiltonian_full(gs: GeneratorSet, p: Sequence[float]) -> HamiltonianValue:
    """
    Full Hamiltonian H(p) = max over generators of -b.p - l.

    Ties go to the last maximizing generator, i.e. the lexicographically
    smallest unit weight vector.
    """
    p = np.asarray(p, dtype=float)
    values = -gs.velocities @ p - gs.costs
    best = values.max()
    index = int(np.flatnonzero(values == best)[-1])
    mu = np.zeros(len(gs))
    mu[index] = 1.0
    return _from_weights(gs, mu, p)


def hamiltonian_full_many(gs: GeneratorSet, covectors: np.ndarray) -> np.ndarray:
    """H at every row of covectors."""
    covectors = np.atleast_2d(covectors)
    return np.max(-covectors @ gs.velocities.T - gs.costs[None, :], axis=1)


def hamiltonian_tangential(gs: GeneratorSet, s: Stratum, p: Sequence[float]) -> HamiltonianValue:
    """
    Tangential Hamiltonian H^k on the stratum s.

    Args:
        gs: Dynamics-cost set at the point
        s: Stratum through the point
        p: Covector; only its tangential part enters

    Returns:
        HamiltonianValue; value is -inf when no member of the hull is tangent to s
    """
    p_top, _ = s.split_covector(p)
    if s.codim == 0:
        return hamiltonian_full(gs, p_top)

    restriction = tangential_restriction(gs, s)
    objective = -gs.velocities @ p_top - gs.costs
    result = restriction.maximize(objective)
    if result.status != OPTIMAL:
        return HamiltonianValue(value=NEG_INFINITY)

    mu = result.x
    if result.has_ties:
        matrix, rhs = restriction.constraints()
        refined = lexicographic_optimum(objective, matrix, rhs, result.value, feas_tol=restriction.feas_tol)
        if refined is not None:
            mu = refined
    mu = np.clip(mu, 0.0, None)
    mu = mu / mu.sum()
    return _from_weights(gs, mu, p_top)


def stationary_cost(gs: GeneratorSet) -> float:
    """
    Smallest running cost among members with zero velocity.

    Returns:
        min { l : (0, l) in hull }, or inf when 0 is not an admissible velocity
    """
    m = len(gs)
    matrix = np.vstack([gs.velocities.T, np.ones((1, m))])
    rhs = np.append(np.zeros(gs.dimension), 1.0)
    feas_tol = max(1e-10 * gs.max_speed, 1e-14)
    result = linprog_eq(-gs.costs, matrix, rhs, feas_tol=feas_tol)
    if result.status != OPTIMAL:
        return np.inf
    return float(result.x @ gs.costs)
