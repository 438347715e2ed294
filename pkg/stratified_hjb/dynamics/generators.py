"""
Generator sets for Stratified HJB.

A GeneratorSet is a polytope in R^{N+1}: the convex hull of finitely many
dynamics-cost pairs (b, l). The TangentialRestriction of a set to a stratum keeps
the members whose velocity is tangent to the stratum. Queries on it are small
LPs in the mixture weights; its explicit generators are built on demand by
slicing the hull with the normal hyperplanes.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from stratified_hjb.core.errors import BoundViolation
from stratified_hjb.geometry.stratification import Stratum
from stratified_hjb.hamiltonians.simplex import OPTIMAL, LPResult, linprog_eq

DEDUP_TOL = 1e-12
TANGENTIAL_FEAS_FACTOR = 1e-10
MEMBERSHIP_TOL = 1e-9


def _dedup(points: np.ndarray) -> np.ndarray:
    """Drop generators within DEDUP_TOL of an earlier one, keeping first occurrences."""
    keep = np.ones(points.shape[0], dtype=bool)
    for i in range(1, points.shape[0]):
        earlier = points[:i][keep[:i]]
        if np.any(np.max(np.abs(earlier - points[i]), axis=1) <= DEDUP_TOL):
            keep[i] = False
    return points[keep].copy()


class GeneratorSet:
    """Convex hull of finitely many (b, l) generators."""

    def __init__(self, velocities: np.ndarray, costs: Sequence[float]):
        """
        Initialize the set.

        Args:
            velocities: Array (m, N) of generator velocities
            costs: Array (m,) of running costs
        """
        velocities = np.atleast_2d(np.asarray(velocities, dtype=float))
        costs = np.asarray(costs, dtype=float).reshape(-1)
        if velocities.shape[0] == 0 or velocities.shape[0] != costs.size:
            raise ValueError("A generator set needs one cost per velocity and at least one generator")
        if not (np.all(np.isfinite(velocities)) and np.all(np.isfinite(costs))):
            raise ValueError("Generators must be finite")
        points = _dedup(np.column_stack([velocities, costs]))
        self._points = points
        self._points.setflags(write=False)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "GeneratorSet":
        """Build a set from rows [b_1, ..., b_N, l]."""
        rows = np.atleast_2d(np.asarray(list(pairs), dtype=float))
        return cls(rows[:, :-1], rows[:, -1])

    @classmethod
    def from_points(cls, points: np.ndarray) -> "GeneratorSet":
        points = np.atleast_2d(points)
        return cls(points[:, :-1], points[:, -1])

    @property
    def points(self) -> np.ndarray:
        """Generators as rows (b, l) of shape (m, N+1)."""
        return self._points

    @property
    def velocities(self) -> np.ndarray:
        return self._points[:, :-1]

    @property
    def costs(self) -> np.ndarray:
        return self._points[:, -1]

    @property
    def dimension(self) -> int:
        return self._points.shape[1] - 1

    def __len__(self) -> int:
        return self._points.shape[0]

    @cached_property
    def max_speed(self) -> float:
        return float(np.max(np.linalg.norm(self.velocities, axis=1)))

    @cached_property
    def max_cost(self) -> float:
        return float(np.max(np.abs(self.costs)))

    def check_bound(self, bound: float, where: str = "") -> None:
        """Raise BoundViolation when a generator exceeds the global bound."""
        if self.max_speed > bound * (1 + 1e-12) or self.max_cost > bound * (1 + 1e-12):
            raise BoundViolation(f"Generator set{where} exceeds bound {bound}: "
                                 f"max|b|={self.max_speed:.6g}, max|l|={self.max_cost:.6g}")

    def support(self, direction: Sequence[float]) -> float:
        """Support function h(d) = max over the hull of d.(b, l)."""
        return float(np.max(self._points @ np.asarray(direction, dtype=float)))

    def union(self, other: "GeneratorSet") -> "GeneratorSet":
        """Generators of the convex hull of both sets."""
        return GeneratorSet.from_points(np.concatenate([self._points, other._points]))

    def scaled(self, velocity_factor: float, cost_factor: float = 1.0) -> "GeneratorSet":
        return GeneratorSet(self.velocities * velocity_factor, self.costs * cost_factor)

    def contains(self, b: Sequence[float], l: float, tol: float = MEMBERSHIP_TOL) -> bool:
        """Hull membership of the pair (b, l)."""
        target = np.append(np.asarray(b, dtype=float), float(l))
        return _hull_membership(self._points, target, tol)

    def contains_velocity(self, b: Sequence[float], tol: float = MEMBERSHIP_TOL) -> bool:
        """Membership of b in the velocity projection B = {b : (b, l) in hull}."""
        return _hull_membership(self.velocities, np.asarray(b, dtype=float), tol)

    def __repr__(self) -> str:
        return f"GeneratorSet({len(self)} generators in R^{self.dimension}+1)"


def _hull_membership(points: np.ndarray, target: np.ndarray, tol: float) -> bool:
    m = points.shape[0]
    matrix = np.vstack([points.T, np.ones((1, m))])
    rhs = np.append(target, 1.0)
    scale = max(1.0, float(np.max(np.abs(points))))
    result = linprog_eq(np.zeros(m), matrix, rhs, feas_tol=tol * scale)
    return result.status == OPTIMAL


@dataclass(frozen=True, eq=False)
class TangentialRestriction:
    """BL|_k = BL ∩ (T_x M^k x R), queried through LPs in the mixture weights."""

    base: GeneratorSet
    stratum: Stratum

    @cached_property
    def normal_rows(self) -> np.ndarray:
        """Rows (normal component of each generator velocity), shape (codim, m)."""
        return self.stratum.normal_basis @ self.base.velocities.T

    @cached_property
    def feas_tol(self) -> float:
        return max(TANGENTIAL_FEAS_FACTOR * self.base.max_speed, 1e-14)

    @property
    def is_full(self) -> bool:
        """True when the stratum is a region, so no normal constraint applies."""
        return self.stratum.codim == 0

    def constraints(self):
        """Equality system (A, b) on the mixture weights."""
        m = len(self.base)
        matrix = np.vstack([self.normal_rows, np.ones((1, m))])
        rhs = np.append(np.zeros(self.normal_rows.shape[0]), 1.0)
        return matrix, rhs

    def maximize(self, objective: np.ndarray) -> LPResult:
        """
        Maximize a linear objective over the mixture weights.

        Args:
            objective: Per-generator objective values (m,)

        Returns:
            LPResult in the mixture weights; status 'infeasible' when the restriction is empty
        """
        if self.is_full:
            index = int(np.argmax(objective))
            mu = np.zeros(len(self.base))
            mu[index] = 1.0
            ties = int(np.sum(objective >= objective[index])) > 1
            return LPResult(status=OPTIMAL, x=mu, value=float(objective[index]), has_ties=ties)
        matrix, rhs = self.constraints()
        return linprog_eq(objective, matrix, rhs, feas_tol=self.feas_tol)

    @cached_property
    def is_empty(self) -> bool:
        return not self.maximize(np.zeros(len(self.base))).feasible

    def support(self, direction: Sequence[float]) -> float:
        """Support function over the restriction; -inf when empty."""
        result = self.maximize(self.base.points @ np.asarray(direction, dtype=float))
        return result.value if result.status == OPTIMAL else -np.inf

    def contains(self, b: Sequence[float], l: float, tol: float = MEMBERSHIP_TOL) -> bool:
        b = np.asarray(b, dtype=float)
        normal = self.stratum.normal_basis @ b
        if normal.size and np.max(np.abs(normal)) > max(tol, self.feas_tol):
            return False
        return self.base.contains(b, l, tol)

    def point(self) -> Optional[np.ndarray]:
        """Some member (b, l), or None when empty."""
        result = self.maximize(np.zeros(len(self.base)))
        if result.status != OPTIMAL:
            return None
        return result.x @ self.base.points

    @cached_property
    def generators(self) -> Optional[GeneratorSet]:
        """
        Explicit generators of the restriction, or None when it is empty.

        The hull is cut by one normal hyperplane {n.b = 0} at a time. The cut
        of hull(G) is the hull of the members of G on the plane and of the
        crossing points of every pair on opposite sides.
        """
        if self.is_full:
            return self.base
        points = self.base.points
        dimension = self.base.dimension
        for normal in self.stratum.normal_basis:
            side = points[:, :dimension] @ normal
            on = np.abs(side) <= self.feas_tol
            above = np.flatnonzero(side > self.feas_tol)
            below = np.flatnonzero(side < -self.feas_tol)
            pieces = [points[on]]
            if above.size and below.size:
                i, j = np.meshgrid(above, below, indexing="ij")
                i, j = i.reshape(-1), j.reshape(-1)
                weight = (side[i] / (side[i] - side[j]))[:, None]
                pieces.append((1.0 - weight) * points[i] + weight * points[j])
            points = np.concatenate(pieces, axis=0)
            if points.shape[0] == 0:
                return None
            points[:, :dimension] -= np.outer(points[:, :dimension] @ normal, normal)
            points = prune_to_vertices(GeneratorSet.from_points(points)).points
        return GeneratorSet.from_points(points)


def tangential_restriction(gs: GeneratorSet, s: Stratum) -> TangentialRestriction:
    """Restriction of a generator set to velocities tangent to the stratum s."""
    return TangentialRestriction(base=gs, stratum=s)


def support_directions(dimension: int, extra: int = 16, seed: int = 0) -> np.ndarray:
    """
    Unit directions in R^dimension for sampled support-function comparisons.

    Coordinate directions, their pairwise diagonals and a seeded random batch.
    """
    eye = np.eye(dimension)
    directions = [eye, -eye]
    for i in range(dimension):
        for j in range(i + 1, dimension):
            for sign in (1.0, -1.0):
                directions.append(((eye[i] + sign * eye[j]) / np.sqrt(2.0))[None, :])
                directions.append(((-eye[i] - sign * eye[j]) / np.sqrt(2.0))[None, :])
    if extra:
        rng = np.random.default_rng(seed)
        batch = rng.normal(size=(extra, dimension))
        directions.append(batch / np.linalg.norm(batch, axis=1, keepdims=True))
    return np.concatenate(directions, axis=0)


def hausdorff_distance(first, second, directions: Optional[np.ndarray] = None) -> float:
    """
    Hausdorff distance between two convex sets through their support functions.

    Accepts GeneratorSets or TangentialRestrictions; exact for the chosen
    directions, a lower bound of the true distance otherwise.

    Args:
        first: Set with a support(direction) method
        second: Set with a support(direction) method
        directions: Unit directions (k, N+1); a default family when omitted

    Returns:
        max_d |h_first(d) - h_second(d)|, inf when exactly one set is empty
    """
    if directions is None:
        dim = _points_of(first).shape[1]
        directions = support_directions(dim)
    gaps = []
    for direction in directions:
        a = first.support(direction)
        b = second.support(direction)
        if np.isinf(a) and np.isinf(b):
            return 0.0
        if np.isinf(a) or np.isinf(b):
            return np.inf
        gaps.append(abs(a - b))
    return float(max(gaps)) if gaps else 0.0


def _points_of(item) -> np.ndarray:
    return item.points if isinstance(item, GeneratorSet) else item.base.points


def prune_to_vertices(gs: GeneratorSet) -> GeneratorSet:
    """
    Keep only the vertices of the hull.

    The generators are expressed in coordinates of their affine hull so that
    lower-dimensional sets can be handled by qhull.
    """
    points = gs.points
    if len(gs) <= 2:
        return gs
    centre = points.mean(axis=0)
    _, singular, vt = np.linalg.svd(points - centre, full_matrices=False)
    rank = int(np.sum(singular > 1e-10 * max(1.0, singular[0])))
    if rank == 0:
        return GeneratorSet.from_points(points[:1])
    coords = (points - centre) @ vt[:rank].T
    if rank == 1:
        keep = sorted({int(np.argmin(coords[:, 0])), int(np.argmax(coords[:, 0]))})
        return GeneratorSet.from_points(points[keep])
    if len(gs) <= rank + 1:
        return gs
    try:
        hull = ConvexHull(coords)
    except QhullError:
        return gs
    return GeneratorSet.from_points(points[np.sort(hull.vertices)])
