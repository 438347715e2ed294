"""
Stratified control problem for Stratified HJB.

This module contains the terminal cost g and the StratifiedProblem bundle
(stratification, dynamics-cost map, g, horizon T).
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from stratified_hjb.dynamics.bl_map import BLMap
from stratified_hjb.dynamics.generators import GeneratorSet
from stratified_hjb.geometry.stratification import FlatStratification

TERMINAL_KINDS = ("distance", "cone", "constant", "tabulated")


@dataclass(frozen=True, eq=False)
class TerminalCost:
    """
    Terminal cost g.

    kinds:
        distance   |x - target|
        cone       min(cap, slope |x - target|)
        constant   value
        tabulated  multilinear interpolation of `table` on a lattice over
                   [lower, upper], clamped to that lattice
    """

    kind: str
    target: Optional[tuple] = None
    slope: float = 1.0
    cap: float = np.inf
    value: float = 0.0
    lower: Optional[tuple] = None
    upper: Optional[tuple] = None
    table: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in TERMINAL_KINDS:
            raise ValueError(f"Unknown terminal cost kind {self.kind!r}; expected one of {TERMINAL_KINDS}")
        if self.kind in ("distance", "cone") and self.target is None:
            raise ValueError(f"Terminal cost '{self.kind}' needs a target point")
        if self.kind == "tabulated":
            if self.table is None or self.lower is None or self.upper is None:
                raise ValueError("Tabulated terminal cost needs table, lower and upper")
            table = np.asarray(self.table, dtype=float)
            if table.ndim != len(self.lower) or np.any(np.array(table.shape) < 2):
                raise ValueError("Tabulated terminal cost needs at least two values per axis")
            object.__setattr__(self, "table", table)

    def _interpolator(self) -> RegularGridInterpolator:
        axes = tuple(np.linspace(lo, hi, count) for lo, hi, count in zip(self.lower, self.upper, self.table.shape))
        return RegularGridInterpolator(axes, self.table, method="linear", bounds_error=False, fill_value=None)

    def values(self, points: np.ndarray) -> np.ndarray:
        """g at every row of points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "constant":
            return np.full(points.shape[0], float(self.value))
        if self.kind == "tabulated":
            clamped = np.clip(points, np.asarray(self.lower), np.asarray(self.upper))
            return self._interpolator()(clamped)
        distance = np.linalg.norm(points - np.asarray(self.target, dtype=float), axis=1)
        if self.kind == "distance":
            return distance
        return np.minimum(self.cap, self.slope * distance)

    def __call__(self, x: Sequence[float]) -> float:
        return float(self.values(np.asarray(x, dtype=float))[0])

    def sup_norm(self, strat: FlatStratification) -> float:
        """Upper bound of |g| over the box."""
        if self.kind == "constant":
            return abs(float(self.value))
        if self.kind == "tabulated":
            return float(np.max(np.abs(self.table)))
        corners = np.array(np.meshgrid(*zip(strat.box_lower, strat.box_upper), indexing="ij"))
        corners = corners.reshape(strat.dimension, -1).T
        return float(np.max(self.values(corners)))

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == "constant":
            return {"kind": "constant", "value": float(self.value)}
        if self.kind == "distance":
            return {"kind": "distance", "target": list(self.target)}
        if self.kind == "cone":
            return {"kind": "cone", "target": list(self.target), "slope": self.slope, "cap": self.cap}
        return {"kind": "tabulated", "lower": list(self.lower), "upper": list(self.upper),
                "values": self.table.tolist()}


@dataclass(frozen=True, eq=False)
class StratifiedProblem:
    """The full control problem."""

    strat: FlatStratification
    bl_map: BLMap
    terminal_cost: TerminalCost
    horizon: float
    name: str = ""
    notes: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.horizon) or self.horizon <= 0:
            raise ValueError("The horizon must be finite and positive")

    @property
    def bound(self) -> float:
        return self.bl_map.bound

    @property
    def dimension(self) -> int:
        return self.strat.dimension

    def evaluate(self, x: Sequence[float], t: float) -> GeneratorSet:
        return self.bl_map.evaluate(self.strat, x, t)

    def with_map(self, bl_map: BLMap) -> "StratifiedProblem":
        """Same problem with another dynamics-cost map."""
        return replace(self, bl_map=bl_map)

    def value_bound(self, max_cost: Optional[float] = None) -> float:
        """|g|_inf + T * M, with M replaced by max_cost when given."""
        m = self.bound if max_cost is None else max_cost
        return self.terminal_cost.sup_norm(self.strat) + self.horizon * m
