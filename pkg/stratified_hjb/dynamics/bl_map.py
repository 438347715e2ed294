"""
Piecewise dynamics-cost map for Stratified HJB.

Each open region carries a rule (a base generator list, optionally scaled by a
smooth or engineered factor of (x, t)); lower strata take the hull of the rules
of every adjacent region evaluated at the point, plus an optional stratum
specific list.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from stratified_hjb.core.errors import NoRuleForRegion
from stratified_hjb.dynamics.generators import GeneratorSet
from stratified_hjb.geometry.stratification import FlatStratification, Stratum
from stratified_hjb.utils.logging_utils import get_module_logger

HULL_OF_LIMITS = "hull-of-limits"
HULL_OF_LIMITS_UNION_SPECIFIC = "hull-of-limits-union-specific"
CLOSURE_MODES = (HULL_OF_LIMITS, HULL_OF_LIMITS_UNION_SPECIFIC)

SCALE_KINDS = ("none", "affine", "quadratic", "radial", "step")


@dataclass(frozen=True)
class ScaleSpec:
    """
    Scalar factor applied to a region's generators.

    kinds:
        none       1
        affine     c0 + a.x + a_t t
        quadratic  1 + sum w_i x_i^2
        radial     (1 + |x|^2)^(1/2)
        step       low if w.x < offset else high
    """

    kind: str = "none"
    c0: float = 1.0
    a: Optional[tuple] = None
    a_t: float = 0.0
    w: Optional[tuple] = None
    offset: float = 0.0
    low: float = 1.0
    high: float = 1.0

    def __post_init__(self):
        if self.kind not in SCALE_KINDS:
            raise ValueError(f"Unknown scale kind {self.kind!r}; expected one of {SCALE_KINDS}")

    @property
    def is_constant(self) -> bool:
        if self.kind == "none":
            return True
        if self.kind == "affine":
            return self.a_t == 0.0 and not np.any(np.asarray(self.a or (), dtype=float))
        return False

    @property
    def is_time_dependent(self) -> bool:
        return self.kind == "affine" and self.a_t != 0.0

    def factors(self, points: np.ndarray, t: float) -> np.ndarray:
        """Factor at each row of points, at time t."""
        points = np.atleast_2d(points)
        n = points.shape[0]
        if self.kind == "none":
            return np.ones(n)
        if self.kind == "affine":
            a = np.zeros(points.shape[1]) if self.a is None else np.asarray(self.a, dtype=float)
            return self.c0 + points @ a + self.a_t * t
        if self.kind == "quadratic":
            w = np.ones(points.shape[1]) if self.w is None else np.asarray(self.w, dtype=float)
            return 1.0 + (points ** 2) @ w
        if self.kind == "radial":
            return np.sqrt(1.0 + np.sum(points ** 2, axis=1))
        w = np.ones(points.shape[1]) if self.w is None else np.asarray(self.w, dtype=float)
        return np.where(points @ w < self.offset, self.low, self.high)

    def factor(self, x: Sequence[float], t: float) -> float:
        return float(self.factors(np.asarray(x, dtype=float), t)[0])

    def to_dict(self) -> dict:
        data = {"kind": self.kind}
        if self.kind == "affine":
            data.update({"c0": self.c0, "a": list(self.a or ()), "a_t": self.a_t})
        elif self.kind == "quadratic":
            data["w"] = None if self.w is None else list(self.w)
        elif self.kind == "step":
            data.update({"w": None if self.w is None else list(self.w), "offset": self.offset,
                         "low": self.low, "high": self.high})
        return data


@dataclass(frozen=True)
class RegionRule:
    """Generator rule of one open region, defined on its closure."""

    stratum_id: int
    base: GeneratorSet
    scale: ScaleSpec = field(default_factory=ScaleSpec)
    scale_costs: bool = False

    @property
    def is_constant(self) -> bool:
        return self.scale.is_constant

    def evaluate(self, x: Sequence[float], t: float) -> GeneratorSet:
        if self.scale.kind == "none":
            return self.base
        factor = self.scale.factor(x, t)
        return self.base.scaled(factor, factor if self.scale_costs else 1.0)


class BLMap:
    """Set-valued map BL(x, t), piecewise over the strata of a stratification."""

    def __init__(self, rules: Dict[int, RegionRule], specific: Optional[Dict[int, GeneratorSet]] = None,
                 closure_mode: str = HULL_OF_LIMITS, bound: float = np.inf):
        """
        Initialize the map.

        Args:
            rules: Region stratum id -> rule
            specific: Lower stratum id -> specific generator set
            closure_mode: 'hull-of-limits' or 'hull-of-limits-union-specific'
            bound: Global bound M on |b| and |l|
        """
        if closure_mode not in CLOSURE_MODES:
            raise ValueError(f"Unknown closure mode {closure_mode!r}; expected one of {CLOSURE_MODES}")
        self.logger = get_module_logger("BLMap")
        self.rules = dict(rules)
        self.specific = dict(specific or {})
        self.closure_mode = closure_mode
        self.bound = float(bound)
        self._cache: Dict[int, GeneratorSet] = {}

        if self.specific and closure_mode == HULL_OF_LIMITS:
            self.logger.warning("Stratum specific generators are ignored in 'hull-of-limits' mode")

    @property
    def is_piecewise_constant(self) -> bool:
        """True when every evaluation depends only on the stratum."""
        return all(rule.is_constant for rule in self.rules.values())

    @property
    def is_autonomous(self) -> bool:
        return not any(rule.scale.is_time_dependent for rule in self.rules.values())

    def _rule(self, region: Stratum) -> RegionRule:
        rule = self.rules.get(region.id)
        if rule is None:
            raise NoRuleForRegion(f"No dynamics rule for region {region.id}"
                                  f"{' (' + region.name + ')' if region.name else ''}")
        return rule

    def _assemble(self, strat: FlatStratification, stratum: Stratum, x: np.ndarray, t: float) -> GeneratorSet:
        if stratum.dim == strat.dimension:
            result = self._rule(stratum).evaluate(x, t)
        else:
            regions = strat.adjacent_regions(x)
            if not regions:
                raise NoRuleForRegion(f"No region is adjacent to stratum {stratum.id} at {x.tolist()}")
            pieces = [self._rule(region).evaluate(x, t).points for region in regions]
            if self.closure_mode == HULL_OF_LIMITS_UNION_SPECIFIC and stratum.id in self.specific:
                pieces.append(self.specific[stratum.id].points)
            result = GeneratorSet.from_points(np.concatenate(pieces, axis=0))
        where = f" at {np.round(x, 12).tolist()} (stratum {stratum.id})"
        result.check_bound(self.bound, where)
        return result

    def evaluate_on(self, strat: FlatStratification, stratum: Stratum, x: Sequence[float],
                    t: float) -> GeneratorSet:
        """Evaluate at a point already located on `stratum`."""
        if self.is_piecewise_constant:
            cached = self._cache.get(stratum.id)
            if cached is None:
                cached = self._assemble(strat, stratum, np.asarray(x, dtype=float), t)
                self._cache[stratum.id] = cached
            return cached
        return self._assemble(strat, stratum, np.asarray(x, dtype=float), t)

    def evaluate(self, strat: FlatStratification, x: Sequence[float], t: float) -> GeneratorSet:
        """
        Evaluate BL(x, t).

        Args:
            strat: Stratification the map is defined over
            x: Point in the box
            t: Time

        Returns:
            The region set inside a region; on a lower stratum the hull of every
            adjacent region's set at x, with the specific set in union mode
        """
        return self.evaluate_on(strat, strat.locate(x), x, t)

    def evaluate_many(self, strat: FlatStratification, points: np.ndarray, t: float) -> List[GeneratorSet]:
        """Evaluate at every row of points."""
        points = np.atleast_2d(points)
        positions = strat.locate_many(points)
        return [self.evaluate_on(strat, strat.strata[pos], point, t)
                for pos, point in zip(positions, points)]


def evaluate(bl_map: BLMap, strat: FlatStratification, x: Sequence[float], t: float) -> GeneratorSet:
    """Evaluate the dynamics-cost set at (x, t)."""
    return bl_map.evaluate(strat, x, t)
