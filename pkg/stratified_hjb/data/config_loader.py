"""
Problem configuration for Stratified HJB.

This module contains the ProblemConfig class that parses, validates and
serializes the JSON problem files:

    {
      "name": "cross",
      "dimension": 2,
      "box": {"lower": [-1, -1], "upper": [1, 1]},
      "strata": [
        {"id": 0, "dim": 0, "basepoint": [0, 0]},
        {"id": 1, "dim": 1, "basepoint": [0, 0], "basis": [[1, 0]],
         "cell": [{"normal": [1, 0], "offset": 0, "sense": ">"}]},
        ...
      ],
      "dynamics": {
        "closure_mode": "hull-of-limits",
        "bound": 2.0,
        "regions": [{"stratum": 5, "generators": [[1, 0, 1], ...],
                     "scale": {"kind": "none"}, "scale_costs": false}],
        "specific": [{"stratum": 0, "generators": [[0, 0, 0.5]]}]
      },
      "terminal_cost": {"kind": "distance", "target": [0.3, 0.2]},
      "horizon": 0.5,
      "solver": {"dx": 0.02, "dt": 0.01},
      "checks": {"seed": 0, "sample_density": 8, ...},
      "notes": {...}
    }

A generator is [b_1, ..., b_N, l]. Every parse error names the dotted field
path; JSON syntax errors also carry the line and column.

JSON has no comments, so provenance of the numbers (where they came from,
whether they are artifact defaults) goes in the free-form `notes` object. It is
kept through parsing and written back unchanged.
"""

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from stratified_hjb.core.errors import ConfigError
from stratified_hjb.dynamics.bl_map import CLOSURE_MODES, HULL_OF_LIMITS, SCALE_KINDS, BLMap, RegionRule, ScaleSpec
from stratified_hjb.dynamics.generators import GeneratorSet
from stratified_hjb.geometry.stratification import CellConstraint, FlatStratification, Stratum
from stratified_hjb.solver.problem import TERMINAL_KINDS, StratifiedProblem, TerminalCost
from stratified_hjb.utils.logging_utils import get_module_logger

BUILTIN_PREFIX = "builtin:"


def _fail(path: str, message: str) -> ConfigError:
    return ConfigError(path or "<root>", message)


def _join(path: str, key: Any) -> str:
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else str(key)


def _mapping(value: Any, path: str) -> Dict[str, Any]:
    if not isinstance(value, dict):
        raise _fail(path, f"expected an object, got {type(value).__name__}")
    return value


def _require(data: Dict[str, Any], key: str, path: str) -> Any:
    if key not in data:
        raise _fail(_join(path, key), "missing required field")
    return data[key]


def _number(value: Any, path: str, positive: bool = False, allow_inf: bool = False) -> float:
    if value is None and allow_inf:
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _fail(path, f"expected a number, got {value!r}")
    number = float(value)
    if not math.isfinite(number):
        raise _fail(path, "must be finite")
    if positive and number <= 0:
        raise _fail(path, f"must be positive, got {number}")
    return number


def _integer(value: Any, path: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise _fail(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise _fail(path, f"must be at least {minimum}, got {value}")
    return value


def _vector(value: Any, path: str, length: Optional[int] = None) -> Tuple[float, ...]:
    if not isinstance(value, list):
        raise _fail(path, f"expected a list of numbers, got {value!r}")
    if length is not None and len(value) != length:
        raise _fail(path, f"expected {length} entries, got {len(value)}")
    return tuple(_number(item, _join(path, i)) for i, item in enumerate(value))


def _generators(value: Any, path: str, dimension: int) -> GeneratorSet:
    if not isinstance(value, list) or not value:
        raise _fail(path, "expected a non-empty list of generators [b_1, ..., b_N, l]")
    rows = [_vector(row, _join(path, i), dimension + 1) for i, row in enumerate(value)]
    return GeneratorSet.from_points(np.array(rows, dtype=float))


def _plain(value: Any) -> Any:
    """Numbers as JSON-friendly floats, infinity as None."""
    if isinstance(value, float) and math.isinf(value):
        return None
    return value


def _generator_rows(gs: GeneratorSet) -> List[List[float]]:
    return [[float(v) for v in row] for row in gs.points]


@dataclass
class SolverParams:
    """Resolution of the semi-Lagrangian solve."""

    dx: float
    dt: float


@dataclass
class CheckParams:
    """Parameters of the validators, checks and studies."""

    seed: int = 0
    sample_density: float = 8.0
    nc_delta_target: float = 0.1
    tolerance_factor: float = 10.0
    times: Tuple[float, ...] = (0.0,)
    eps_list: Tuple[float, ...] = ()
    samples_per_eps: int = 3
    filippov_tolerance: float = 0.1
    refinement: Tuple[Tuple[float, float], ...] = ()
    dpp_tau_steps: Tuple[int, ...] = (1, 2, 4)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "sample_density": self.sample_density,
            "nc_delta_target": self.nc_delta_target,
            "tolerance_factor": self.tolerance_factor,
            "times": list(self.times),
            "eps_list": list(self.eps_list),
            "samples_per_eps": self.samples_per_eps,
            "filippov_tolerance": self.filippov_tolerance,
            "refinement": [list(level) for level in self.refinement],
            "dpp_tau_steps": list(self.dpp_tau_steps),
        }


@dataclass
class ProblemConfig:
    """A parsed problem file."""

    dimension: int
    box_lower: Tuple[float, ...]
    box_upper: Tuple[float, ...]
    strata: List[Stratum]
    regions: List[RegionRule]
    terminal_cost: TerminalCost
    horizon: float
    solver: SolverParams
    specific: Dict[int, GeneratorSet] = field(default_factory=dict)
    closure_mode: str = HULL_OF_LIMITS
    bound: Optional[float] = None
    checks: CheckParams = field(default_factory=CheckParams)
    name: str = ""
    notes: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ProblemConfig":
        """
        Parse and validate a configuration dictionary.

        Args:
            data: Decoded JSON document

        Returns:
            ProblemConfig

        Raises:
            ConfigError: with the dotted path of the offending field
        """
        data = _mapping(data, "")
        dimension = _integer(_require(data, "dimension", ""), "dimension", minimum=1)
        box = _mapping(_require(data, "box", ""), "box")
        lower = _vector(_require(box, "lower", "box"), "box.lower", dimension)
        upper = _vector(_require(box, "upper", "box"), "box.upper", dimension)
        if any(hi <= lo for lo, hi in zip(lower, upper)):
            raise _fail("box", "every upper bound must exceed its lower bound")

        strata = cls._parse_strata(_require(data, "strata", ""), dimension)
        ids = {s.id: s for s in strata}

        dynamics = _mapping(_require(data, "dynamics", ""), "dynamics")
        closure_mode = dynamics.get("closure_mode", HULL_OF_LIMITS)
        if closure_mode not in CLOSURE_MODES:
            raise _fail("dynamics.closure_mode", f"expected one of {list(CLOSURE_MODES)}, got {closure_mode!r}")
        bound = None
        if dynamics.get("bound") is not None:
            bound = _number(dynamics["bound"], "dynamics.bound", positive=True)
        regions = cls._parse_regions(_require(dynamics, "regions", "dynamics"), ids, dimension)
        specific = cls._parse_specific(dynamics.get("specific", []), ids, dimension)

        terminal_cost = cls._parse_terminal(_require(data, "terminal_cost", ""), dimension)
        horizon = _number(_require(data, "horizon", ""), "horizon", positive=True)
        solver_data = _mapping(_require(data, "solver", ""), "solver")
        solver = SolverParams(
            dx=_number(_require(solver_data, "dx", "solver"), "solver.dx", positive=True),
            dt=_number(_require(solver_data, "dt", "solver"), "solver.dt", positive=True),
        )
        checks = cls._parse_checks(data.get("checks", {}))
        notes = data.get("notes", {})
        if not isinstance(notes, dict):
            raise _fail("notes", "expected an object")
        name = data.get("name", "")
        if not isinstance(name, str):
            raise _fail("name", "expected a string")

        return cls(dimension=dimension, box_lower=lower, box_upper=upper, strata=strata, regions=regions,
                   terminal_cost=terminal_cost, horizon=horizon, solver=solver, specific=specific,
                   closure_mode=closure_mode, bound=bound, checks=checks, name=name, notes=dict(notes))

    @staticmethod
    def _parse_strata(value: Any, dimension: int) -> List[Stratum]:
        if not isinstance(value, list) or not value:
            raise _fail("strata", "expected a non-empty list of strata")
        strata = []
        seen = set()
        for index, item in enumerate(value):
            path = _join("strata", index)
            item = _mapping(item, path)
            stratum_id = _integer(_require(item, "id", path), _join(path, "id"), minimum=0)
            if stratum_id in seen:
                raise _fail(_join(path, "id"), f"duplicate stratum id {stratum_id}")
            seen.add(stratum_id)
            dim = _integer(_require(item, "dim", path), _join(path, "dim"), minimum=0)
            if dim > dimension:
                raise _fail(_join(path, "dim"), f"exceeds the space dimension {dimension}")
            basepoint = _vector(item.get("basepoint", [0.0] * dimension), _join(path, "basepoint"), dimension)
            if dim == dimension and "basis" not in item:
                basis = [tuple(row) for row in np.eye(dimension)]
            else:
                rows = item.get("basis", [])
                if not isinstance(rows, list) or len(rows) != dim:
                    raise _fail(_join(path, "basis"), f"expected {dim} basis vectors")
                basis = [_vector(row, _join(_join(path, "basis"), i), dimension) for i, row in enumerate(rows)]
            cell = []
            for c_index, constraint in enumerate(item.get("cell", [])):
                c_path = _join(_join(path, "cell"), c_index)
                constraint = _mapping(constraint, c_path)
                sense = constraint.get("sense", ">")
                if sense not in (">", "<"):
                    raise _fail(_join(c_path, "sense"), f"expected '>' or '<', got {sense!r}")
                cell.append(CellConstraint(
                    normal=_vector(_require(constraint, "normal", c_path), _join(c_path, "normal"), dimension),
                    offset=_number(constraint.get("offset", 0.0), _join(c_path, "offset")),
                    sense=sense,
                ))
            name = item.get("name", "")
            try:
                strata.append(Stratum(id=stratum_id, dim=dim, basepoint=np.array(basepoint),
                                      tangent_basis=np.array(basis, dtype=float).reshape(dim, dimension),
                                      cell=tuple(cell), name=str(name)))
            except ValueError as e:
                raise _fail(path, str(e)) from e
        return strata

    @staticmethod
    def _parse_scale(value: Any, path: str, dimension: int) -> ScaleSpec:
        value = _mapping(value, path)
        kind = value.get("kind", "none")
        if kind not in SCALE_KINDS:
            raise _fail(_join(path, "kind"), f"expected one of {list(SCALE_KINDS)}, got {kind!r}")
        options: Dict[str, Any] = {"kind": kind}
        for key in ("c0", "a_t", "offset", "low", "high"):
            if key in value:
                options[key] = _number(value[key], _join(path, key))
        for key in ("a", "w"):
            if value.get(key) is not None:
                options[key] = _vector(value[key], _join(path, key), dimension)
        return ScaleSpec(**options)

    @classmethod
    def _parse_regions(cls, value: Any, ids: Dict[int, Stratum], dimension: int) -> List[RegionRule]:
        if not isinstance(value, list) or not value:
            raise _fail("dynamics.regions", "expected a non-empty list of region rules")
        rules = []
        seen = set()
        for index, item in enumerate(value):
            path = _join("dynamics.regions", index)
            item = _mapping(item, path)
            stratum_id = _integer(_require(item, "stratum", path), _join(path, "stratum"))
            stratum = ids.get(stratum_id)
            if stratum is None:
                raise _fail(_join(path, "stratum"), f"unknown stratum id {stratum_id}")
            if stratum.dim != dimension:
                raise _fail(_join(path, "stratum"), f"stratum {stratum_id} is not an open region")
            if stratum_id in seen:
                raise _fail(_join(path, "stratum"), f"region {stratum_id} has two rules")
            seen.add(stratum_id)
            scale_costs = item.get("scale_costs", False)
            if not isinstance(scale_costs, bool):
                raise _fail(_join(path, "scale_costs"), "expected true or false")
            rules.append(RegionRule(
                stratum_id=stratum_id,
                base=_generators(_require(item, "generators", path), _join(path, "generators"), dimension),
                scale=cls._parse_scale(item.get("scale", {"kind": "none"}), _join(path, "scale"), dimension),
                scale_costs=scale_costs,
            ))
        return rules

    @staticmethod
    def _parse_specific(value: Any, ids: Dict[int, Stratum], dimension: int) -> Dict[int, GeneratorSet]:
        if not isinstance(value, list):
            raise _fail("dynamics.specific", "expected a list")
        specific = {}
        for index, item in enumerate(value):
            path = _join("dynamics.specific", index)
            item = _mapping(item, path)
            stratum_id = _integer(_require(item, "stratum", path), _join(path, "stratum"))
            stratum = ids.get(stratum_id)
            if stratum is None:
                raise _fail(_join(path, "stratum"), f"unknown stratum id {stratum_id}")
            if stratum.dim == dimension:
                raise _fail(_join(path, "stratum"), "specific sets belong to lower strata")
            gs = _generators(_require(item, "generators", path), _join(path, "generators"), dimension)
            velocities = gs.velocities
            tangential = velocities - velocities @ stratum.projector
            if np.max(np.abs(tangential)) > 1e-9:
                raise _fail(_join(path, "generators"), f"velocities must be tangent to stratum {stratum_id}")
            specific[stratum_id] = gs
        return specific

    @staticmethod
    def _parse_terminal(value: Any, dimension: int) -> TerminalCost:
        value = _mapping(value, "terminal_cost")
        kind = _require(value, "kind", "terminal_cost")
        if kind not in TERMINAL_KINDS:
            raise _fail("terminal_cost.kind", f"expected one of {list(TERMINAL_KINDS)}, got {kind!r}")
        if kind == "constant":
            return TerminalCost(kind="constant", value=_number(value.get("value", 0.0), "terminal_cost.value"))
        if kind in ("distance", "cone"):
            target = _vector(_require(value, "target", "terminal_cost"), "terminal_cost.target", dimension)
            if kind == "distance":
                return TerminalCost(kind="distance", target=target)
            return TerminalCost(kind="cone", target=target,
                                slope=_number(value.get("slope", 1.0), "terminal_cost.slope"),
                                cap=_number(value.get("cap"), "terminal_cost.cap", allow_inf=True))
        lower = _vector(_require(value, "lower", "terminal_cost"), "terminal_cost.lower", dimension)
        upper = _vector(_require(value, "upper", "terminal_cost"), "terminal_cost.upper", dimension)
        try:
            table = np.array(_require(value, "values", "terminal_cost"), dtype=float)
        except (TypeError, ValueError) as e:
            raise _fail("terminal_cost.values", f"expected a rectangular array of numbers ({e})") from e
        if not np.all(np.isfinite(table)):
            raise _fail("terminal_cost.values", "must be finite")
        try:
            return TerminalCost(kind="tabulated", lower=lower, upper=upper, table=table)
        except ValueError as e:
            raise _fail("terminal_cost.values", str(e)) from e

    @staticmethod
    def _parse_checks(value: Any) -> CheckParams:
        value = _mapping(value, "checks")
        defaults = CheckParams()
        path = "checks"
        refinement = []
        for index, level in enumerate(value.get("refinement", [])):
            pair = _vector(level, _join(_join(path, "refinement"), index), 2)
            refinement.append((pair[0], pair[1]))
        tau_steps = value.get("dpp_tau_steps", list(defaults.dpp_tau_steps))
        if not isinstance(tau_steps, list):
            raise _fail(_join(path, "dpp_tau_steps"), "expected a list of integers")
        return CheckParams(
            seed=_integer(value.get("seed", defaults.seed), _join(path, "seed"), minimum=0),
            sample_density=_number(value.get("sample_density", defaults.sample_density),
                                   _join(path, "sample_density"), positive=True),
            nc_delta_target=_number(value.get("nc_delta_target", defaults.nc_delta_target),
                                    _join(path, "nc_delta_target"), positive=True),
            tolerance_factor=_number(value.get("tolerance_factor", defaults.tolerance_factor),
                                     _join(path, "tolerance_factor"), positive=True),
            times=_vector(value.get("times", list(defaults.times)), _join(path, "times")),
            eps_list=_vector(value.get("eps_list", []), _join(path, "eps_list")),
            samples_per_eps=_integer(value.get("samples_per_eps", defaults.samples_per_eps),
                                     _join(path, "samples_per_eps"), minimum=1),
            filippov_tolerance=_number(value.get("filippov_tolerance", defaults.filippov_tolerance),
                                       _join(path, "filippov_tolerance"), positive=True),
            refinement=tuple(refinement),
            dpp_tau_steps=tuple(_integer(v, _join(_join(path, "dpp_tau_steps"), i), minimum=1)
                                for i, v in enumerate(tau_steps)),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Canonical form; from_dict(to_dict()) rebuilds an equal configuration."""
        strata = []
        for stratum in sorted(self.strata, key=lambda s: s.id):
            entry: Dict[str, Any] = {"id": stratum.id, "dim": stratum.dim,
                                     "basepoint": [float(v) for v in stratum.basepoint]}
            if stratum.dim:
                entry["basis"] = [[float(v) for v in row] for row in stratum.tangent_basis]
            if stratum.cell:
                entry["cell"] = [{"normal": [float(v) for v in c.normal], "offset": float(c.offset),
                                  "sense": c.sense} for c in stratum.cell]
            if stratum.name:
                entry["name"] = stratum.name
            strata.append(entry)
        regions = [{"stratum": rule.stratum_id, "generators": _generator_rows(rule.base),
                    "scale": rule.scale.to_dict(), "scale_costs": rule.scale_costs}
                   for rule in sorted(self.regions, key=lambda r: r.stratum_id)]
        specific = [{"stratum": stratum_id, "generators": _generator_rows(gs)}
                    for stratum_id, gs in sorted(self.specific.items())]
        terminal = {key: _plain(value) for key, value in self.terminal_cost.to_dict().items()}
        return {
            "name": self.name,
            "dimension": self.dimension,
            "box": {"lower": list(self.box_lower), "upper": list(self.box_upper)},
            "strata": strata,
            "dynamics": {"closure_mode": self.closure_mode, "bound": self.bound,
                         "regions": regions, "specific": specific},
            "terminal_cost": terminal,
            "horizon": self.horizon,
            "solver": {"dx": self.solver.dx, "dt": self.solver.dt},
            "checks": self.checks.to_dict(),
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def stratification(self) -> FlatStratification:
        return FlatStratification(box_lower=np.array(self.box_lower), box_upper=np.array(self.box_upper),
                                  strata=tuple(self.strata))

    def effective_bound(self) -> float:
        """The configured bound, or the largest |b| and |l| over the generators when every scale is constant."""
        if self.bound is not None:
            return self.bound
        if not all(rule.scale.is_constant for rule in self.regions):
            return math.inf
        sets = [rule.base.scaled(rule.scale.c0, rule.scale.c0 if rule.scale_costs else 1.0)
                if rule.scale.kind == "affine" else rule.base for rule in self.regions]
        sets.extend(self.specific.values())
        return max(max(gs.max_speed, gs.max_cost) for gs in sets)

    def build_problem(self) -> StratifiedProblem:
        """
        Assemble the StratifiedProblem.

        Raises:
            ConfigError: a region has no rule
        """
        strat = self.stratification()
        ruled = {rule.stratum_id for rule in self.regions}
        for region in strat.regions:
            if region.id not in ruled:
                raise _fail("dynamics.regions", f"region {region.id} has no rule")
        bl_map = BLMap(rules={rule.stratum_id: rule for rule in self.regions}, specific=self.specific,
                       closure_mode=self.closure_mode, bound=self.effective_bound())
        return StratifiedProblem(strat=strat, bl_map=bl_map, terminal_cost=self.terminal_cost,
                                 horizon=self.horizon, name=self.name, notes=dict(self.notes))


def parse_config_text(text: str) -> ProblemConfig:
    """
    Parse JSON text into a ProblemConfig.

    Raises:
        ConfigError: JSON syntax errors carry line and column
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("<document>", e.msg, line=e.lineno, column=e.colno) from e
    return ProblemConfig.from_dict(data)


def load_config(source: str) -> ProblemConfig:
    """
    Load a configuration file, or a builtin when source is 'builtin:<name>'.

    Args:
        source: File path or builtin reference

    Returns:
        ProblemConfig
    """
    logger = get_module_logger("ConfigLoader")
    if source.startswith(BUILTIN_PREFIX):
        from stratified_hjb.data.builtins import builtin_problem

        name = source[len(BUILTIN_PREFIX):]
        logger.info(f"Using builtin problem {name}")
        return builtin_problem(name)

    if not os.path.exists(source):
        raise ConfigError("<document>", f"Config file not found: {source}")
    logger.info(f"Loading config: {source}")
    try:
        with open(source, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError("<document>", f"Cannot read {source}: {e}") from e
    config = parse_config_text(text)
    if not config.name:
        config.name = os.path.splitext(os.path.basename(source))[0]
    return config


def check_tolerance(config: ProblemConfig, dx: float, dt: float, factor: Optional[float] = None) -> float:
    """Viscosity tolerance factor (dx + dt), the factor defaulting to the configured one."""
    return (config.checks.tolerance_factor if factor is None else factor) * (dx + dt)


def ladder_from(config: ProblemConfig) -> Sequence[Tuple[float, float]]:
    """The configured refinement ladder, or three halvings of the solver resolution."""
    if config.checks.refinement:
        return list(config.checks.refinement)
    dx, dt = config.solver.dx, config.solver.dt
    return [(dx, dt), (dx / 2, dt / 2), (dx / 4, dt / 4)]
