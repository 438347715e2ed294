"""Shared fixtures: builtin problems and small hand-built line problems."""

import json
import logging

import numpy as np
import pytest

from stratified_hjb.core.application import Application
from stratified_hjb.core.settings import Settings
from stratified_hjb.data.builtins import builtin_problem, builtin_text
from stratified_hjb.dynamics.bl_map import BLMap, RegionRule
from stratified_hjb.dynamics.generators import GeneratorSet
from stratified_hjb.geometry.stratification import CellConstraint, FlatStratification, Stratum
from stratified_hjb.solver.problem import StratifiedProblem, TerminalCost


def line_strata(lower=-2.0, upper=2.0, split=True):
    """[lower, upper] split at the origin into {0}, left (id 1) and right (id 2), or one region (id 1)."""
    if not split:
        region = Stratum(id=1, dim=1, basepoint=[0.0], tangent_basis=[[1.0]], name="line")
        return FlatStratification(box_lower=[lower], box_upper=[upper], strata=(region,))
    return FlatStratification(
        box_lower=[lower],
        box_upper=[upper],
        strata=(
            Stratum(id=0, dim=0, basepoint=[0.0], tangent_basis=np.zeros((0, 1)), name="interface"),
            Stratum(id=1, dim=1, basepoint=[0.0], tangent_basis=[[1.0]],
                    cell=(CellConstraint(normal=(1.0,), offset=0.0, sense="<"),), name="left"),
            Stratum(id=2, dim=1, basepoint=[0.0], tangent_basis=[[1.0]],
                    cell=(CellConstraint(normal=(1.0,), offset=0.0, sense=">"),), name="right"),
        ),
    )


def line_problem(left, right=None, terminal=None, horizon=1.0, bound=np.inf, **map_options):
    """
    A problem on [-2, 2].

    left and right are rows [b, l]; without `right` the line is a single region.
    """
    strat = line_strata(split=right is not None)
    rules = {1: RegionRule(stratum_id=1, base=GeneratorSet.from_pairs(left))}
    if right is not None:
        rules[2] = RegionRule(stratum_id=2, base=GeneratorSet.from_pairs(right))
    bl_map = BLMap(rules, bound=bound, **map_options)
    terminal = terminal if terminal is not None else TerminalCost(kind="constant", value=0.0)
    return StratifiedProblem(strat=strat, bl_map=bl_map, terminal_cost=terminal, horizon=horizon)


def builtin_dict(name):
    """Builtin problem as a plain JSON dictionary, for editing."""
    return json.loads(builtin_text(name))


@pytest.fixture
def two_speed():
    return builtin_problem("two-speed-1d").build_problem()


@pytest.fixture
def two_cost():
    return builtin_problem("two-cost-1d").build_problem()


@pytest.fixture
def cross():
    return builtin_problem("cross").build_problem()


@pytest.fixture
def unit_cost_line():
    """Speeds 1 and 2 on either side of the origin, running cost 1, g = 0: U(x, t) = t."""
    return line_problem(left=[[-1.0, 1.0], [0.0, 1.0], [1.0, 1.0]],
                        right=[[-2.0, 1.0], [0.0, 1.0], [2.0, 1.0]])


@pytest.fixture
def app(tmp_path, monkeypatch):
    monkeypatch.setenv("STRATIFIED_HJB_HOME", str(tmp_path / "home"))
    return Application(logging.getLogger("stratified_hjb.tests"), settings=Settings(load_file=False))
