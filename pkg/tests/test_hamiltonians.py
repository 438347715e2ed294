"""Tests for the simplex routine, the Hamiltonians and the structural assumption checks."""

import itertools

import numpy as np
import pytest

from conftest import line_problem
from stratified_hjb.dynamics.bl_map import BLMap, RegionRule, ScaleSpec
from stratified_hjb.dynamics.generators import GeneratorSet
from stratified_hjb.hamiltonians.assumptions import check_lp_constant, check_nc, check_tc, max_normal_reach
from stratified_hjb.hamiltonians.hamiltonian import (hamiltonian_full, hamiltonian_full_many,
                                                     hamiltonian_tangential, stationary_cost)
from stratified_hjb.hamiltonians.simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, linprog_eq


def _brute_force_tangential(gs, normal, p):
    """max of -b.p - l over the hull cut by {normal.b = 0}, from members on the plane and pairwise crossings."""
    points = gs.points
    side = gs.velocities @ normal
    members = [points[i] for i in np.flatnonzero(np.abs(side) <= 1e-12)]
    for i, j in itertools.combinations(range(len(gs)), 2):
        if side[i] * side[j] < 0:
            w = side[i] / (side[i] - side[j])
            members.append((1.0 - w) * points[i] + w * points[j])
    if not members:
        return -np.inf
    members = np.array(members)
    return float(np.max(-members[:, :-1] @ p - members[:, -1]))


def test_linprog_optimal():
    result = linprog_eq(np.array([1.0, 2.0, 0.0]), np.array([[1.0, 1.0, 1.0]]), np.array([1.0]))
    assert result.status == OPTIMAL
    assert result.value == pytest.approx(2.0)
    assert np.allclose(result.x, [0.0, 1.0, 0.0])


def test_linprog_infeasible_and_unbounded():
    infeasible = linprog_eq(np.array([1.0, 1.0]), np.array([[1.0, 1.0]]), np.array([-1.0]))
    assert infeasible.status == INFEASIBLE
    assert not infeasible.feasible
    unbounded = linprog_eq(np.array([1.0, 0.0]), np.array([[1.0, -1.0]]), np.array([0.0]))
    assert unbounded.status == UNBOUNDED


def test_linprog_reports_ties():
    result = linprog_eq(np.array([1.0, 1.0]), np.array([[1.0, 1.0]]), np.array([1.0]))
    assert result.status == OPTIMAL
    assert result.value == pytest.approx(1.0)
    assert result.has_ties


def test_full_hamiltonian_is_max_over_generators():
    gs = GeneratorSet(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]), [0.5, 0.0, 1.0])
    rng = np.random.default_rng(0)
    covectors = rng.normal(size=(20, 2))
    many = hamiltonian_full_many(gs, covectors)
    for p, value in zip(covectors, many):
        expected = max(-b @ p - l for b, l in zip(gs.velocities, gs.costs))
        assert hamiltonian_full(gs, p).value == pytest.approx(expected)
        assert value == pytest.approx(expected)


def test_full_hamiltonian_ties_go_to_last_generator():
    gs = GeneratorSet(np.array([[1.0], [-1.0]]), [0.0, 0.0])
    result = hamiltonian_full(gs, [0.0])
    assert result.value == 0.0
    assert np.allclose(result.active_velocity, [-1.0])
    assert np.allclose(result.argmax, [0.0, 1.0])


def test_tangential_hamiltonian_matches_brute_force(cross):
    east = cross.strat.stratum(1)
    rng = np.random.default_rng(11)
    for _ in range(10):
        pairs = np.column_stack([rng.uniform(-2.0, 2.0, size=(5, 2)), rng.uniform(0.0, 1.0, size=5)])
        pairs[0, 1], pairs[1, 1] = 1.0, -1.0
        gs = GeneratorSet.from_pairs(pairs)
        p = rng.normal(size=2)
        value = hamiltonian_tangential(gs, east, p)
        assert value.is_finite
        assert value.value == pytest.approx(_brute_force_tangential(gs, np.array([0.0, 1.0]), p), abs=1e-9)
        assert abs(value.active_velocity[1]) < 1e-9


def test_tangential_hamiltonian_ignores_normal_covector(cross):
    east = cross.strat.stratum(1)
    gs = GeneratorSet.from_pairs([[1.0, 1.0, 0.0], [-1.0, -1.0, 0.5], [0.0, 0.0, 0.2]])
    first = hamiltonian_tangential(gs, east, [0.4, 0.0]).value
    second = hamiltonian_tangential(gs, east, [0.4, 7.0]).value
    assert first == pytest.approx(second)


def test_tangential_hamiltonian_empty_is_minus_infinity(cross):
    gs = GeneratorSet.from_pairs([[0.0, 1.0, 0.0], [1.0, 2.0, 0.0]])
    value = hamiltonian_tangential(gs, cross.strat.stratum(1), [1.0, 1.0])
    assert value.value == -np.inf
    assert not value.is_finite


def test_tangential_hamiltonian_on_region_is_full(cross):
    gs = GeneratorSet(np.array([[1.0, 0.0], [0.0, 1.0]]), [0.0, 0.5])
    p = np.array([-0.3, 0.8])
    assert hamiltonian_tangential(gs, cross.strat.stratum(5), p).value == pytest.approx(
        hamiltonian_full(gs, p).value)


def test_point_hamiltonian_is_minus_stationary_cost(cross):
    origin = cross.strat.stratum(0)
    gs = GeneratorSet(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]), [1.0, 2.0, 3.0, 4.0])
    assert stationary_cost(gs) == pytest.approx(1.5)
    for p in ([0.0, 0.0], [0.3, -0.7], [5.0, 5.0]):
        assert hamiltonian_tangential(gs, origin, p).value == pytest.approx(-1.5, abs=1e-9)


def test_stationary_cost_without_zero_velocity():
    gs = GeneratorSet(np.array([[1.0], [2.0]]), [0.0, 0.0])
    assert stationary_cost(gs) == np.inf


def test_max_normal_reach():
    gs = GeneratorSet(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 2.0], [0.0, -2.0]]), [0.0] * 4)
    assert max_normal_reach(gs, np.array([0.0, 1.0])) == pytest.approx(2.0)
    assert max_normal_reach(gs, np.array([1.0, 1.0]) / np.sqrt(2.0)) == pytest.approx(np.sqrt(2.0) * 2.0 / 3.0)


def test_check_nc_certifies_two_speed(two_speed):
    report = check_nc(two_speed.bl_map, two_speed.strat, delta_target=0.5, sample_density=8.0)
    assert report.passed
    assert report.nc_delta[0] == pytest.approx(0.5, abs=1e-3)
    assert report.summary["nc_delta_min"] == report.nc_delta[0]


def test_check_nc_fails_without_inward_velocity():
    problem = line_problem([[-1.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]])
    report = check_nc(problem.bl_map, problem.strat, delta_target=0.5, sample_density=8.0)
    assert not report.passed
    assert report.nc_delta[0] == 0.0
    failed = [site for site in report.failures() if site.label == "nc_bl"]
    assert failed and failed[0].location[0] > 0.0


def test_check_nc_rejects_bad_target(two_speed):
    with pytest.raises(ValueError):
        check_nc(two_speed.bl_map, two_speed.strat, delta_target=0.0, sample_density=8.0)


def test_check_tc_piecewise_constant(two_speed):
    report = check_tc(two_speed.bl_map, two_speed.strat, sample_density=8.0)
    assert report.passed
    assert report.summary["jumps"] == 0
    assert report.tc_constant == pytest.approx(0.0, abs=1e-9)


def test_check_tc_reports_jump_as_unbounded_fit():
    problem = line_problem([[-1.0, 0.0], [1.0, 0.0]], [[-1.0, 0.0], [1.0, 0.0]])
    rules = dict(problem.bl_map.rules)
    rules[2] = RegionRule(stratum_id=2, base=rules[2].base,
                          scale=ScaleSpec(kind="step", w=(1.0,), offset=1.0, low=1.0, high=2.0))
    report = check_tc(BLMap(rules), problem.strat, sample_density=4.0)
    assert not report.passed
    assert report.summary["C1"] == np.inf
    assert [site.stratum_id for site in report.failures()] == [2]


def test_check_tc_smooth_scale_has_finite_constant():
    problem = line_problem([[-1.0, 0.0], [1.0, 0.0]], [[-1.0, 0.0], [1.0, 0.0]])
    rules = {stratum_id: RegionRule(stratum_id=stratum_id, base=rule.base,
                                    scale=ScaleSpec(kind="affine", c0=1.5, a=(0.25,)))
             for stratum_id, rule in problem.bl_map.rules.items()}
    report = check_tc(BLMap(rules), problem.strat, sample_density=4.0)
    assert report.passed
    assert report.tc_bl_constant == pytest.approx(0.25, rel=1e-6)
    assert report.tc_constant == pytest.approx(0.25, rel=1e-6)


def test_check_lp_constant(two_speed, cross):
    for problem, speed in ((two_speed, 2.0), (cross, 2.0)):
        report = check_lp_constant(problem.bl_map, problem.strat, sample_density=4.0)
        assert report.passed
        assert report.lp_constant == pytest.approx(speed)
        assert report.summary["C3"] == report.lp_constant
        assert max(site.detail["local_C3"] for site in report.sites) == report.lp_constant
