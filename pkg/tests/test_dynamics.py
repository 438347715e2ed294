"""Tests for generator sets, the dynamics-cost map, Filippov regularization and check_adapted."""

import numpy as np
import pytest

from conftest import line_problem
from stratified_hjb.core.errors import BoundViolation, NoRuleForRegion
from stratified_hjb.dynamics.adapted import check_adapted
from stratified_hjb.dynamics.bl_map import (HULL_OF_LIMITS, HULL_OF_LIMITS_UNION_SPECIFIC, BLMap, RegionRule,
                                            ScaleSpec)
from stratified_hjb.dynamics.filippov import FilippovMap, filippov_regularize
from stratified_hjb.dynamics.generators import (GeneratorSet, hausdorff_distance, prune_to_vertices,
                                                support_directions, tangential_restriction)


def _square_set():
    """Velocities (+-1, +-1) in the plane with costs 0, 1, 2, 3."""
    return GeneratorSet(np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]), [0.0, 1.0, 2.0, 3.0])


def _east_ray(cross):
    return cross.strat.stratum(1)


def test_generator_set_drops_duplicates():
    gs = GeneratorSet.from_pairs([[1.0, 0.5], [1.0, 0.5], [-1.0, 0.0]])
    assert len(gs) == 2
    assert gs.dimension == 1
    assert np.allclose(gs.points, [[1.0, 0.5], [-1.0, 0.0]])


def test_generator_set_rejects_bad_input():
    with pytest.raises(ValueError):
        GeneratorSet(np.zeros((0, 2)), [])
    with pytest.raises(ValueError):
        GeneratorSet(np.array([[np.nan]]), [0.0])


def test_membership():
    gs = _square_set()
    assert gs.contains([0.0, 1.0], 0.5)
    assert gs.contains_velocity([0.0, 0.0])
    assert not gs.contains([0.0, 1.0], 5.0)
    assert not gs.contains_velocity([2.0, 0.0])


def test_prune_to_vertices_drops_interior_points():
    gs = GeneratorSet.from_pairs([[-1.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.5, 0.0]])
    pruned = prune_to_vertices(gs)
    assert len(pruned) == 2
    assert hausdorff_distance(gs, pruned) == pytest.approx(0.0, abs=1e-12)


def test_hausdorff_distance_of_shifted_segment():
    first = GeneratorSet.from_pairs([[0.0, 0.0], [1.0, 0.0]])
    second = GeneratorSet.from_pairs([[0.5, 0.0], [1.5, 0.0]])
    assert hausdorff_distance(first, second) == pytest.approx(0.5)


def test_tangential_restriction_of_square(cross):
    east = _east_ray(cross)
    restriction = tangential_restriction(_square_set(), east)
    assert not restriction.is_empty
    assert restriction.contains([1.0, 0.0], 1.5)
    assert not restriction.contains([1.0, 0.5], 1.0)
    generators = restriction.generators
    assert np.allclose(generators.velocities[:, 1], 0.0)
    assert generators.contains([1.0, 0.0], 1.5)
    assert generators.contains([-1.0, 0.0], 1.5)


def test_tangential_generators_match_lp_support(cross):
    east = _east_ray(cross)
    rng = np.random.default_rng(7)
    for _ in range(5):
        pairs = np.column_stack([rng.uniform(-2.0, 2.0, size=(6, 2)), rng.uniform(0.0, 1.0, size=6)])
        pairs[0, 1], pairs[1, 1] = 1.5, -1.5
        restriction = tangential_restriction(GeneratorSet.from_pairs(pairs), east)
        explicit = restriction.generators
        for direction in support_directions(3, extra=8, seed=1):
            assert explicit.support(direction) == pytest.approx(restriction.support(direction), abs=1e-9)


def test_empty_restriction(cross):
    gs = GeneratorSet.from_pairs([[0.0, 1.0, 0.0], [1.0, 2.0, 0.0]])
    restriction = tangential_restriction(gs, _east_ray(cross))
    assert restriction.is_empty
    assert restriction.generators is None
    assert restriction.point() is None
    assert restriction.support([1.0, 0.0, 0.0]) == -np.inf


def test_restriction_on_region_is_the_set(cross):
    gs = _square_set()
    restriction = tangential_restriction(gs, cross.strat.stratum(5))
    assert restriction.is_full
    assert restriction.generators is gs


def test_bl_map_interface_is_hull_of_both_sides(two_speed):
    strat = two_speed.strat
    interface = two_speed.evaluate([0.0], 0.0)
    assert interface.contains([2.0], 0.0)
    assert interface.contains([-2.0], 0.0)
    assert two_speed.evaluate([0.5], 0.0).max_speed == pytest.approx(2.0)
    assert two_speed.evaluate([-0.5], 0.0).max_speed == pytest.approx(1.0)
    assert two_speed.bl_map.evaluate_on(strat, strat.stratum(0), [0.0], 0.0).max_speed == pytest.approx(2.0)


def test_union_specific_adds_stratum_generators():
    left = [[-1.0, 1.0], [1.0, 1.0]]
    right = [[-1.0, 1.0], [1.0, 1.0]]
    specific = {0: GeneratorSet.from_pairs([[0.0, 0.25]])}
    union = line_problem(left, right, closure_mode=HULL_OF_LIMITS_UNION_SPECIFIC, specific=specific)
    plain = line_problem(left, right, closure_mode=HULL_OF_LIMITS, specific=specific)
    assert union.evaluate([0.0], 0.0).contains([0.0], 0.25)
    assert not plain.evaluate([0.0], 0.0).contains([0.0], 0.25)
    assert not union.evaluate([0.5], 0.0).contains([0.0], 0.25)


def test_missing_rule_raises(two_speed):
    bl_map = BLMap({1: two_speed.bl_map.rules[1]})
    with pytest.raises(NoRuleForRegion):
        bl_map.evaluate(two_speed.strat, [0.5], 0.0)


def test_bound_violation_raises():
    problem = line_problem([[-1.0, 0.0], [1.0, 0.0]], [[-2.0, 0.0], [2.0, 0.0]], bound=1.5)
    problem.evaluate([-0.5], 0.0)
    with pytest.raises(BoundViolation):
        problem.evaluate([0.5], 0.0)


def test_region_rule_constant_by_default():
    rule = RegionRule(stratum_id=1, base=_square_set())
    assert rule.is_constant
    assert rule.evaluate([0.0, 0.0], 3.0) is rule.base


def test_filippov_zero_radius_is_identity(two_speed):
    assert filippov_regularize(two_speed.bl_map, two_speed.strat, 0.0) is two_speed.bl_map


def test_filippov_rejects_bad_arguments(two_speed):
    with pytest.raises(ValueError):
        filippov_regularize(two_speed.bl_map, two_speed.strat, -0.1)
    with pytest.raises(ValueError):
        filippov_regularize(two_speed.bl_map, two_speed.strat, 0.1, samples_per_eps=0)


def test_filippov_far_from_interface_is_unchanged(two_speed):
    regularized = filippov_regularize(two_speed.bl_map, two_speed.strat, 0.5, samples_per_eps=3)
    assert isinstance(regularized, FilippovMap)
    assert not regularized.is_piecewise_constant
    original = two_speed.evaluate([-1.0], 0.0)
    smoothed = regularized.evaluate(two_speed.strat, [-1.0], 0.0)
    assert hausdorff_distance(original, smoothed) == pytest.approx(0.0, abs=1e-12)


def test_filippov_blends_speeds_near_interface(two_speed):
    regularized = filippov_regularize(two_speed.bl_map, two_speed.strat, 0.5, samples_per_eps=3)
    smoothed = regularized.evaluate(two_speed.strat, [-0.2], 0.0)
    assert 1.0 < smoothed.max_speed < 2.0
    assert smoothed.contains([1.0], 0.0)


def test_check_adapted_passes_on_builtins(two_speed, cross):
    for problem in (two_speed, cross):
        report = check_adapted(problem.bl_map, problem.strat, sample_density=4.0)
        assert report.passed
        assert {site.stratum_id for site in report.sites} == {s.id for s in problem.strat.strata}


def test_check_adapted_rejects_bad_density(two_speed):
    with pytest.raises(ValueError):
        check_adapted(two_speed.bl_map, two_speed.strat, sample_density=0.0)


def test_check_adapted_finds_jump_inside_region():
    problem = line_problem([[-1.0, 0.0], [1.0, 0.0]], [[-1.0, 0.0], [1.0, 0.0]])
    jump = ScaleSpec(kind="step", w=(1.0,), offset=1.0, low=1.0, high=2.0)
    rules = dict(problem.bl_map.rules)
    rules[2] = RegionRule(stratum_id=2, base=rules[2].base, scale=jump)
    report = check_adapted(BLMap(rules), problem.strat, sample_density=4.0)
    failed = report.failures()
    assert [site.stratum_id for site in failed] == [2]
    a, b = failed[0].detail["witness_pair"]
    assert min(a[0], b[0]) <= 1.0 <= max(a[0], b[0])


def test_filippov_samples_stay_before_the_horizon():
    strat = line_problem(left=[[-1.0, 1.0], [1.0, 1.0]], right=[[-1.0, 1.0], [1.0, 1.0]]).strat
    growing = ScaleSpec(kind="affine", c0=1.0, a_t=1.0)
    rules = {k: RegionRule(stratum_id=k, base=GeneratorSet.from_pairs([[-1.0, 1.0], [1.0, 1.0]]), scale=growing)
             for k in (1, 2)}
    bl_map = BLMap(rules)
    assert not bl_map.is_autonomous
    clipped = filippov_regularize(bl_map, strat, 0.5, samples_per_eps=2, horizon=1.0)
    assert clipped.evaluate(strat, [-1.5], 1.0).max_speed == pytest.approx(2.0)
    unclipped = filippov_regularize(bl_map, strat, 0.5, samples_per_eps=2)
    assert unclipped.evaluate(strat, [-1.5], 1.0).max_speed > 2.0
