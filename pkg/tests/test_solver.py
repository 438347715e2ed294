"""Tests for the semi-Lagrangian solver, the brute-force oracle, value grids and trajectories."""

import numpy as np
import pytest

from conftest import builtin_dict, line_problem
from stratified_hjb.core.errors import (CflViolation, ComplexityGuard, FootOutsideBox, GridMisaligned,
                                        InfeasibleSelection)
from stratified_hjb.data.config_loader import ProblemConfig
from stratified_hjb.data.exporters import read_grid, write_grid
from stratified_hjb.solver.oracle import brute_force_value
from stratified_hjb.solver.problem import TerminalCost
from stratified_hjb.solver.semi_lagrangian import aligned_axes, solve_value, time_grid
from stratified_hjb.solver.trajectory import (ConstantPolicy, GreedyDPPPolicy, reaching_times,
                                              reaching_times_by_dimension, simulate, trajectory_total_cost)
from stratified_hjb.solver.value_grid import ValueGrid


def _two_speed_exact(x, t):
    """Speed 1 left of 0, speed 2 right of it, g = |x - 1|, no running cost."""
    if x >= 0:
        return max(abs(x - 1.0) - 2.0 * t, 0.0)
    reach = -x
    if t <= reach:
        return 1.0 - x - t
    return max(1.0 - 2.0 * (t - reach), 0.0)


def test_time_grid_divides_horizon():
    times, dt = time_grid(1.0, 0.3)
    assert times.size == 4
    assert dt == pytest.approx(1.0 / 3.0)
    assert times[-1] == 1.0


def test_aligned_axes_carry_interfaces(two_speed):
    axes = aligned_axes(two_speed.strat, 0.1)
    assert len(axes) == 1
    assert axes[0].size == 41
    assert 0.0 in axes[0]


def test_misaligned_lattice_raises(two_speed):
    with pytest.raises(GridMisaligned):
        solve_value(two_speed, dx=0.8, dt=0.1)
    with pytest.raises(GridMisaligned):
        solve_value(two_speed, dx=0.3, dt=0.1)


def test_cfl_violation_raises(two_speed):
    with pytest.raises(CflViolation):
        solve_value(two_speed, dx=0.1, dt=0.1)


def test_constant_running_cost_gives_elapsed_time(unit_cost_line):
    grid = solve_value(unit_cost_line, dx=0.1, dt=0.05)
    assert grid.steps == 20
    for n, t in enumerate(grid.times):
        assert np.allclose(grid.values[n], t, atol=1e-12)


def test_slice_zero_is_terminal_cost(two_speed):
    grid = solve_value(two_speed, dx=0.1, dt=0.05)
    nodes = grid.nodes()
    assert np.allclose(grid.values[0], np.abs(nodes[:, 0] - 1.0), atol=1e-15)


def test_two_speed_matches_exact_value(two_speed):
    grid = solve_value(two_speed, dx=0.01, dt=0.005)
    for x, t in ((0.5, 0.2), (-0.5, 0.5), (-0.5, 0.8), (1.5, 0.1)):
        value = float(grid.value_at(np.array([[x]]), t)[0])
        assert value == pytest.approx(_two_speed_exact(x, t), abs=0.05)


def test_oracle_matches_exact_value(two_speed):
    assert brute_force_value(two_speed, [0.5], 0.2, steps=8) == pytest.approx(0.1, abs=1e-12)
    assert brute_force_value(two_speed, [-0.5], 0.5, steps=10) == pytest.approx(1.0, abs=1e-12)
    assert brute_force_value(two_speed, [0.3], 0.0, steps=4) == pytest.approx(0.7)


def test_oracle_agrees_with_solver(two_speed):
    grid = solve_value(two_speed, dx=0.01, dt=0.005)
    for x, t in ((0.5, 0.2), (-0.5, 0.5), (-0.2, 0.3)):
        oracle = brute_force_value(two_speed, [x], t, steps=10)
        value = float(grid.value_at(np.array([[x]]), t)[0])
        assert abs(oracle - value) <= 0.05


def test_oracle_guard(two_speed):
    with pytest.raises(ComplexityGuard):
        brute_force_value(two_speed, [0.0], 1.0, steps=15)
    with pytest.raises(ComplexityGuard):
        brute_force_value(two_speed, [0.0], 1.0, steps=0)


def test_value_bounded_by_terminal_and_running_cost(two_cost):
    grid = solve_value(two_cost, dx=0.02, dt=0.02)
    assert np.max(np.abs(grid.values)) <= two_cost.value_bound() * (1 + 1e-12)
    assert np.all(grid.values >= 0.0)


def test_fictitious_interface_is_bit_identical():
    rows = [[-1.0, 0.5], [0.0, 0.25], [1.0, 0.5]]
    terminal = TerminalCost(kind="distance", target=(0.7,))
    split = solve_value(line_problem(rows, rows, terminal=terminal), dx=0.25, dt=0.125)
    whole = solve_value(line_problem(rows, terminal=terminal), dx=0.25, dt=0.125)
    assert np.array_equal(split.values, whole.values)


def test_threads_do_not_change_values(cross):
    single = solve_value(cross, dx=0.1, dt=0.05, threads=1)
    pooled = solve_value(cross, dx=0.1, dt=0.05, threads=8)
    assert np.array_equal(single.values, pooled.values)


def test_strict_box_raises_on_clamped_feet(two_speed):
    grid = solve_value(two_speed, dx=0.1, dt=0.05)
    assert grid.metadata["clamped_feet"] > 0
    with pytest.raises(FootOutsideBox):
        solve_value(two_speed, dx=0.1, dt=0.05, strict_box=True)


def test_grid_round_trip(two_speed, tmp_path):
    grid = solve_value(two_speed, dx=0.1, dt=0.05)
    for name in ("grid.bin", "grid.csv"):
        path = write_grid(grid, str(tmp_path / name))
        loaded = read_grid(path)
        assert np.array_equal(loaded.values, grid.values)
        assert np.allclose(loaded.axes[0], grid.axes[0], atol=1e-12)
        assert np.allclose(loaded.times, grid.times, atol=1e-12)
        assert loaded.dx == pytest.approx(grid.dx)


def test_binary_grid_keeps_the_final_time():
    times = np.array([0.0, 0.1, 0.2, 0.3])
    grid = ValueGrid(axes=[np.linspace(-1.0, 1.0, 5)], times=times, values=np.arange(20.0).reshape(4, 5))
    loaded = ValueGrid.from_bytes(grid.to_bytes())
    assert loaded.times[-1] == 0.3
    assert np.allclose(loaded.times, times, atol=1e-15)
    assert np.array_equal(loaded.values, grid.values)


def test_csv_grid_is_deterministic(two_speed, tmp_path):
    grid = solve_value(two_speed, dx=0.1, dt=0.05)
    first = write_grid(grid, str(tmp_path / "first.csv"))
    second = write_grid(solve_value(two_speed, dx=0.1, dt=0.05), str(tmp_path / "second.csv"))
    with open(first, "rb") as a, open(second, "rb") as b:
        assert a.read() == b.read()


def test_value_grid_rejects_bad_shape():
    with pytest.raises(ValueError):
        ValueGrid(axes=[np.linspace(0.0, 1.0, 3)], times=np.array([0.0, 1.0]), values=np.zeros((2, 4)))


def test_value_at_interpolates_in_time(unit_cost_line):
    grid = solve_value(unit_cost_line, dx=0.1, dt=0.05)
    assert float(grid.value_at(np.array([[0.33]]), 0.4125)[0]) == pytest.approx(0.4125)


def test_constant_policy_trajectory(two_speed):
    traj = simulate(two_speed, [-0.5], 0.25, ConstantPolicy([1.0], 0.0), ds=0.05)
    assert traj.times.size == 6
    assert traj.final_state[0] == pytest.approx(-0.25)
    assert traj.running_cost == 0.0
    assert trajectory_total_cost(traj, two_speed) == pytest.approx(1.25)


def test_trajectory_reaching_times(two_speed):
    traj = simulate(two_speed, [-0.2], 0.5, ConstantPolicy([1.0], 0.0), ds=0.05)
    hits = dict(reaching_times(traj, two_speed.strat))
    assert hits[1] == 0.0
    assert hits[0] == pytest.approx(0.2)
    assert hits[2] == pytest.approx(0.25)
    by_dimension = reaching_times_by_dimension(traj, two_speed.strat)
    assert by_dimension == {0: hits[0], 1: 0.0}


def test_infeasible_selection_raises(two_speed):
    with pytest.raises(InfeasibleSelection):
        simulate(two_speed, [-0.5], 0.2, ConstantPolicy([3.0], 0.0), ds=0.05)


def test_greedy_policy_follows_value(two_speed):
    grid = solve_value(two_speed, dx=0.01, dt=0.005)
    traj = simulate(two_speed, [-0.5], 0.8, GreedyDPPPolicy(grid, two_speed), ds=grid.dt)
    total = trajectory_total_cost(traj, two_speed)
    assert total == pytest.approx(_two_speed_exact(-0.5, 0.8), abs=0.05)
    assert total >= float(grid.value_at(np.array([[-0.5]]), 0.8)[0]) - 0.05


def _cross_with(generators, terminal):
    """The cross stratification with the same generators in every quadrant."""
    data = builtin_dict("cross")
    for region in data["dynamics"]["regions"]:
        region["generators"] = generators
    data["terminal_cost"] = terminal
    return ProblemConfig.from_dict(data)


def test_unit_cost_on_cross_gives_elapsed_time():
    generators = [[1.0, 0.0, 1.0], [-1.0, 0.0, 1.0], [0.0, 2.0, 1.0], [0.0, -2.0, 1.0], [0.0, 0.0, 1.0]]
    problem = _cross_with(generators, {"kind": "constant", "value": 0.0}).build_problem()
    grid = solve_value(problem, dx=0.1, dt=0.025)
    for n, t in enumerate(grid.times):
        assert np.allclose(grid.values[n], t, atol=1e-12)


def test_fictitious_cross_interfaces_are_bit_identical():
    generators = [[1.0, 0.0, 0.5], [-1.0, 0.0, 0.5], [0.0, 1.0, 0.25], [0.0, -1.0, 0.75], [0.0, 0.0, 1.0]]
    terminal = {"kind": "distance", "target": [0.3, 0.2]}
    split = _cross_with(generators, terminal)
    data = split.to_dict()
    data["strata"] = [{"id": 0, "dim": 2, "basepoint": [0.0, 0.0], "basis": [[1.0, 0.0], [0.0, 1.0]]}]
    data["dynamics"]["regions"] = [{"stratum": 0, "generators": generators}]
    whole = ProblemConfig.from_dict(data)
    first = solve_value(split.build_problem(), dx=0.25, dt=0.125)
    second = solve_value(whole.build_problem(), dx=0.25, dt=0.125)
    assert np.array_equal(first.values, second.values)


@pytest.mark.slow
def test_oracle_agrees_with_solver_at_twenty_sites(two_speed):
    grid = solve_value(two_speed, dx=0.01, dt=0.005)
    for x in (-0.5, -0.25, 0.0, 0.25, 0.5):
        for t in (0.1, 0.2, 0.4, 0.5):
            oracle = brute_force_value(two_speed, [x], t, steps=10)
            value = float(grid.value_at(np.array([[x]]), t)[0])
            assert abs(oracle - value) <= 0.05, (x, t)
