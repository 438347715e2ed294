"""
Semi-Lagrangian value solver for Stratified HJB.

U_{n+1}(x) = min over generators (b, l) of BL(x, t_n) of [ dt l + I[U_n](x + dt b) ]

on a lattice that carries every interface of the stratification, I being
multilinear interpolation. The one-step cost is linear in (b, l), so the minimum
over the hull is a minimum over generators. Nodes on a lower stratum use the
hull set of that stratum, so tangential mixtures are available there.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from stratified_hjb.core.errors import CflViolation, FootOutsideBox, GridMisaligned
from stratified_hjb.dynamics.generators import GeneratorSet
from stratified_hjb.geometry.stratification import FlatStratification
from stratified_hjb.solver.problem import StratifiedProblem
from stratified_hjb.solver.value_grid import ValueGrid
from stratified_hjb.utils.logging_utils import get_module_logger

ALIGN_TOL = 1e-9
CFL_SLACK = 1e-12


def aligned_axes(strat: FlatStratification, dx: float) -> List[np.ndarray]:
    """
    Lattice axes with step dx carrying every interface of the stratification.

    Raises:
        GridMisaligned: dx does not divide a box side or an interface offset, or
            a lower stratum is not axis-aligned
    """
    if dx <= 0:
        raise GridMisaligned(f"dx must be positive, got {dx}")
    for stratum in strat.lower_strata:
        if not stratum.is_axis_aligned:
            raise GridMisaligned(f"Stratum {stratum.id} is not axis-aligned; no lattice carries it")

    offsets = strat.interface_offsets()
    axes = []
    for axis, (lo, hi) in enumerate(zip(strat.box_lower, strat.box_upper)):
        cells = (hi - lo) / dx
        count = int(round(cells))
        if count < 1 or abs(cells - count) > ALIGN_TOL * max(1.0, cells):
            raise GridMisaligned(f"dx={dx} does not divide the box side [{lo}, {hi}] on axis {axis + 1}")
        values = lo + dx * np.arange(count + 1)
        values[-1] = hi
        for offset in offsets[axis]:
            position = (offset - lo) / dx
            index = int(round(position))
            if abs(position - index) > ALIGN_TOL * max(1.0, abs(position)) or not 0 <= index <= count:
                raise GridMisaligned(f"dx={dx} does not put a node on the interface x{axis + 1}={offset}")
            values[index] = offset
        axes.append(values)
    return axes


def time_grid(horizon: float, dt: float) -> Tuple[np.ndarray, float]:
    """Uniform times 0..T with dt adjusted so that it divides T."""
    if dt <= 0:
        raise CflViolation(f"dt must be positive, got {dt}")
    steps = max(1, int(round(horizon / dt)))
    adjusted = horizon / steps
    times = adjusted * np.arange(steps + 1)
    times[-1] = horizon
    return times, adjusted


@dataclass
class PaddedGenerators:
    """Per-node generator arrays padded to a common length by repeating the first generator."""

    velocities: np.ndarray  # (n_nodes, m, N)
    costs: np.ndarray       # (n_nodes, m)

    @classmethod
    def from_sets(cls, sets: Sequence[GeneratorSet]) -> "PaddedGenerators":
        width = max(len(gs) for gs in sets)
        dimension = sets[0].dimension
        velocities = np.empty((len(sets), width, dimension))
        costs = np.empty((len(sets), width))
        # Shared set objects are expanded once
        expanded = {}
        for index, gs in enumerate(sets):
            block = expanded.get(id(gs))
            if block is None:
                points = gs.points
                pad = np.repeat(points[:1], width - len(gs), axis=0)
                block = np.concatenate([points, pad], axis=0)
                expanded[id(gs)] = block
            velocities[index] = block[:, :-1]
            costs[index] = block[:, -1]
        return cls(velocities=velocities, costs=costs)

    @property
    def max_speed(self) -> float:
        return float(np.max(np.linalg.norm(self.velocities, axis=2)))


def node_sets(problem: StratifiedProblem, nodes: np.ndarray, positions: np.ndarray, t: float) -> List[GeneratorSet]:
    strat = problem.strat
    return [problem.bl_map.evaluate_on(strat, strat.strata[pos], node, t) for pos, node in zip(positions, nodes)]


def one_step_costs(interpolator: RegularGridInterpolator, lower: np.ndarray, upper: np.ndarray,
                   points: np.ndarray, generators: PaddedGenerators, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    One-step costs dt l + I[U](x + dt b) for every point and generator.

    Args:
        interpolator: Multilinear interpolator of the previous slice
        lower: Lattice lower corner
        upper: Lattice upper corner
        points: Points (n, N)
        generators: Padded generators of the points
        dt: Time step

    Returns:
        (costs (n, m), number of feet clamped to the box)
    """
    feet = points[:, None, :] + dt * generators.velocities
    slack = 1e-12 * (upper - lower)
    outside = np.any((feet < lower - slack) | (feet > upper + slack), axis=2)
    feet = np.clip(feet, lower, upper)
    values = interpolator(feet.reshape(-1, points.shape[1])).reshape(feet.shape[:2])
    return dt * generators.costs + values, int(np.count_nonzero(np.any(outside, axis=1)))


class SemiLagrangianSolver:
    """Backward iteration of the semi-Lagrangian scheme on an aligned lattice."""

    def __init__(self, problem: StratifiedProblem, dx: float, dt: float, threads: int = 1,
                 strict_box: bool = False):
        """
        Initialize the solver.

        Args:
            problem: Problem to solve
            dx: Space step, dividing the box sides and the interface offsets
            dt: Time step, adjusted to divide the horizon
            threads: Worker threads for the per-slice node updates
            strict_box: Raise FootOutsideBox instead of clamping feet
        """
        self.logger = get_module_logger("SemiLagrangianSolver")
        self.problem = problem
        self.threads = max(1, int(threads))
        self.strict_box = strict_box

        self.axes = aligned_axes(problem.strat, dx)
        self.dx = float(dx)
        self.times, self.dt = time_grid(problem.horizon, dt)
        mesh = np.meshgrid(*self.axes, indexing="ij")
        self.nodes = np.stack([m.reshape(-1) for m in mesh], axis=1)
        self.shape = tuple(axis.size for axis in self.axes)
        self.lower = np.array([axis[0] for axis in self.axes])
        self.upper = np.array([axis[-1] for axis in self.axes])
        self.positions = problem.strat.locate_many(self.nodes)
        self.clamped_feet = 0

    def _generators(self, t: float) -> PaddedGenerators:
        sets = node_sets(self.problem, self.nodes, self.positions, t)
        generators = PaddedGenerators.from_sets(sets)
        speed = generators.max_speed
        if speed > 0 and self.dt > self.dx / speed * (1 + CFL_SLACK):
            raise CflViolation(f"dt={self.dt:.6g} violates the CFL bound dt <= dx / max|b| = "
                               f"{self.dx / speed:.6g} (dx={self.dx:.6g}, max|b|={speed:.6g})")
        return generators

    def _chunks(self) -> List[np.ndarray]:
        count = self.nodes.shape[0]
        pieces = min(self.threads, count)
        return np.array_split(np.arange(count), pieces)

    def _step(self, previous: np.ndarray, generators: PaddedGenerators, pool: Optional[ThreadPoolExecutor]) -> np.ndarray:
        interpolator = RegularGridInterpolator(tuple(self.axes), previous, method="linear",
                                               bounds_error=False, fill_value=None)

        def update(index: np.ndarray) -> Tuple[np.ndarray, int]:
            block = PaddedGenerators(generators.velocities[index], generators.costs[index])
            costs, clamped = one_step_costs(interpolator, self.lower, self.upper, self.nodes[index], block, self.dt)
            return costs.min(axis=1), clamped

        chunks = self._chunks()
        results = list(pool.map(update, chunks)) if pool is not None else [update(c) for c in chunks]
        following = np.empty(self.nodes.shape[0])
        clamped = 0
        for index, (values, count) in zip(chunks, results):
            following[index] = values
            clamped += count
        if clamped:
            if self.strict_box:
                raise FootOutsideBox(f"{clamped} scheme feet left the box")
            self.clamped_feet += clamped
        return following.reshape(self.shape)

    def solve(self) -> ValueGrid:
        """
        Run the backward iteration.

        Returns:
            ValueGrid with slice 0 equal to g at the nodes
        """
        problem = self.problem
        started = time.perf_counter()
        self.logger.info(f"Solving {problem.name or 'problem'} on {self.nodes.shape[0]} nodes x "
                         f"{self.times.size - 1} steps (dx={self.dx}, dt={self.dt:.6g}, threads={self.threads})")

        values = np.empty((self.times.size, *self.shape))
        values[0] = problem.terminal_cost.values(self.nodes).reshape(self.shape)

        autonomous = problem.bl_map.is_autonomous
        generators = self._generators(0.0) if autonomous else None
        pool = ThreadPoolExecutor(max_workers=self.threads) if self.threads > 1 else None
        try:
            for n in range(self.times.size - 1):
                if not autonomous:
                    generators = self._generators(self.times[n])
                values[n + 1] = self._step(values[n], generators, pool)
                self.logger.debug(f"Slice {n + 1}/{self.times.size - 1} done")
        except Exception as e:
            self.logger.error(f"Error while solving: {str(e)}", exc_info=True)
            raise
        finally:
            if pool is not None:
                pool.shutdown()

        if self.clamped_feet:
            self.logger.warning(f"{self.clamped_feet} scheme feet were clamped to the box")
        elapsed = time.perf_counter() - started
        self.logger.info(f"Solve finished in {elapsed:.2f} s; U in [{values.min():.6g}, {values.max():.6g}]")
        metadata = {
            "dx": self.dx,
            "dt": self.dt,
            "steps": self.times.size - 1,
            "clamped_feet": self.clamped_feet,
            "problem": problem.name,
        }
        return ValueGrid(axes=self.axes, times=self.times, values=values, metadata=metadata)


def solve_value(prob: StratifiedProblem, dx: float, dt: float, threads: int = 1,
                strict_box: bool = False) -> ValueGrid:
    """
    Compute the value function on an interface-aligned lattice.

    Args:
        prob: Problem to solve
        dx: Space step
        dt: Time step (adjusted to divide the horizon)
        threads: Worker threads; results do not depend on it
        strict_box: Raise FootOutsideBox instead of clamping feet to the box

    Returns:
        The computed ValueGrid
    """
    return SemiLagrangianSolver(prob, dx, dt, threads=threads, strict_box=strict_box).solve()
