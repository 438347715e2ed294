"""
Flat stratifications for Stratified HJB.

This module contains the Stratum and FlatStratification types, point location
and the tangent/normal decomposition of covectors.

A stratum is a relatively-open convex cell of an affine subspace
basepoint + span(tangent_basis), cut out by strict linear inequalities. Location
is resolved lowest dimension first, so a stratum is effectively its cell minus
every lower-dimensional stratum; a top-dimensional stratum without inequalities
is the complement of everything of lower dimension.
"""

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from stratified_hjb.core.errors import AmbiguousLocation, OutOfBox, UncoveredPoint

ORTHONORMAL_TOL = 1e-12
SNAP_FACTOR = 1e-9
MAX_SAMPLES_PER_STRATUM = 20000


@dataclass(frozen=True)
class CellConstraint:
    """Strict inequality sense * (normal . x - offset) > 0 in ambient coordinates."""

    normal: Tuple[float, ...]
    offset: float
    sense: str = ">"

    def __post_init__(self):
        if self.sense not in (">", "<"):
            raise ValueError(f"Constraint sense must be '>' or '<', got {self.sense!r}")

    @property
    def sign(self) -> float:
        return 1.0 if self.sense == ">" else -1.0

    def margins(self, points: np.ndarray) -> np.ndarray:
        return self.sign * (points @ np.asarray(self.normal, dtype=float) - self.offset)


@dataclass(frozen=True, eq=False)
class Stratum:
    """A relatively-open affine cell of dimension k."""

    id: int
    dim: int
    basepoint: np.ndarray
    tangent_basis: np.ndarray
    cell: Tuple[CellConstraint, ...] = ()
    name: str = ""

    def __post_init__(self):
        base = np.asarray(self.basepoint, dtype=float).reshape(-1)
        n = base.size
        basis = np.asarray(self.tangent_basis, dtype=float).reshape(-1, n) if self.dim else np.zeros((0, n))
        if basis.shape[0] != self.dim:
            raise ValueError(f"Stratum {self.id}: dim {self.dim} needs {self.dim} basis vectors, got {basis.shape[0]}")
        if not 0 <= self.dim <= n:
            raise ValueError(f"Stratum {self.id}: dimension {self.dim} outside 0..{n}")
        gram = basis @ basis.T
        if not np.allclose(gram, np.eye(self.dim), atol=ORTHONORMAL_TOL, rtol=0.0):
            raise ValueError(f"Stratum {self.id}: tangent basis is not orthonormal")
        for constraint in self.cell:
            if len(constraint.normal) != n:
                raise ValueError(f"Stratum {self.id}: constraint normal has wrong length")
        object.__setattr__(self, "basepoint", base)
        object.__setattr__(self, "tangent_basis", basis)
        object.__setattr__(self, "cell", tuple(self.cell))

    @property
    def ambient_dim(self) -> int:
        return self.basepoint.size

    @property
    def codim(self) -> int:
        return self.ambient_dim - self.dim

    @cached_property
    def projector(self) -> np.ndarray:
        """Orthogonal projector onto span(tangent_basis)."""
        return self.tangent_basis.T @ self.tangent_basis

    @cached_property
    def normal_basis(self) -> np.ndarray:
        """Orthonormal basis of the normal space V_k^perp, one vector per row."""
        n = self.ambient_dim
        if self.dim == 0:
            return np.eye(n)
        if self.dim == n:
            return np.zeros((0, n))
        _, _, vt = np.linalg.svd(self.tangent_basis, full_matrices=True)
        normals = vt[self.dim:]
        # Snap axis-aligned normals so they stay exact
        snapped = np.where(np.abs(normals) < 1e-14, 0.0, normals)
        return snapped

    @cached_property
    def tangent_axes(self) -> Optional[Tuple[int, ...]]:
        """Coordinate axes spanning the stratum, or None if it is not axis-aligned."""
        axes = []
        for vector in self.tangent_basis:
            hits = np.flatnonzero(np.abs(vector) > ORTHONORMAL_TOL)
            if hits.size != 1 or abs(abs(vector[hits[0]]) - 1.0) > ORTHONORMAL_TOL:
                return None
            axes.append(int(hits[0]))
        return tuple(sorted(axes))

    @property
    def is_axis_aligned(self) -> bool:
        return self.tangent_axes is not None

    @property
    def normal_axes(self) -> Tuple[int, ...]:
        axes = self.tangent_axes or ()
        return tuple(i for i in range(self.ambient_dim) if i not in axes)

    def distance_to_span(self, points: np.ndarray) -> np.ndarray:
        offsets = np.atleast_2d(points) - self.basepoint
        return np.linalg.norm(offsets - offsets @ self.projector, axis=1)

    def cell_margins(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if not self.cell:
            return np.full((points.shape[0], 0), np.inf)
        return np.stack([constraint.margins(points) for constraint in self.cell], axis=1)

    def contains(self, points: np.ndarray, tol: float) -> np.ndarray:
        """Membership of the relatively-open cell, robust to round-off of size tol."""
        points = np.atleast_2d(points)
        inside = self.distance_to_span(points) <= tol
        if self.cell:
            inside &= np.all(self.cell_margins(points) > tol, axis=1)
        return inside

    def closure_contains(self, points: np.ndarray, tol: float) -> np.ndarray:
        points = np.atleast_2d(points)
        inside = self.distance_to_span(points) <= tol
        if self.cell:
            inside &= np.all(self.cell_margins(points) >= -tol, axis=1)
        return inside

    def tangent_coordinates(self, points: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(points) - self.basepoint) @ self.tangent_basis.T

    def from_tangent_coordinates(self, coords: np.ndarray) -> np.ndarray:
        return self.basepoint + np.atleast_2d(coords) @ self.tangent_basis

    def split_covector(self, p: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
        """
        Split a covector into its tangential and normal parts.

        Args:
            p: Covector in R^N

        Returns:
            (p_top, p_bot) with p_top in span(tangent_basis) and p = p_top + p_bot
        """
        p = np.asarray(p, dtype=float)
        p_top = self.projector @ p
        return p_top, p - p_top

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Stratum(id={self.id}, dim={self.dim}{label})"


@dataclass(frozen=True, eq=False)
class FlatStratification:
    """A decomposition of an axis-aligned box into flat strata M^0, ..., M^N."""

    box_lower: np.ndarray
    box_upper: np.ndarray
    strata: Tuple[Stratum, ...]
    _index: Dict[int, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        lower = np.asarray(self.box_lower, dtype=float).reshape(-1)
        upper = np.asarray(self.box_upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape or np.any(upper <= lower):
            raise ValueError("Box bounds must have equal length and lower < upper")
        object.__setattr__(self, "box_lower", lower)
        object.__setattr__(self, "box_upper", upper)
        ordered = tuple(sorted(self.strata, key=lambda s: (s.dim, s.id)))
        object.__setattr__(self, "strata", ordered)
        for position, stratum in enumerate(ordered):
            if stratum.ambient_dim != lower.size:
                raise ValueError(f"Stratum {stratum.id} lives in R^{stratum.ambient_dim}, box is in R^{lower.size}")
            if stratum.id in self._index:
                raise ValueError(f"Duplicate stratum id {stratum.id}")
            self._index[stratum.id] = position

    @property
    def dimension(self) -> int:
        return self.box_lower.size

    @cached_property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.box_upper - self.box_lower))

    @cached_property
    def snap_tolerance(self) -> float:
        return SNAP_FACTOR * self.diameter

    def stratum(self, stratum_id: int) -> Stratum:
        return self.strata[self._index[stratum_id]]

    def position(self, stratum_id: int) -> int:
        return self._index[stratum_id]

    def of_dimension(self, k: int) -> List[Stratum]:
        return [s for s in self.strata if s.dim == k]

    @property
    def regions(self) -> List[Stratum]:
        """The open regions, i.e. the strata of M^N."""
        return self.of_dimension(self.dimension)

    @property
    def lower_strata(self) -> List[Stratum]:
        return [s for s in self.strata if s.dim < self.dimension]

    def in_box(self, points: np.ndarray, tol: Optional[float] = None) -> np.ndarray:
        tol = self.snap_tolerance if tol is None else tol
        points = np.atleast_2d(points)
        return np.all((points >= self.box_lower - tol) & (points <= self.box_upper + tol), axis=1)

    def clip_to_box(self, points: np.ndarray) -> np.ndarray:
        return np.clip(points, self.box_lower, self.box_upper)

    def locate(self, x: Sequence[float]) -> Stratum:
        """
        Find the stratum containing a point.

        Args:
            x: Point inside the box

        Returns:
            The unique stratum containing x; the lowest dimension wins within the
            snap tolerance
        """
        point = np.asarray(x, dtype=float).reshape(1, -1)
        return self.strata[int(self.locate_many(point)[0])]

    def locate_many(self, points: np.ndarray) -> np.ndarray:
        """
        Vectorized location.

        Args:
            points: Array of shape (n, N)

        Returns:
            Positions into self.strata, one per point
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        outside = ~self.in_box(points)
        if np.any(outside):
            bad = points[np.argmax(outside)]
            raise OutOfBox(f"Point {bad.tolist()} lies outside the box "
                           f"[{self.box_lower.tolist()}, {self.box_upper.tolist()}]")

        tol = self.snap_tolerance
        result = np.full(points.shape[0], -1, dtype=int)
        for k in range(self.dimension + 1):
            pending = np.flatnonzero(result < 0)
            if pending.size == 0:
                break
            candidates = [(pos, s) for pos, s in enumerate(self.strata) if s.dim == k]
            if not candidates:
                continue
            claims = np.stack([s.contains(points[pending], tol) for _, s in candidates], axis=1)
            counts = claims.sum(axis=1)
            if np.any(counts > 1):
                row = int(np.argmax(counts > 1))
                owners = [candidates[j][1].id for j in np.flatnonzero(claims[row])]
                raise AmbiguousLocation(f"Point {points[pending[row]].tolist()} is claimed by "
                                        f"strata {owners} of dimension {k}")
            hit = counts == 1
            positions = np.array([pos for pos, _ in candidates])
            result[pending[hit]] = positions[np.argmax(claims[hit], axis=1)]

        if np.any(result < 0):
            bad = points[int(np.argmax(result < 0))]
            raise UncoveredPoint(f"No stratum contains {bad.tolist()}")
        return result

    def claim_counts(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Location without raising, for validation.

        Returns:
            (winning dimension or -1 if uncovered, number of claims at that dimension)
        """
        points = np.atleast_2d(points)
        tol = self.snap_tolerance
        dims = np.full(points.shape[0], -1, dtype=int)
        counts = np.zeros(points.shape[0], dtype=int)
        for k in range(self.dimension + 1):
            pending = np.flatnonzero(dims < 0)
            strata_k = self.of_dimension(k)
            if pending.size == 0 or not strata_k:
                continue
            claims = np.stack([s.contains(points[pending], tol) for s in strata_k], axis=1).sum(axis=1)
            hit = claims > 0
            dims[pending[hit]] = k
            counts[pending[hit]] = claims[hit]
        return dims, counts

    def adjacent_regions(self, x: Sequence[float]) -> List[Stratum]:
        """Regions of M^N whose closure contains x."""
        point = np.asarray(x, dtype=float).reshape(1, -1)
        tol = self.snap_tolerance
        return [r for r in self.regions if bool(r.closure_contains(point, tol)[0])]

    def interface_offsets(self) -> Dict[int, List[float]]:
        """
        Coordinates of axis-normal hyperplanes carrying lower strata.

        Returns:
            Mapping axis -> sorted coordinates c such that a stratum lies in {x_axis = c}
        """
        offsets: Dict[int, set] = {axis: set() for axis in range(self.dimension)}
        for stratum in self.lower_strata:
            if not stratum.is_axis_aligned:
                continue
            for axis in stratum.normal_axes:
                offsets[axis].add(float(stratum.basepoint[axis]))
        return {axis: sorted(values) for axis, values in offsets.items()}

    # Sampling used by the validators and checkers

    def box_lattice(self, density: float, max_per_axis: int = 41) -> np.ndarray:
        """Deterministic lattice over the box with about `density` points per unit length."""
        axes = []
        for lo, hi in zip(self.box_lower, self.box_upper):
            count = int(np.clip(np.ceil((hi - lo) * density) + 1, 2, max_per_axis))
            axes.append(np.linspace(lo, hi, count))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def sample_stratum(self, stratum: Stratum, density: float) -> np.ndarray:
        """
        Lattice points of a stratum, centred on its basepoint.

        Args:
            stratum: Stratum to sample
            density: Points per unit length along each tangent direction

        Returns:
            Array (n, N) of points that locate to the stratum
        """
        if stratum.dim == 0:
            candidates = stratum.basepoint.reshape(1, -1)
        else:
            step = 1.0 / density
            corners = np.array(np.meshgrid(*zip(self.box_lower, self.box_upper), indexing="ij"))
            corners = corners.reshape(self.dimension, -1).T
            coords = stratum.tangent_coordinates(corners)
            lows = np.floor(coords.min(axis=0) / step)
            highs = np.ceil(coords.max(axis=0) / step)
            while np.prod(highs - lows + 1) > MAX_SAMPLES_PER_STRATUM:
                step *= 1.5
                lows = np.floor(coords.min(axis=0) / step)
                highs = np.ceil(coords.max(axis=0) / step)
            grids = [np.arange(lo, hi + 1) * step for lo, hi in zip(lows, highs)]
            mesh = np.meshgrid(*grids, indexing="ij")
            tangent = np.stack([m.reshape(-1) for m in mesh], axis=1)
            candidates = stratum.from_tangent_coordinates(tangent)
        return self._keep_located(candidates, stratum)

    def boundary_samples(self, stratum: Stratum, interior: np.ndarray) -> np.ndarray:
        """
        Points of the relative boundary of a stratum's cell.

        Interior samples are projected, inside the stratum's affine span, onto the
        faces of its cell (single faces and their intersections).
        """
        if stratum.dim == 0 or not stratum.cell or interior.size == 0:
            return np.zeros((0, self.dimension))
        tol = self.snap_tolerance
        base_coords = stratum.tangent_coordinates(interior)
        normals = np.array([c.normal for c in stratum.cell], dtype=float)
        offsets = np.array([c.offset for c in stratum.cell], dtype=float)
        rows = normals @ stratum.tangent_basis.T
        rhs = offsets - normals @ stratum.basepoint

        found = []
        max_active = min(stratum.dim, len(stratum.cell))
        for size in range(1, max_active + 1):
            for active in combinations(range(len(stratum.cell)), size):
                matrix = rows[list(active)]
                target = rhs[list(active)]
                pinv = np.linalg.pinv(matrix)
                shifted = base_coords + (target - base_coords @ matrix.T) @ pinv.T
                if np.max(np.abs(shifted @ matrix.T - target), initial=0.0) > 1e-9:
                    continue
                points = stratum.from_tangent_coordinates(shifted)
                keep = np.all(stratum.cell_margins(points) >= -tol, axis=1)
                keep &= self.in_box(points, tol=0.0)
                found.append(points[keep])
        if not found:
            return np.zeros((0, self.dimension))
        points = np.concatenate(found, axis=0)
        return _unique_rows(points)

    def on_stratum(self, points: np.ndarray, stratum: Stratum) -> np.ndarray:
        """Mask of the points (inside the box) that locate to `stratum`."""
        points = np.atleast_2d(points)
        mask = self.in_box(points, tol=0.0)
        if not np.any(mask):
            return mask
        dims, _ = self.claim_counts(points[mask])
        mask[mask] = (dims == stratum.dim) & stratum.contains(points[mask], self.snap_tolerance)
        return mask

    def _keep_located(self, candidates: np.ndarray, stratum: Stratum) -> np.ndarray:
        if candidates.size == 0:
            return candidates.reshape(0, self.dimension)
        return candidates[self.on_stratum(candidates, stratum)]


def _unique_rows(points: np.ndarray, decimals: int = 12) -> np.ndarray:
    if points.size == 0:
        return points
    _, index = np.unique(np.round(points, decimals), axis=0, return_index=True)
    return points[np.sort(index)]


def locate(strat: FlatStratification, x: Sequence[float]) -> Stratum:
    """Return the unique stratum containing x (lowest dimension wins)."""
    return strat.locate(x)


def split_covector(stratum: Stratum, p: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Return (p_top, p_bot), the projections of p on the tangent and normal spaces."""
    return stratum.split_covector(p)
