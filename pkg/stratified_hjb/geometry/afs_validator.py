"""
AFS Validator for Stratified HJB.

This module checks the Admissible Flat Stratification axioms on deterministic
samples and records witnesses for every failure:

  afs_i      local affine structure; no lower-dimensional stratum accumulates
             on a stratum of higher dimension
  afs_ii     frontier condition: if closure(M^l) meets S in M^k (l > k) then
             S lies in closure(M^l)
  afs_iii    closure(M^k) lies in M^0 u ... u M^k
  disjointness, cover
  flat_lemma translation invariance of M^l along V_k near points of M^k

flat_lemma is derived from the axioms; it is reported alongside them.
"""

from itertools import combinations
from typing import Dict, List, Tuple

import numpy as np

from stratified_hjb.geometry.stratification import FlatStratification, Stratum
from stratified_hjb.utils.logging_utils import get_module_logger
from stratified_hjb.verify.report import CheckReport

AXIOM_LABELS = ("afs_i", "afs_ii", "afs_iii", "disjointness", "cover")
RADIUS_LADDER_LEVELS = 8
FLAT_LEMMA_POINTS_PER_STRATUM = 8


class AFSValidator:
    """Sampled checker for the AFS axioms."""

    def __init__(self, strat: FlatStratification, sample_density: float):
        """
        Initialize the validator.

        Args:
            strat: Stratification to check
            sample_density: Sample points per unit length
        """
        if sample_density <= 0:
            raise ValueError("sample_density must be positive")
        self.logger = get_module_logger("AFSValidator")
        self.strat = strat
        self.density = float(sample_density)
        self.tol = strat.snap_tolerance

        self.interior: Dict[int, np.ndarray] = {}
        self.boundary: Dict[int, np.ndarray] = {}

    def run(self) -> CheckReport:
        """
        Run all axiom checks.

        Returns:
            CheckReport with one site per axiom outcome (residual 0 pass, 1 fail)
        """
        self.logger.info(f"Validating AFS axioms on {len(self.strat.strata)} strata "
                         f"(density {self.density})")
        report = CheckReport(check="validate_afs", tolerance=0.0)

        for stratum in self.strat.strata:
            self.interior[stratum.id] = self.strat.sample_stratum(stratum, self.density)
            self.boundary[stratum.id] = self.strat.boundary_samples(stratum, self.interior[stratum.id])

        self._check_disjointness_and_cover(report)
        self._check_lower_accumulation(report)
        self._check_frontier(report)
        radii = self._check_flat_lemma(report)

        failed = sorted({site.label for site in report.failures()})
        report.summary.update({
            "failed_axioms": [label for label in failed if label in AXIOM_LABELS],
            "failed_derived": [label for label in failed if label not in AXIOM_LABELS],
            "admissible_radius": radii,
            "sample_counts": {str(k): int(v.shape[0]) for k, v in self.interior.items()},
        })
        if report.passed:
            self.logger.info("All AFS axioms hold on the samples")
        else:
            self.logger.warning(f"AFS validation failed: {failed}")
        return report

    def _all_samples(self) -> np.ndarray:
        pieces = [self.strat.box_lattice(self.density)]
        pieces.extend(self.interior.values())
        pieces.extend(self.boundary.values())
        return np.concatenate([p for p in pieces if p.size], axis=0)

    def _check_disjointness_and_cover(self, report: CheckReport) -> None:
        points = self._all_samples()
        dims, counts = self.strat.claim_counts(points)

        overlap = np.flatnonzero(counts > 1)
        if overlap.size:
            witness = points[overlap[0]]
            owners = [s.id for s in self.strat.of_dimension(int(dims[overlap[0]]))
                      if s.contains(witness, self.tol)[0]]
            report.add("disjointness", witness, 1.0, dim=int(dims[overlap[0]]), owners=owners,
                       violations=int(overlap.size))
        else:
            report.add("disjointness", None, 0.0, samples=int(points.shape[0]))

        uncovered = np.flatnonzero(dims < 0)
        if uncovered.size:
            report.add("cover", points[uncovered[0]], 1.0, violations=int(uncovered.size))
        else:
            report.add("cover", None, 0.0, samples=int(points.shape[0]))

    def _check_lower_accumulation(self, report: CheckReport) -> None:
        """
        Locate the relative boundary of every stratum.

        A boundary point of a k-stratum that locates in a stratum of dimension
        greater than k means M^k accumulates on a higher stratum (afs_i) and
        that closure(M^k) leaves M^0 u ... u M^k (afs_iii).
        """
        for stratum in self.strat.strata:
            # Structure: orthonormal basis is enforced at construction
            report.add("afs_i", stratum.basepoint, 0.0, stratum_id=stratum.id, dim=stratum.dim,
                       aspect="structure")

            points = self.boundary[stratum.id]
            if points.size == 0:
                report.add("afs_iii", None, 0.0, stratum_id=stratum.id, dim=stratum.dim)
                continue
            dims, _ = self.strat.claim_counts(points)
            bad = np.flatnonzero((dims > stratum.dim) | (dims < 0))
            if bad.size:
                witness = points[bad[0]]
                report.add("afs_iii", witness, 1.0, stratum_id=stratum.id, dim=stratum.dim,
                           located_dim=int(dims[bad[0]]), violations=int(bad.size))
                report.add("afs_i", witness, 1.0, stratum_id=stratum.id, dim=stratum.dim,
                           aspect="lower stratum accumulates", located_dim=int(dims[bad[0]]))
            else:
                report.add("afs_iii", None, 0.0, stratum_id=stratum.id, dim=stratum.dim,
                           samples=int(points.shape[0]))

    def _closure_of_dimension(self, points: np.ndarray, l: int) -> np.ndarray:
        members = self.strat.of_dimension(l)
        if not members or points.size == 0:
            return np.zeros(points.shape[0], dtype=bool)
        return np.any(np.stack([s.closure_contains(points, self.tol) for s in members], axis=1), axis=1)

    def _check_frontier(self, report: CheckReport) -> None:
        n = self.strat.dimension
        for stratum in self.strat.strata:
            points = self.interior[stratum.id]
            if points.size == 0:
                continue
            for l in range(stratum.dim + 1, n + 1):
                in_closure = self._closure_of_dimension(points, l)
                if np.any(in_closure) and not np.all(in_closure):
                    meet = points[int(np.argmax(in_closure))]
                    outside = points[int(np.argmax(~in_closure))]
                    report.add("afs_ii", meet, 1.0, stratum_id=stratum.id, dim=stratum.dim,
                               higher_dim=l, point_outside_closure=outside.tolist())
                else:
                    report.add("afs_ii", None, 0.0, stratum_id=stratum.id, dim=stratum.dim,
                               higher_dim=l, contained=bool(np.all(in_closure)))

    def _offset_directions(self) -> np.ndarray:
        n = self.strat.dimension
        eye = np.eye(n)
        directions = [eye[i] * s for i in range(n) for s in (1.0, -1.0)]
        for i, j in combinations(range(n), 2):
            for si in (1.0, -1.0):
                for sj in (1.0, -1.0):
                    directions.append((si * eye[i] + sj * eye[j]) / np.sqrt(2.0))
        return np.array(directions)

    def _check_flat_lemma(self, report: CheckReport) -> Dict[str, float]:
        """
        Sample the translation invariance near each lower stratum.

        For x in S (dim k), nearby y = x + r/2 u in a higher stratum M^l are
        shifted by +-0.4 r along V_k; each shifted point inside B(x, r) must stay
        in M^l. The largest ladder radius passing for every sampled x is reported.
        """
        directions = self._offset_directions()
        ladder = [self.strat.diameter / 2 ** j for j in range(1, RADIUS_LADDER_LEVELS + 1)]
        radii: Dict[str, float] = {}

        for stratum in self.strat.lower_strata:
            points = self._flat_lemma_points(stratum)
            if points.size == 0:
                continue
            worst = np.inf
            for x in points:
                best, witness = self._largest_flat_radius(stratum, x, directions, ladder)
                worst = min(worst, best)
                if best == 0.0:
                    report.add("flat_lemma", x, 1.0, stratum_id=stratum.id, dim=stratum.dim,
                               nearby=witness[0], shifted=witness[1])
                    break
            else:
                report.add("flat_lemma", None, 0.0, stratum_id=stratum.id, dim=stratum.dim,
                           radius=worst)
            radii[str(stratum.id)] = float(worst)
        return radii

    def _flat_lemma_points(self, stratum: Stratum) -> np.ndarray:
        points = self.interior[stratum.id]
        if points.shape[0] <= FLAT_LEMMA_POINTS_PER_STRATUM:
            return points
        # Basepoint first when present, then an even spread
        order = np.argsort(np.linalg.norm(points - stratum.basepoint, axis=1), kind="stable")
        picks = np.linspace(0, points.shape[0] - 1, FLAT_LEMMA_POINTS_PER_STRATUM).astype(int)
        return points[np.unique(np.concatenate([[order[0]], picks]))]

    def _largest_flat_radius(self, stratum: Stratum, x: np.ndarray, directions: np.ndarray,
                             ladder: List[float]) -> Tuple[float, Tuple[list, list]]:
        witness: Tuple[list, list] = ([], [])
        for radius in ladder:
            nearby = x + 0.5 * radius * directions
            nearby = nearby[self.strat.in_box(nearby, tol=0.0)]
            if nearby.size == 0 or stratum.dim == 0:
                return radius, witness
            nearby_dims, _ = self.strat.claim_counts(nearby)
            ok = True
            for y, l in zip(nearby, nearby_dims):
                if l <= stratum.dim:
                    continue
                shifts = np.concatenate([0.4 * radius * stratum.tangent_basis,
                                         -0.4 * radius * stratum.tangent_basis])
                shifted = y + shifts
                keep = (np.linalg.norm(shifted - x, axis=1) < radius) & self.strat.in_box(shifted, tol=0.0)
                shifted = shifted[keep]
                if shifted.size == 0:
                    continue
                shifted_dims, _ = self.strat.claim_counts(shifted)
                if np.any(shifted_dims != l):
                    witness = (y.tolist(), shifted[int(np.argmax(shifted_dims != l))].tolist())
                    ok = False
                    break
            if ok:
                return radius, witness
        return 0.0, witness


def validate_afs(strat: FlatStratification, sample_density: float) -> CheckReport:
    """
    Check the AFS axioms on deterministic samples.

    Args:
        strat: Stratification to check
        sample_density: Sample points per unit length (> 0)

    Returns:
        CheckReport with pass/fail per axiom and witnesses for failures
    """
    return AFSValidator(strat, sample_density).run()
