"""Tests for flat stratifications, point location and the AFS validator."""

import numpy as np
import pytest

from conftest import line_strata
from stratified_hjb.core.errors import OutOfBox, UncoveredPoint
from stratified_hjb.data.builtins import builtin_problem
from stratified_hjb.geometry.afs_validator import validate_afs
from stratified_hjb.geometry.stratification import CellConstraint, FlatStratification, Stratum, split_covector


def _cross_strat():
    return builtin_problem("cross").stratification()


def _bad_line(overlap):
    """Line strata whose regions either overlap on (-0.5, 0) or leave it uncovered."""
    left = CellConstraint(normal=(1.0,), offset=0.0 if overlap else -0.5, sense="<")
    right = CellConstraint(normal=(1.0,), offset=-0.5 if overlap else 0.0, sense=">")
    return FlatStratification(
        box_lower=[-1.0],
        box_upper=[1.0],
        strata=(
            Stratum(id=0, dim=0, basepoint=[0.0], tangent_basis=np.zeros((0, 1))),
            Stratum(id=1, dim=1, basepoint=[0.0], tangent_basis=[[1.0]], cell=(left,)),
            Stratum(id=2, dim=1, basepoint=[0.0], tangent_basis=[[1.0]], cell=(right,)),
        ),
    )


def test_locate_cross():
    strat = _cross_strat()
    assert strat.locate([0.0, 0.0]).id == 0
    assert strat.locate([0.5, 0.0]).id == 1
    assert strat.locate([-0.5, 0.0]).id == 2
    assert strat.locate([0.0, 0.5]).id == 3
    assert strat.locate([0.0, -0.5]).id == 4
    assert strat.locate([0.5, 0.5]).id == 5
    assert strat.locate([-0.5, 0.5]).id == 6
    assert strat.locate([-0.5, -0.5]).id == 7
    assert strat.locate([0.5, -0.5]).id == 8


def test_locate_snaps_to_lowest_dimension():
    strat = _cross_strat()
    assert strat.snap_tolerance == pytest.approx(1e-9 * 2 * np.sqrt(2.0))
    assert strat.locate([1e-12, 0.5]).id == 3
    assert strat.locate([1e-12, -1e-12]).id == 0
    assert strat.locate([1e-6, 0.5]).id == 5


def test_locate_many_matches_locate():
    strat = _cross_strat()
    rng = np.random.default_rng(3)
    points = rng.uniform(-1.0, 1.0, size=(50, 2))
    points[::5, 0] = 0.0
    positions = strat.locate_many(points)
    for point, position in zip(points, positions):
        assert strat.strata[position] is strat.locate(point)


def test_locate_outside_box_raises():
    with pytest.raises(OutOfBox):
        _cross_strat().locate([2.0, 0.0])


def test_locate_uncovered_raises():
    with pytest.raises(UncoveredPoint):
        _bad_line(overlap=False).locate([-0.25])


def test_split_covector():
    strat = _cross_strat()
    east = strat.stratum(1)
    p_top, p_bot = split_covector(east, [0.3, -0.7])
    assert np.allclose(p_top, [0.3, 0.0])
    assert np.allclose(p_bot, [0.0, -0.7])
    p_top, p_bot = split_covector(strat.stratum(0), [0.3, -0.7])
    assert np.allclose(p_top, 0.0)


def test_stratum_rejects_bad_basis():
    with pytest.raises(ValueError):
        Stratum(id=0, dim=1, basepoint=[0.0, 0.0], tangent_basis=[[1.0, 1.0]])
    with pytest.raises(ValueError):
        Stratum(id=0, dim=2, basepoint=[0.0, 0.0], tangent_basis=[[1.0, 0.0]])


def test_interface_offsets():
    offsets = _cross_strat().interface_offsets()
    assert offsets == {0: [0.0], 1: [0.0]}


def test_validate_afs_line_and_cross_pass():
    for strat in (line_strata(), _cross_strat()):
        report = validate_afs(strat, sample_density=8.0)
        assert report.passed
        assert report.summary["failed_axioms"] == []


def test_validate_afs_figure1_passes():
    config = builtin_problem("figure1-r3")
    report = validate_afs(config.stratification(), config.checks.sample_density)
    assert report.passed, [site.to_dict() for site in report.failures()]


def test_validate_afs_forbidden_fails_frontier():
    config = builtin_problem("forbidden-r3")
    report = validate_afs(config.stratification(), config.checks.sample_density)
    assert not report.passed
    assert "afs_ii" in report.summary["failed_axioms"]
    witness = report.sites_labelled("afs_ii")
    assert any(not site.passed and site.location is not None for site in witness)


def test_validate_afs_detects_overlap_and_gap():
    overlap = validate_afs(_bad_line(overlap=True), sample_density=8.0)
    assert "disjointness" in overlap.summary["failed_axioms"]
    gap = validate_afs(_bad_line(overlap=False), sample_density=8.0)
    assert "cover" in gap.summary["failed_axioms"]
