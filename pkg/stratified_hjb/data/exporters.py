"""
Result exporters for Stratified HJB.

This module writes value grids, study tables and check reports. Tables go
through pandas with a header row, '.' decimals, '%.17g' floats and '\\n' line
endings, so repeated runs produce byte-identical files.
"""

import os
from typing import Any, Dict, List

import pandas as pd

from stratified_hjb.solver.value_grid import ValueGrid
from stratified_hjb.utils.logging_utils import get_module_logger
from stratified_hjb.verify.report import CheckReport, dumps_report

FLOAT_FORMAT = "%.17g"
BINARY_EXTENSIONS = (".bin", ".shjb")


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_frame(frame: pd.DataFrame, path: str) -> None:
    _ensure_parent(path)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")


def write_grid(grid: ValueGrid, path: str) -> str:
    """
    Write a value grid, binary for .bin/.shjb paths and CSV otherwise.

    Returns:
        The written path
    """
    logger = get_module_logger("Exporters")
    try:
        if path.lower().endswith(BINARY_EXTENSIONS):
            _ensure_parent(path)
            grid.write_binary(path)
        else:
            write_frame(grid.to_frame(), path)
        logger.info(f"Wrote value grid to {path}")
        return path
    except Exception as e:
        logger.error(f"Error writing value grid: {str(e)}", exc_info=True)
        raise


def read_grid(path: str) -> ValueGrid:
    """Read a grid written by write_grid."""
    if path.lower().endswith(BINARY_EXTENSIONS):
        return ValueGrid.read_binary(path)
    return ValueGrid.from_frame(pd.read_csv(path))


def study_frame(report: CheckReport) -> pd.DataFrame:
    """The study table of a filippov or refinement report."""
    rows: List[Dict[str, Any]] = report.summary.get("table", [])
    return pd.DataFrame(rows)


def write_study(report: CheckReport, path: str) -> str:
    write_frame(study_frame(report), path)
    return path


def write_report(report: CheckReport, path: str) -> str:
    """Write a report as deterministic JSON."""
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps_report(report.to_dict()))
        f.write("\n")
    return path
