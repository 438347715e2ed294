"""
Builtin problem library for Stratified HJB.

Each builtin is a JSON problem file shipped in the `problems` directory next to
this module. Their numeric values are artifact defaults, recorded as such in
the `notes` of every file.
"""

import os

from stratified_hjb.core.errors import UnknownBuiltin
from stratified_hjb.data.config_loader import ProblemConfig, parse_config_text

PROBLEMS_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "problems")

BUILTIN_NAMES = ("line-r3", "cross", "figure1-r3", "two-speed-1d", "two-cost-1d", "forbidden-r3")


def builtin_path(name: str) -> str:
    if name not in BUILTIN_NAMES:
        raise UnknownBuiltin(f"Unknown builtin {name!r}; available: {', '.join(BUILTIN_NAMES)}")
    return os.path.join(PROBLEMS_DIR, f"{name}.json")


def builtin_text(name: str) -> str:
    """The shipped JSON text of a builtin."""
    with open(builtin_path(name), "r", encoding="utf-8") as f:
        return f.read()


def builtin_problem(name: str) -> ProblemConfig:
    """
    Load a builtin problem configuration.

    Args:
        name: One of BUILTIN_NAMES

    Returns:
        ProblemConfig

    Raises:
        UnknownBuiltin: name is not a builtin
    """
    return parse_config_text(builtin_text(name))
