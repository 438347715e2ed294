"""
Error types for Stratified HJB.

Every error carries the process exit code the command line reports for it:
2 for input errors, 3 for numerical preconditions. Failed checks are not errors;
they come back as reports and map to exit code 1.
"""

from typing import Optional

EXIT_PASS = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_NUMERICAL = 3


class StratifiedHJBError(Exception):
    """Base class for all package errors."""

    exit_code = EXIT_INPUT_ERROR


class ConfigError(StratifiedHJBError):
    """A problem configuration could not be parsed or is inconsistent."""

    def __init__(self, field_path: str, message: str, line: Optional[int] = None,
                 column: Optional[int] = None):
        self.field_path = field_path
        self.line = line
        self.column = column
        location = ""
        if line is not None:
            location = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(f"{field_path}{location}: {message}")


class UnknownBuiltin(StratifiedHJBError):
    """The requested builtin problem does not exist."""


class ResolutionMismatch(StratifiedHJBError):
    """A stored grid does not match the resolution of its configuration."""


class LocationError(StratifiedHJBError):
    """Base class for point location failures."""


class OutOfBox(LocationError):
    """The point lies outside the bounding box."""


class AmbiguousLocation(LocationError):
    """Two strata of the same dimension both claim the point."""


class UncoveredPoint(LocationError):
    """No stratum claims the point."""


class NoRuleForRegion(StratifiedHJBError):
    """An open region has no dynamics rule."""


class BoundViolation(StratifiedHJBError):
    """An evaluated generator exceeds the global bound M."""


class CflViolation(StratifiedHJBError):
    """The time step is too large for the space step."""

    exit_code = EXIT_NUMERICAL


class GridMisaligned(StratifiedHJBError):
    """The lattice does not carry the interfaces of the stratification."""

    exit_code = EXIT_NUMERICAL


class FootOutsideBox(StratifiedHJBError):
    """A scheme foot left the box while strict box handling was requested."""

    exit_code = EXIT_NUMERICAL


class ComplexityGuard(StratifiedHJBError):
    """An enumeration would exceed the configured work limit."""

    exit_code = EXIT_NUMERICAL


class PreconditionError(StratifiedHJBError):
    """A numerical precondition of an operation is not met."""

    exit_code = EXIT_NUMERICAL


class InfeasibleSelection(StratifiedHJBError):
    """A trajectory policy returned a point outside the dynamics hull."""

    exit_code = EXIT_CHECK_FAILED
