"""
Check reports for Stratified HJB.

A CheckReport is the structured pass/fail record every checker returns: one
SiteRecord per checked site (a grid node, a sample point or an axiom), with a
signed residual that passes when it does not exceed the report tolerance.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence


@dataclass
class SiteRecord:
    """One checked site."""

    label: str
    location: Optional[Sequence[float]]
    residual: float
    passed: bool
    time: Optional[float] = None
    stratum_id: Optional[int] = None
    dim: Optional[int] = None
    detail: Dict[str, Any] = field(default_factory=dict)
    tolerance: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "label": self.label,
            "location": None if self.location is None else [float(v) for v in self.location],
            "time": self.time,
            "residual": self.residual,
            "pass": self.passed,
            "stratum_id": self.stratum_id,
            "dim": self.dim,
            "detail": self.detail,
        }
        if self.tolerance is not None:
            data["tolerance"] = self.tolerance
        return data


@dataclass
class CheckReport:
    """Structured result of one check."""

    check: str
    tolerance: float
    sites: List[SiteRecord] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)

    def add(self, label: str, location: Optional[Sequence[float]], residual: float,
            time: Optional[float] = None, stratum_id: Optional[int] = None,
            dim: Optional[int] = None, tolerance: Optional[float] = None, **detail: Any) -> SiteRecord:
        """
        Append a site; its pass flag is derived from the report tolerance,
        or from `tolerance` when the site has its own.

        Returns:
            The new site record
        """
        residual = float(residual)
        limit = self.tolerance if tolerance is None else float(tolerance)
        record = SiteRecord(
            label=label,
            location=None if location is None else tuple(float(v) for v in location),
            residual=residual,
            passed=bool(residual <= limit),
            time=None if time is None else float(time),
            stratum_id=stratum_id,
            dim=dim,
            detail=detail,
            tolerance=None if tolerance is None else limit,
        )
        self.sites.append(record)
        return record

    @property
    def max_residual(self) -> float:
        if not self.sites:
            return 0.0
        return max(site.residual for site in self.sites)

    @property
    def failure_count(self) -> int:
        return sum(1 for site in self.sites if not site.passed)

    @property
    def passed(self) -> bool:
        return self.failure_count == 0

    def failures(self) -> List[SiteRecord]:
        return [site for site in self.sites if not site.passed]

    def sites_labelled(self, label: str) -> List[SiteRecord]:
        return [site for site in self.sites if site.label == label]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "check": self.check,
            "tolerance": self.tolerance,
            "sites": [site.to_dict() for site in self.sites],
            "max_residual": self.max_residual,
            "failure_count": self.failure_count,
            "summary": self.summary,
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return dumps_report(self.to_dict())


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars, tuples and non-finite floats into JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return _jsonable(value.tolist())
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return str(value)


def dumps_report(payload: Dict[str, Any]) -> str:
    """
    Serialize a report dictionary deterministically.

    Args:
        payload: Report dictionary

    Returns:
        JSON text with sorted keys
    """
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True, allow_nan=False)
