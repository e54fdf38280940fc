from dataclasses import dataclass, field
from typing import Any, Optional


@dataclass
class Check:
    name: str
    passed: bool
    measured: Any = None
    threshold: Any = None
    note: str = ""

    def as_dict(self):
        return {
            "name": self.name,
            "pass": bool(self.passed),
            "measured": _jsonable(self.measured),
            "threshold": _jsonable(self.threshold),
            "note": self.note,
        }


@dataclass
class ValidationReport:
    """Named pass/fail checks; ``overall`` is their conjunction."""

    checks: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def add(self, name, passed, measured=None, threshold=None, note=""):
        self.checks.append(Check(name, bool(passed), measured, threshold, note))
        return self

    @property
    def overall(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __contains__(self, name):
        return any(c.name == name for c in self.checks)

    def failed(self):
        return [c.name for c in self.checks if not c.passed]

    def as_dict(self):
        return {
            "overall": self.overall,
            "checks": [c.as_dict() for c in self.checks],
            "warnings": list(self.warnings),
        }


def _jsonable(v: Optional[Any]):
    if v is None or isinstance(v, (bool, str)):
        return v
    try:
        return float(v)
    except (TypeError, ValueError):
        return str(v)
