"""Pass/fail check results and report serialization."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one numerical check.

    ``worst_margin`` is the smallest observed slack of the inequality
    being verified (bound minus measured quantity); negative means the
    check failed at ``worst_t``. ``applicable`` is False when the check
    does not apply to the given schedule or trace; such results never
    count as failures.
    """

    name: str
    passed: bool
    worst_margin: float
    worst_t: int
    detail: str = ""
    applicable: bool = True

    def to_dict(self) -> dict:
        d = asdict(self)
        if not math.isfinite(d["worst_margin"]):
            d["worst_margin"] = None  # keeps the report strict-JSON
        return d


def all_passed(results) -> bool:
    """True iff every applicable check passed."""
    return all(r.passed for r in results if r.applicable)
