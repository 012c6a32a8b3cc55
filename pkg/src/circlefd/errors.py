"""Error types for the construction pipeline.

Every error carries a machine-readable payload so the CLI can emit error JSON.
"""
from __future__ import annotations


class ConstructionError(Exception):
    """Base class; `payload` is JSON-serializable context for CLI error output."""

    exit_code = 1

    def __init__(self, message: str, **payload):
        super().__init__(message)
        self.payload = payload

    def as_json(self) -> dict:
        return {
            "error": type(self).__name__,
            "message": str(self),
            **self.payload,
        }


class RationalInput(ConstructionError):
    """The alpha spec denotes a rational number."""

    exit_code = 2


class NotCertifiable(ConstructionError):
    """A decimal alpha enclosure is too wide to certify the requested quotients."""

    exit_code = 2


class PrecisionExhausted(ConstructionError):
    """An enclosure could not be separated at the maximum precision budget."""

    exit_code = 3


class DepthTooLarge(ConstructionError):
    """Digit-sequence extension breached the configured integer-size resource cap."""

    exit_code = 1


class DisjointnessUndecided(ConstructionError):
    """Translate disjointness was not certified within the depth budget.

    Not a refutation: deeper covers might still separate the translates.
    """

    exit_code = 3

    def __init__(self, n: int, m: int, depth: int):
        super().__init__(
            f"translates R^{n} and R^{m} not separated by depth {depth}",
            n=n,
            m=m,
            depth=depth,
        )
        self.n = n
        self.m = m
        self.depth = depth


class BudgetExceeded(ConstructionError):
    """A configured resource limit (atom count, orbit budget) was breached."""

    exit_code = 1


class ToleranceNotMet(ConstructionError):
    """An evaluator could not reach its configured output tolerance."""

    exit_code = 1
