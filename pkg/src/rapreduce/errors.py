"""Error types shared by every solver and adapter."""

from __future__ import annotations


class RapError(Exception):
    """Base class; ``code`` is the stable machine-readable error name."""

    code = "RAP_ERROR"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.details = details

    def __str__(self) -> str:
        msg = super().__str__()
        return f"{self.code}: {msg}" if msg != self.code else msg


class DimensionMismatch(RapError):
    code = "DIMENSION_MISMATCH"


class NonpositiveScale(RapError):
    code = "NONPOSITIVE_SCALE"


class MalformedFamily(RapError):
    code = "MALFORMED_FAMILY"


class DomainViolation(RapError):
    code = "DOMAIN_VIOLATION"


class InfeasibleInstance(RapError):
    code = "INFEASIBLE"


class InfeasiblePoint(RapError):
    code = "INFEASIBLE_POINT"


class CertificateFailure(RapError):
    code = "CERTIFICATE_FAILURE"


class NotStrictlyConvex(RapError):
    code = "NOT_STRICTLY_CONVEX"


class BudgetExceeded(RapError):
    code = "BUDGET_EXCEEDED"


class GreedyUnsafe(RapError):
    code = "GREEDY_UNSAFE"
