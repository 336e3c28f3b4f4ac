"""
Error types for wbary.

ValidationError subclasses mean the caller handed us something that breaks a
precondition or a type invariant; the CLI turns those into exit code 2.
Everything else deriving from WbaryError is a runtime failure (exit code 1).
"""


class WbaryError(Exception):
    """Base class for every error raised by this package."""


# ==========================================
# Validation failures (exit 2)
# ==========================================
class ValidationError(WbaryError):
    pass


class ParseError(ValidationError):
    pass


class InvariantError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class RangeError(ValidationError):
    pass


class AbsContinuityError(ValidationError):
    pass


class SizeError(ValidationError):
    pass


class OracleScopeError(ValidationError):
    pass


class ScaleError(ValidationError):
    pass


class ConstraintError(ValidationError):
    pass


class FamilyError(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class GridMismatchError(ValidationError):
    pass


class InsufficientDataError(ValidationError):
    pass


class UsageError(ValidationError):
    pass


# ==========================================
# Runtime failures (exit 1)
# ==========================================
class InfeasibleError(WbaryError):
    pass


class CertificationError(WbaryError):
    """LP solution failed the dual-feasibility / complementary-slackness check."""


class EfficiencyError(WbaryError):
    pass


class NoDecreaseError(WbaryError):
    pass


# ==========================================
# Non-fatal conditions
# ==========================================
class ConvexityWarning(UserWarning):
    pass


class MaxIterWarning(UserWarning):
    pass
