"""
Error types for frobhodge

Every error carries an optional witness payload (JSON-friendly) describing
where the failure was detected. Input errors map to CLI exit code 2,
mathematical failures to exit code 1.
"""

from typing import Any, Optional


class FrobHodgeError(ValueError):
    """Base class for all frobhodge errors."""

    exit_code = 1

    def __init__(self, message: str, witness: Optional[Any] = None):
        super().__init__(message)
        self.witness = witness


# ============================================================
# Input errors
# ============================================================

class InputError(FrobHodgeError):
    exit_code = 2


class ParseError(InputError):
    pass


class ShapeMismatch(InputError):
    pass


class SeriesMismatch(InputError):
    """Operands with different variable count or truncation order."""


class NotSymmetric(InputError):
    pass


class TauPresent(InputError):
    pass


class UnsupportedWeight(InputError):
    pass


class NotDivisorIndex(InputError):
    pass


# ============================================================
# Mathematical failures
# ============================================================

class MathematicalFailure(FrobHodgeError):
    exit_code = 1


class NotClosed(MathematicalFailure):
    pass


class InconsistentPrimitive(MathematicalFailure):
    pass


class GradingViolation(MathematicalFailure):
    pass


class NotNilpotent(MathematicalFailure):
    pass


class NotHodgeTate(MathematicalFailure):
    pass


class NotPolarizable(MathematicalFailure):
    pass


class ConeDegenerate(MathematicalFailure):
    pass


class NotMaximallyUnipotent(MathematicalFailure):
    pass


class NotSelfDual(MathematicalFailure):
    pass


class InvalidModule(MathematicalFailure):
    """Module data failing one or more axioms; witness lists the failed checks."""


class MalformedOrbit(MathematicalFailure):
    pass


class NotSelfDualizable(MathematicalFailure):
    pass


class NotIntegrable(MathematicalFailure):
    pass


class LogPartNonzero(MathematicalFailure):
    pass


class NotCanonical(MathematicalFailure):
    pass


class IntegrationInconsistent(MathematicalFailure):
    pass


class NotFlat(MathematicalFailure):
    pass
