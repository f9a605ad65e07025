"""Exception hierarchy shared by every module.

Two branches matter for the CLI exit-code contract: PreconditionError maps to
exit code 2 (bad input), NumericError to exit code 3 (a computation that was
attempted and failed).
"""


class HermankitError(Exception):
    """Base class of everything raised deliberately by this package."""


class PreconditionError(HermankitError, ValueError):
    """An input violates a documented precondition."""


class NumericError(HermankitError, ArithmeticError):
    """A numerical procedure failed (diverged, underflowed, ran out of digits)."""


class DegenerateInputError(PreconditionError):
    """Structurally degenerate input, e.g. the zero polynomial."""


class UnsupportedRepresentationError(PreconditionError):
    """The value cannot be represented exactly by the requested operation."""


class TrustRegionError(PreconditionError):
    """A requested radius exceeds the region where the series is trusted."""


class DegreeOverflowError(PreconditionError):
    """An iterate polynomial would exceed the root-finder degree budget."""


class PoleDerivativeError(PreconditionError):
    """Derivative requested at a pole of the map."""


class PrecisionExhaustedError(NumericError):
    """The working precision cannot certify the next digit or floor."""


class SmallDivisorError(NumericError):
    """A small divisor underflowed the working precision."""


class NoConvergenceError(NumericError):
    """An iteration failed to reach tolerance; carries the best iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NoRingFoundError(NumericError):
    """No candidate orbit stayed inside the Herman-ring annulus."""


class SeedLostError(NumericError):
    """A parameter search step lost every sustained ring orbit."""


class LiftJumpError(NumericError):
    """A lifted circle orbit produced a step too large to trust the branch."""


class OrbitEscapeError(NumericError):
    """An orbit left the annulus in which the estimator is defined."""


class CircleInvarianceError(NumericError):
    """The map failed to preserve the unit circle to tolerance."""


class NonMonotoneFamilyError(NumericError):
    """The coarse scan of the family found a decreasing rotation-number pair."""
