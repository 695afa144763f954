"""
Error hierarchy for effham

Every failure a backend can signal is a subclass of EffHamError so callers
can catch the family and still branch on the specific condition.
"""

from typing import Optional


class EffHamError(Exception):
    """Base class for effham errors"""
    pass


class NonPeriodic(EffHamError):
    """Sampled closure is not 1-periodic in q"""
    pass


class InvalidField(EffHamError):
    """Field values are not finite, or declared flags do not hold"""
    pass


class DomainTooSmall(EffHamError):
    """Momentum grid does not cover the requested cutoff support"""
    pass


class RangeExceeded(EffHamError):
    """Shifted momenta leave the momentum grid"""
    pass


class NewtonDivergence(EffHamError):
    """Implicit step did not converge"""
    pass


class OutOfDomain(EffHamError):
    """Trajectory left the momentum grid"""
    pass


class StepTooLarge(EffHamError):
    """Generating-function step violates the near-identity condition"""
    pass


class GridMismatch(EffHamError):
    """Operands are sampled on different grids"""
    pass


class ClassNotFound(EffHamError):
    """Distinguished homology class vanished in the truncated complex"""
    pass


class NotConvex(EffHamError):
    """Operation requires a field convex in p"""
    pass


class WindowTooSmall(EffHamError):
    """Lax-Oleinik minimizer sits on the velocity window boundary"""
    pass


class NotMechanical(EffHamError):
    """Field is not of the form 1/2 p^2 - V(q)"""
    pass


class BackendInvalid(EffHamError):
    """Backend preconditions are not met by the input field"""

    def __init__(self, backend: str, reason: str, hint: Optional[str] = None):
        self.backend = backend
        self.reason = reason
        self.hint = hint
        message = f"backend '{backend}' cannot be used: {reason}"
        if hint:
            message += f" (hint: {hint})"
        super().__init__(message)


class ResolutionBudget(EffHamError):
    """Requested resolution exceeds the configured budget"""
    pass


class ConfigInvalid(EffHamError):
    """Experiment config failed schema validation"""
    pass


class SchemaMismatch(EffHamError):
    """Result files being compared do not share a schema"""
    pass
