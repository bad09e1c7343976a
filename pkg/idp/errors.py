"""Exceptions raised by the planners, simulators and the command line."""


class IdpError(Exception):
    """Base class of all errors raised by this package."""


class ValidationError(IdpError, ValueError):
    """An argument, model or config violates one of its invariants."""


class InvalidHorizon(ValidationError):
    """Planning horizon smaller than one."""


class DiscountedFiniteUnsupported(ValidationError):
    """Finite-horizon planning was asked for with a discount below one."""


class UndiscountedInfinite(ValidationError):
    """Infinite-horizon planning was asked for without discounting."""


class EmptySupport(IdpError):
    """No prior tuple lies inside the current incentive ranges."""


class InconsistentObservation(IdpError):
    """An outcome contradicts the bounds established so far."""


class InstanceTooLarge(IdpError):
    """A brute-force reference exceeds its explicit size guard."""


class InvariantViolation(IdpError):
    """Internal consistency failure; signals a bug, not bad input."""


class UnreachableNode(InvariantViolation):
    """A policy reached a belief node its plan never solved."""


class BoundViolation(InvariantViolation):
    """A sequential planner exceeded its guaranteed suboptimality slack."""
