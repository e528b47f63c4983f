"""Exception types shared across the package."""

from __future__ import annotations


class RouteFormatError(ValueError):
    """Raised when a route/signal document fails validation.

    Carries the offending field path so callers can print actionable
    diagnostics.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class VehicleFormatError(ValueError):
    """Raised when a vehicle parameter document fails validation."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class UnknownSignalError(KeyError):
    """Raised when a signal id is referenced but not defined."""


class InfeasiblePowerError(ValueError):
    """Battery power demand exceeds what the pack can deliver."""


class ZeroMeanVelocityError(ValueError):
    """A spatial step was attempted with zero mean velocity at a plain node.

    Travel time over the step is undefined in that case.
    """


class StartStateInfeasibleError(RuntimeError):
    """The DP start state has infinite cost-to-go (no admissible plan)."""
