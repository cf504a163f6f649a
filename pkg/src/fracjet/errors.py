"""Exception types shared across the package."""

from __future__ import annotations


class FracJetError(Exception):
    """Base class for all package errors."""


class PoleError(FracJetError, ValueError):
    """A gamma function argument hit a pole (zero or a negative integer)."""


class DomainError(FracJetError, ValueError):
    """An argument lies outside the documented evaluation domain."""


class SingularMetricError(FracJetError, ValueError):
    """The fractional velocity Hessian is singular at the requested point."""

    def __init__(self, message: str, point: dict | None = None) -> None:
        super().__init__(message)
        self.point = point


class IntegrationError(FracJetError, RuntimeError):
    """A time integration produced a non-finite value or left its domain."""

    def __init__(self, message: str, step: int | None = None, time: float | None = None) -> None:
        super().__init__(message)
        self.step = step
        self.time = time


class InversionError(FracJetError, ValueError):
    """The Legendre map could not be inverted on the requested box."""
