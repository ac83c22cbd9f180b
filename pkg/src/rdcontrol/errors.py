"""Semantic exception hierarchy for the package.

Callers can tell apart bad inputs (DomainError, ModelError, ConfigError),
honest infeasibility of a control task (FeasibilityError), and numerical
breakdown of a scheme or solver (NumericalError). The CLI maps these onto
distinct exit codes.
"""


class RdControlError(Exception):
    """Base class for all package errors."""


class DomainError(RdControlError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ModelError(RdControlError, ValueError):
    """A reaction model violates the structural hypotheses."""


class ConfigError(RdControlError, ValueError):
    """An experiment configuration is malformed or inconsistent."""


class FeasibilityError(RdControlError, RuntimeError):
    """A control task is infeasible in the requested regime."""


class NumericalError(RdControlError, RuntimeError):
    """A scheme or solver lost stability or failed to converge."""
