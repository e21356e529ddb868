"""Exception hierarchy.

Numerical failures carry the ``operation`` that raised them so the CLI can
report ``module.operation`` alongside the message.
"""


class QMEError(Exception):
    """Base class for all errors raised by the package."""

    operation = None

    def __init__(self, message, operation=None):
        super().__init__(message)
        if operation is not None:
            self.operation = operation


class StructuralError(QMEError, ValueError):
    """Shapes or dimensions are inconsistent."""


class ConfigError(QMEError, ValueError):
    """A configuration or spec document violates its schema."""

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class UnsupportedFormError(QMEError, ValueError):
    """The generator cannot be brought into (or is not in) the required form."""


class ScheduleError(QMEError):
    """A coupling schedule failed to evaluate."""


class NumericalError(QMEError):
    """Base class for failures of a numerical procedure."""


class IntegrationError(NumericalError):
    """The step controller could not reach the requested tolerance."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not converge."""


class ConditioningError(NumericalError):
    """Propagated vectors became numerically dependent between re-orthonormalizations."""


class ConsistencyError(NumericalError):
    """Two independent evaluations of the same quantity disagree."""


class WrongMethodError(QMEError, ValueError):
    """The requested spectrum method does not apply to this generator."""


class PeriodicityError(WrongMethodError):
    """Couplings are not periodic with the requested period."""
