"""Exception hierarchy shared by the library and the command-line front end."""


class MCScoreError(Exception):
    """Base class for every error raised by :mod:`mcscore`."""


class UsageError(MCScoreError, ValueError):
    """Invalid arguments: wrong dimension, non-positive sizes, bad times."""


class EstimationError(MCScoreError, ArithmeticError):
    """A Monte Carlo score estimate could not be formed.

    Attributes:
        index: Position of the offending draw, when known.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class IntegrationError(MCScoreError, ArithmeticError):
    """The reverse-time integrator produced or received a non-finite state."""


class DomainTooSmallError(MCScoreError, ValueError):
    """A quadrature grid truncates a non-negligible part of the integrand."""
