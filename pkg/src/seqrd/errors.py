"""Exception types shared across the toolkit.

Structural/validation problems and numerical failures are kept apart so the
CLI can map them to distinct exit codes (2 and 3 respectively).
"""


class SeqrdError(Exception):
    """Base class for all toolkit errors."""


class StructuralError(SeqrdError):
    """Malformed input: bad dimensions, ragged arrays, asymmetric matrices."""


class DomainError(SeqrdError):
    """Argument outside the mathematical domain of an operation."""


class InstanceTooLargeError(DomainError):
    """Finite-alphabet instance exceeds the joint-atom budget."""


class NonconvergenceError(SeqrdError):
    """An iterative scheme failed to reach its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class InfeasibleRealizationError(SeqrdError):
    """No channel-splitting weights achieve the distortion identity."""

    def __init__(self, message, candidates=None):
        super().__init__(message)
        self.candidates = candidates if candidates is not None else []


class UnsupportedModeCountError(SeqrdError):
    """More active eigenmodes than the scalar-channel construction supports."""


class DivergenceError(SeqrdError):
    """A simulated filter state blew up."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
