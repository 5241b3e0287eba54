"""Exception and warning types raised by the library."""


class QuadBlockadeError(Exception):
    """Base class for all library errors."""


class ParameterError(QuadBlockadeError, ValueError):
    """Invalid physical parameters (negative rates, unstable coupling, ...)."""


class DimensionError(QuadBlockadeError, ValueError):
    """Invalid Hilbert-space dimension or operator shape."""


class NumericalError(QuadBlockadeError, ArithmeticError):
    """A computed quantity failed a numerical sanity check."""


class NumericRangeError(NumericalError):
    """A quantity left the representable floating-point range."""


class ConvergenceError(QuadBlockadeError):
    """A truncated sum or iterative solve did not converge.

    Attributes
    ----------
    values : tuple
        The last partial results that failed to agree, when available.
    """

    def __init__(self, message, values=()):
        super().__init__(message)
        self.values = tuple(values)


class UndefinedCorrelationError(QuadBlockadeError, ZeroDivisionError):
    """g2(0) requested for a state with no photons."""


class DegenerateSteadyStateError(QuadBlockadeError):
    """The Liouvillian has more than one stationary state."""


class TruncationError(QuadBlockadeError):
    """The Fock truncation is too small for the computed state.

    Attributes
    ----------
    diagnostics : dict
        Boundary populations and other invariant checks that failed.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class StiffnessError(QuadBlockadeError):
    """Explicit time integration could not make progress."""


class LowConfidenceWarning(UserWarning):
    """A value was computed outside the range where accuracy is guaranteed."""
