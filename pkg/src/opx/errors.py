"""Exception taxonomy shared by all opx modules.

Two broad classes matter to callers (and to the CLI exit codes):
``ValidationError`` for bad inputs, and ``NumericalError`` for runs that
were set up correctly but failed numerically (non-convergence, degenerate
determinants, precision exhaustion).
"""


class OpxError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(OpxError, ValueError):
    """Invalid parameters or arguments (CLI exit code 2)."""


class NumericalError(OpxError, ArithmeticError):
    """A numerical procedure failed (CLI exit code 3)."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = dict(diagnostics)


class DivergentMomentError(NumericalError):
    """The weight does not possess a finite moment of the requested order."""


class QuadratureError(NumericalError):
    """Quadrature failed to reach the requested accuracy.

    ``diagnostics['achieved_error']`` carries the best error estimate.
    """


class SingularHankelError(NumericalError):
    """A leading Hankel determinant vanished; ``diagnostics['index']`` holds n."""


class NonNormalIndexError(NumericalError):
    """The linear system for a multiple-orthogonality multi-index is singular."""


class ConvergenceError(NumericalError):
    """An iteration failed to converge within its cap."""


class PrecisionExhaustedError(NumericalError):
    """Working precision ran out; ``diagnostics['last_good_index']`` marks
    the last index that still passed its sanity checks."""
