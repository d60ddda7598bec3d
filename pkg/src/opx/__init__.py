"""opx: orthogonal polynomials, determinantal point processes, random
matrices, multiple orthogonality, and discrete Painleve systems.

Every quantity the package computes is cross-checkable by at least two
independent computational routes; the test suite exercises all of them.
"""

from .errors import (ConvergenceError, DivergentMomentError, NonNormalIndexError,
                     NumericalError, OpxError, PrecisionExhaustedError,
                     QuadratureError, SingularHankelError, ValidationError)
from .weights import MomentSequence, Weight, compute_moments

__all__ = [
    "Weight", "MomentSequence", "compute_moments",
    "OpxError", "ValidationError", "NumericalError", "DivergentMomentError",
    "QuadratureError", "SingularHankelError", "NonNormalIndexError",
    "ConvergenceError", "PrecisionExhaustedError",
]

__version__ = "0.1.0"
