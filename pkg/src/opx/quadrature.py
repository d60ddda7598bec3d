"""Adaptive arbitrary-precision quadrature and Gauss-Legendre rules.

``integrate`` wraps mpmath's adaptive quadrature (tanh-sinh on exponentially
mapped panels, with degree doubling) behind an explicit error contract: the
achieved error estimate is always available, and a target that cannot be met
raises ``QuadratureError`` carrying it.
"""

import mpmath
import numpy as np
from mpmath import mp, mpf

from .errors import QuadratureError
from .precision import DEFAULT_PRECISION_BITS, workprec


def integrate(f, a, b, precision_bits=DEFAULT_PRECISION_BITS, rel_tol=None,
              points=None):
    """Integrate ``f`` over ``[a, b]`` (endpoints may be +-inf).

    Parameters
    ----------
    f : callable
        Integrand taking and returning mpmath numbers.
    a, b : numbers or +-mpmath.inf
    precision_bits : int
        Working mantissa. The default target relative error is
        ``2**(-precision_bits/2)``.
    rel_tol : mpf, optional
        Override for the accepted relative error.
    points : sequence, optional
        Interior break points (singularities, kinks).

    Returns
    -------
    (value, err) : the integral and the achieved error estimate.
    """
    with workprec(precision_bits + 20):
        interval = [mpf(a) if mpmath.isfinite(a) else a]
        if points:
            interval.extend(mpf(p) for p in points)
        interval.append(mpf(b) if mpmath.isfinite(b) else b)
        value, err = mp.quad(f, interval, error=True)
        tol = mpf(rel_tol) if rel_tol is not None else mpf(2) ** (-precision_bits // 2)
        scale = 1 + abs(value)
        if err > tol * scale:
            raise QuadratureError(
                "quadrature did not reach the requested accuracy",
                achieved_error=float(err), target=float(tol * scale))
    return value, err


def gauss_legendre(order):
    """Nodes and weights on [-1, 1] (binary64, cached)."""
    return _leggauss_cached(int(order))


_LEGGAUSS_CACHE = {}


def _leggauss_cached(order):
    if order not in _LEGGAUSS_CACHE:
        _LEGGAUSS_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _LEGGAUSS_CACHE[order]


def gauss_legendre_mapped(order, a, b):
    """Gauss-Legendre nodes/weights mapped to the finite interval [a, b]."""
    x, w = gauss_legendre(order)
    half = (b - a) / 2.0
    return a + half * (x + 1.0), w * half
