"""Working-precision helpers on top of mpmath.

All determinant-bearing code paths in this package run in software floating
point with a configurable mantissa (default 256 bits); Hankel matrices are
catastrophically ill-conditioned in machine precision beyond n ~ 8, so
binary64 is never used on those paths.
"""

import contextlib

import mpmath
from mpmath import mpf

DEFAULT_PRECISION_BITS = 256


@contextlib.contextmanager
def workprec(bits):
    """Context manager: run the body at ``bits`` bits of mantissa."""
    with mpmath.mp.workprec(int(bits)):
        yield


def decimal_digits(bits):
    """Decimal digits carried by a ``bits``-bit mantissa (plus guard)."""
    return int(int(bits) * 0.30103) + 2


def to_decimal_string(x, bits=DEFAULT_PRECISION_BITS):
    """Render a number as a decimal string preserving full precision."""
    if isinstance(x, (int,)):
        return str(x)
    with workprec(bits):
        return mpmath.nstr(mpf(x), decimal_digits(bits), strip_zeros=True)


def from_decimal_string(s, bits=DEFAULT_PRECISION_BITS):
    with workprec(bits):
        return mpf(s)


def fd_weights(x0, grid, max_order):
    """Finite-difference weights on an arbitrary grid (Fornberg's recursion).

    Returns a list ``w`` with ``w[m][j]`` the weight of ``f(grid[j])`` in the
    approximation of the m-th derivative at ``x0``, for ``0 <= m <= max_order``.
    Exact for polynomials of degree ``len(grid)-1``, so the truncation order
    is ``len(grid) - max_order``.
    """
    n = len(grid)
    if max_order >= n:
        raise ValueError("need more grid points than the highest derivative order")
    x0 = mpf(x0)
    grid = [mpf(g) for g in grid]
    c = [[mpf(0)] * n for _ in range(max_order + 1)]
    c1 = mpf(1)
    c4 = grid[0] - x0
    c[0][0] = mpf(1)
    for i in range(1, n):
        mn = min(i, max_order)
        c2 = mpf(1)
        c5 = c4
        c4 = grid[i] - x0
        for j in range(i):
            c3 = grid[i] - grid[j]
            c2 = c2 * c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2
            for k in range(mn, 0, -1):
                c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3
            c[0][j] = c4 * c[0][j] / c3
        c1 = c2
    return c


def derivative_from_samples(x0, grid, values, order):
    """m-th derivative at ``x0`` from samples ``values`` on ``grid``."""
    w = fd_weights(x0, grid, order)
    return mpmath.fsum(wi * vi for wi, vi in zip(w[order], values))
