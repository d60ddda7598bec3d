"""Dense linear algebra on mpmath matrices with full pivoting.

Full pivoting matters here: the linear systems coming from near-degenerate
AT systems (close Laguerre parameters, say) can be badly scaled, and the
determinant magnitude relative to the row norms is used as the normality
test for multiple orthogonality.
"""

import mpmath
from mpmath import mpf

from .errors import NumericalError


def _as_rows(matrix):
    return [[mpf(x) for x in row] for row in matrix]


def lu_full_pivot(matrix):
    """LU factorization with full pivoting.

    Returns ``(rows, row_perm, col_perm, sign, singular_at)`` where ``rows``
    holds the in-place factors and ``singular_at`` is the elimination step at
    which no nonzero pivot was found (or None).
    """
    a = _as_rows(matrix)
    n = len(a)
    rp = list(range(n))
    cp = list(range(n))
    sign = 1
    singular_at = None
    for k in range(n):
        piv, pi, pj = mpf(0), k, k
        for i in range(k, n):
            for j in range(k, n):
                v = abs(a[i][j])
                if v > piv:
                    piv, pi, pj = v, i, j
        if piv == 0:
            singular_at = k
            break
        if pi != k:
            a[k], a[pi] = a[pi], a[k]
            rp[k], rp[pi] = rp[pi], rp[k]
            sign = -sign
        if pj != k:
            for row in a:
                row[k], row[pj] = row[pj], row[k]
            cp[k], cp[pj] = cp[pj], cp[k]
            sign = -sign
        akk = a[k][k]
        for i in range(k + 1, n):
            m = a[i][k] / akk
            a[i][k] = m
            for j in range(k + 1, n):
                a[i][j] -= m * a[k][j]
    return a, rp, cp, sign, singular_at


def det(matrix):
    """Determinant via full-pivot LU; exact zero for structurally singular input."""
    n = len(matrix)
    if n == 0:
        return mpf(1)
    a, _, _, sign, singular_at = lu_full_pivot(matrix)
    if singular_at is not None:
        return mpf(0)
    d = mpf(sign)
    for k in range(n):
        d *= a[k][k]
    return d


def solve(matrix, rhs):
    """Solve ``matrix @ x = rhs`` with full pivoting.

    Raises NumericalError when a zero pivot is met.
    """
    n = len(matrix)
    a, rp, cp, _, singular_at = lu_full_pivot(matrix)
    if singular_at is not None:
        raise NumericalError("singular linear system", step=singular_at)
    b = [mpf(rhs[rp[i]]) for i in range(n)]
    for i in range(n):
        for j in range(i):
            b[i] -= a[i][j] * b[j]
    for i in range(n - 1, -1, -1):
        for j in range(i + 1, n):
            b[i] -= a[i][j] * b[j]
        b[i] /= a[i][i]
    x = [mpf(0)] * n
    for k in range(n):
        x[cp[k]] = b[k]
    return x


def row_norm_product(matrix):
    prod = mpf(1)
    for row in matrix:
        prod *= mpmath.sqrt(mpmath.fsum(mpf(x) ** 2 for x in row))
    return prod


def lstsq(matrix, rhs):
    """Least squares via normal equations (adequate at 256-bit precision)."""
    m, n = len(matrix), len(matrix[0])
    ata = [[mpmath.fsum(mpf(matrix[k][i]) * mpf(matrix[k][j]) for k in range(m))
            for j in range(n)] for i in range(n)]
    atb = [mpmath.fsum(mpf(matrix[k][i]) * mpf(rhs[k]) for k in range(m))
           for i in range(n)]
    return solve(ata, atb)
