"""Determinantal point-process machinery on Christoffel-Darboux kernels:
correlation functions, joint densities, expected counts, gap probabilities
as Fredholm determinants, and non-intersecting Brownian-motion kernels.

All densities here are with respect to Lebesgue measure, i.e. they use the
weighted kernel K(x,y) sqrt(w(x) w(y)).
"""

import dataclasses
import math

import mpmath
import numpy as np
from mpmath import mpf

from . import linalg, mop, opcore, quadrature
from .errors import ConvergenceError, NumericalError, ValidationError
from .precision import workprec


@dataclasses.dataclass(frozen=True)
class CorrelationResult:
    k: int
    points: tuple
    value: object


@dataclasses.dataclass(frozen=True)
class GapQuery:
    interval: tuple
    quad_order: int
    result: float
    order_sequence: tuple
    values: tuple
    converged: bool


@dataclasses.dataclass(frozen=True)
class NibmKernelSpec:
    """n non-intersecting Brownian bridges observed at time t in (0,1).

    endpoints 'single' sends every start and end point to 0; 'double' sends
    the two halves of the end points to -b and +b (n must be even).
    """

    n: int
    t: float
    endpoints: str = "single"
    b: float = 1.0

    def __post_init__(self):
        if not (0 < self.t < 1):
            raise ValidationError("time t must lie in (0, 1)")
        if self.endpoints not in ("single", "double"):
            raise ValidationError("endpoints must be 'single' or 'double'")
        if self.endpoints == "double" and self.n % 2 != 0:
            raise ValidationError("double endpoints need an even path count")


def _weighted_kernel_value(kernel, x, y):
    if kernel.mode == "weighted":
        return opcore.cd_kernel(kernel, x, y)
    return opcore.cd_kernel(
        opcore.KernelOperator(kernel.n, kernel.recurrence, kernel.weight,
                              "weighted"), x, y)


def correlation_k(kernel, points):
    """k-point correlation rho_k(x_1..x_k) = det(K(x_i, x_j)), weighted mode.

    The empty determinant is 1; repeated points give 0 exactly.
    """
    k = len(points)
    if k > kernel.n:
        raise ValidationError(f"correlation order {k} exceeds kernel degree "
                              f"{kernel.n}")
    if k == 0:
        return CorrelationResult(0, (), mpf(1))
    pts = [mpf(p) for p in points]
    rows = [[_weighted_kernel_value(kernel, xi, xj) for xj in pts] for xi in pts]
    return CorrelationResult(k, tuple(pts), linalg.det(rows))


def joint_density(kernel, points):
    """Joint eigenvalue density (1/n!) det(K(x_i,x_j)) at n = kernel.n points.

    Both computational routes run every time: the determinant of the weighted
    kernel, and the Vandermonde route Delta_n^2/(n! D_n) prod w(x_i). They
    must agree to 1e-10 relative; the determinant value is returned.
    """
    n = kernel.n
    if len(points) != n:
        raise ValidationError(f"joint_density needs exactly {n} points")
    pts = [mpf(p) for p in points]
    det_val = correlation_k(kernel, pts).value / mpmath.factorial(n)

    delta = mpf(1)
    for i in range(1, n):
        for j in range(i):
            delta *= (pts[i] - pts[j])
    dn = kernel.recurrence.hankel(n)
    vdm_val = delta ** 2 / (mpmath.factorial(n) * dn)
    for p in pts:
        vdm_val *= kernel.weight.density(p)

    if abs(det_val - vdm_val) > mpf("1e-10") * (1 + abs(det_val)):
        raise NumericalError("kernel-determinant and Vandermonde routes "
                             "disagree", det_route=float(det_val),
                             vandermonde_route=float(vdm_val))
    return det_val


def expected_count(kernel, interval, precision_bits=128):
    """E N([a,b]) = integral of K_n(x,x) w(x) over [a,b], to 1e-10.

    Infinite endpoints are handled by the tanh-type substitution inside the
    adaptive rule, which truncates the tails where the integrand underflows.
    """
    a, b = interval
    rec, n = kernel.recurrence, kernel.n
    w = kernel.weight

    def integrand(x):
        p = opcore.eval_poly(rec, n - 1, x, "orthonormal")
        return mpmath.fsum(v ** 2 for v in p) * w.density(x)

    lo = mpmath.ninf if (isinstance(a, float) and math.isinf(a)) else a
    hi = mpmath.inf if (isinstance(b, float) and math.isinf(b)) else b
    val, _ = quadrature.integrate(integrand, lo, hi,
                                  precision_bits=precision_bits,
                                  rel_tol=mpf("1e-12"))
    return val


def gap_probability(kernel, interval, quad_order, tol=1e-8, max_doublings=4):
    """Probability of no points in [a,b], as the Fredholm determinant
    det(I - K_[a,b]) discretized on Gauss-Legendre nodes.

    The m x m Nystrom matrix is sqrt(w_i w_j) K(x_i,x_j) sqrt(om_i om_j);
    the order is doubled until the determinant moves by less than ``tol``.
    """
    a, b = float(interval[0]), float(interval[1])
    if math.isinf(a) or math.isinf(b):
        raise ValidationError("gap_probability needs a finite interval")
    if quad_order < 10:
        raise ValidationError("quad_order must be >= 10")
    if a == b:
        return GapQuery((a, b), quad_order, 1.0, (quad_order,), (1.0,), True)
    if a > b:
        raise ValidationError("interval must satisfy a <= b")

    orders, values = [], []
    prev = None
    order = int(quad_order)
    for _ in range(max_doublings + 1):
        x, om = quadrature.gauss_legendre_mapped(order, a, b)
        P = opcore.orthonormal_values_np(kernel.recurrence, kernel.n - 1, x)
        K = P.T @ P
        s = np.sqrt(kernel.weight.density_np(x) * om)
        M = K * np.outer(s, s)
        val = float(np.linalg.det(np.eye(order) - M))
        orders.append(order)
        values.append(val)
        if prev is not None and abs(val - prev) < tol:
            return GapQuery((a, b), quad_order, val, tuple(orders),
                            tuple(values), True)
        prev = val
        order *= 2
    raise ConvergenceError("Fredholm determinant did not settle under "
                           "order doubling", orders=orders, values=values)


# --------------------------------------------------------------------------
# Non-intersecting Brownian motions
# --------------------------------------------------------------------------

_DOUBLE_NORM_CACHE = {}


def nibm_kernel(spec, x, y):
    """Kernel of the positions at time t of n non-intersecting Brownian
    bridges.

    single : exp(-x^2/4t - y^2/4(1-t)) * sum_{k<n} h_k(x/sqrt(2t))
             h_k(y/sqrt(2(1-t))) with orthonormalized Hermite values h_k.
    double : the same sum built from type II / type I multiple-Hermite pairs
             for the weights e^(-x^2 -+ 2 b x), normalized so the expected
             count over R equals n.
    """
    x, y = mpf(x), mpf(y)
    t = mpf(spec.t)
    u = x / mpmath.sqrt(2 * t)
    v = y / mpmath.sqrt(2 * (1 - t))
    pref = mpmath.exp(-x ** 2 / (4 * t) - y ** 2 / (4 * (1 - t)))
    if spec.endpoints == "single":
        rec = opcore.RecurrenceCoefficients.hermite(spec.n)
        hu = opcore.eval_poly(rec, spec.n - 1, u, "orthonormal")
        hv = opcore.eval_poly(rec, spec.n - 1, v, "orthonormal")
        return pref * mpmath.fsum(a * b for a, b in zip(hu, hv))
    return _double_norm(spec) * pref * _double_sum(spec, u, v)


def _double_pair_data(spec):
    c = (-2 * float(spec.b), 2 * float(spec.b))
    system = mop.MOPSystem.multiple_hermite(c)
    half = spec.n // 2
    path = mop.stepline_path((half, half))
    return system, c, path


def _double_sum(spec, u, v):
    system, c, path = _double_pair_data(spec)
    total = mpf(0)
    for k in range(len(path) - 1):
        P = mop.solve_type_ii(system, path[k])
        Q = mop.solve_type_i(system, path[k + 1])
        qv = mpmath.fsum(
            opcore.poly_eval_coeffs(Q.coefficient_lists[j], v)
            * mpmath.exp(mpf(c[j]) * v) for j in range(len(c)))
        total += opcore.poly_eval_coeffs(P.coefficients, u) * qv
    return total


def _double_norm(spec):
    key = (spec.n, float(spec.t), float(spec.b))
    if key not in _DOUBLE_NORM_CACHE:
        t = mpf(spec.t)

        def diag(s):
            uu = s / mpmath.sqrt(2 * t)
            vv = s / mpmath.sqrt(2 * (1 - t))
            pref = mpmath.exp(-s ** 2 / (4 * t) - s ** 2 / (4 * (1 - t)))
            return pref * _double_sum(spec, uu, vv)

        with workprec(96):
            total, _ = quadrature.integrate(diag, mpmath.ninf, mpmath.inf,
                                            precision_bits=96,
                                            rel_tol=mpf("1e-12"))
        _DOUBLE_NORM_CACHE[key] = spec.n / total
    return _DOUBLE_NORM_CACHE[key]
