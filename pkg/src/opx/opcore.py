"""Moments, Hankel determinants, recurrence coefficients, polynomial
evaluation, and Christoffel-Darboux kernels for a single measure.

Conventions
-----------
Monic polynomials satisfy P_{n+1}(x) = (x - b_n) P_n(x) - a_n^2 P_{n-1}(x)
with P_0 = 1, P_{-1} = 0; orthonormal ones p_n = gamma_n P_n satisfy
x p_n = a_{n+1} p_{n+1} + b_n p_n + a_n p_{n-1} with p_0 = 1/sqrt(m_0).
The Hankel determinant D_n = det(m_{i+j-2})_{i,j=1..n} ties the two:
a_n^2 = D_{n+1} D_{n-1} / D_n^2 and 1/gamma_n^2 = D_{n+1}/D_n.
"""

import dataclasses
import math

import mpmath
import numpy as np
from mpmath import mpf

from . import linalg, weights
from .errors import (NumericalError, SingularHankelError, ValidationError)
from .precision import DEFAULT_PRECISION_BITS, workprec

compute_moments = weights.compute_moments   # re-export: part of this module's surface
Weight = weights.Weight
MomentSequence = weights.MomentSequence


# --------------------------------------------------------------------------
# Hankel determinants
# --------------------------------------------------------------------------

def hankel_det(moments, n):
    """D_n = det(m_{i+j-2})_{i,j=1..n}; D_0 = 1 by convention."""
    if n == 0:
        return mpf(1)
    if len(moments) < 2 * n - 1:
        raise ValidationError(
            f"hankel_det(n={n}) needs moments through m_{2 * n - 2}")
    with workprec(moments.precision_bits):
        rows = [[moments[i + j] for j in range(n)] for i in range(n)]
        return linalg.det(rows)


def shifted_hankel_det(moments, n):
    """D_n with its last column replaced by the next-order moments
    (m_n, ..., m_{2n-1}); this is the numerator of the subleading
    coefficient of the monic polynomial, delta_n = -D_n^*/D_n."""
    if n == 0:
        return mpf(0)
    if len(moments) < 2 * n:
        raise ValidationError(
            f"shifted_hankel_det(n={n}) needs moments through m_{2 * n - 1}")
    with workprec(moments.precision_bits):
        rows = [[moments[i + j] for j in range(n - 1)] + [moments[i + n]]
                for i in range(n)]
        return linalg.det(rows)


# --------------------------------------------------------------------------
# Recurrence coefficients
# --------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class RecurrenceCoefficients:
    """Three-term recurrence data: a_sq[k] = a_{k+1}^2, b[k] = b_k, and the
    total mass m0. Immutable; the central exchange format of the package."""

    a_sq: tuple
    b: tuple
    m0: object

    def __post_init__(self):
        for k, a2 in enumerate(self.a_sq):
            if not a2 > 0:
                raise ValidationError(f"a_{k + 1}^2 must be positive, got {a2}")

    def a2(self, n):
        """a_n^2 for n >= 1."""
        return self.a_sq[n - 1]

    def a(self, n):
        return mpmath.sqrt(mpf(self.a_sq[n - 1]))

    def bval(self, n):
        return self.b[n]

    def gamma_sq(self, n):
        """gamma_n^2 = 1/(m0 * prod_{k<=n} a_k^2)."""
        g = 1 / mpf(self.m0)
        for k in range(n):
            g /= mpf(self.a_sq[k])
        return g

    def hankel(self, n):
        """D_n recovered from the recurrence: D_{k+1}/D_k = 1/gamma_k^2."""
        d = mpf(1)
        for k in range(n):
            d /= self.gamma_sq(k)
        return d

    def max_degree(self):
        """Largest n for which P_n is evaluable from the stored data."""
        return min(len(self.a_sq) + 1, len(self.b))

    @staticmethod
    def hermite(N, s=1):
        """Closed form for e^(-s x^2): a_n^2 = n/(2s), b_n = 0."""
        with workprec(DEFAULT_PRECISION_BITS):
            s = mpf(s)
            return RecurrenceCoefficients(
                tuple(mpf(n) / (2 * s) for n in range(1, N + 1)),
                tuple(mpf(0) for _ in range(N + 1)),
                mpmath.sqrt(mpmath.pi / s))

    @staticmethod
    def laguerre(N, alpha=0, c=1):
        """Closed form for x^alpha e^(-c x): a_n^2 = n(n+alpha)/c^2,
        b_n = (2n+1+alpha)/c."""
        with workprec(DEFAULT_PRECISION_BITS):
            alpha, c = mpf(alpha), mpf(c)
            return RecurrenceCoefficients(
                tuple(n * (n + alpha) / c ** 2 for n in range(1, N + 1)),
                tuple((2 * n + 1 + alpha) / c for n in range(N + 1)),
                mpmath.gamma(alpha + 1) / c ** (alpha + 1))


def recurrence_from_moments(moments, N):
    """Recurrence coefficients a_1^2..a_N^2 and b_0..b_{N-1} from moments.

    Uses the determinant route a_n^2 = D_{n+1} D_{n-1} / D_n^2 and
    b_n = delta_n - delta_{n+1} with delta_n = -D_n^*/D_n, all at the
    precision the moments carry. A vanishing (or precision-exhausted)
    Hankel determinant raises SingularHankelError with the failing index.
    """
    if len(moments) < 2 * N + 1:
        raise ValidationError(f"need moments through m_{2 * N}")
    bits = moments.precision_bits
    with workprec(bits):
        D = [hankel_det(moments, n) for n in range(N + 2)]
        # trust check: recompute at reduced precision; moment Hankel
        # matrices are totally positive, so elimination growth is benign
        # and disagreement between the two contexts flags real degeneracy
        for n in range(1, N + 2):
            if D[n] == 0:
                raise SingularHankelError(
                    "vanishing Hankel determinant (finite support)", index=n)
            rows = [[moments[i + j] for j in range(n)] for i in range(n)]
            with workprec(max(bits - 64, bits // 2, 64)):
                d_lo = linalg.det(rows)
            if d_lo == 0 or abs(D[n] - d_lo) > mpf(2) ** -24 * abs(D[n]):
                raise SingularHankelError(
                    "Hankel determinant not trustworthy at the working "
                    "precision", index=n)
        a_sq = tuple(D[n + 1] * D[n - 1] / D[n] ** 2 for n in range(1, N + 1))
        delta = [mpf(0)] + [-shifted_hankel_det(moments, n) / D[n]
                            for n in range(1, N + 1)]
        b = tuple(delta[n] - delta[n + 1] for n in range(N))
        return RecurrenceCoefficients(a_sq, b, +moments[0])


def recurrence_for(weight, N, precision_bits=DEFAULT_PRECISION_BITS):
    """Recurrence coefficients for a weight: closed form when the family has
    one, else the moment-determinant route."""
    if weight.family == "hermite":
        return RecurrenceCoefficients.hermite(N, weight.params["s"])
    if weight.family == "laguerre":
        return RecurrenceCoefficients.laguerre(N, weight.params["alpha"],
                                               weight.params["c"])
    mom = compute_moments(weight, 2 * N + 2, precision_bits)
    return recurrence_from_moments(mom, N)


# --------------------------------------------------------------------------
# Polynomial evaluation
# --------------------------------------------------------------------------

def eval_poly(rec, n, x, normalization="monic"):
    """Values P_0(x)..P_n(x) (monic) or p_0(x)..p_n(x) (orthonormal) by the
    forward recurrence."""
    vals, _ = _eval_with_derivatives(rec, n, x, normalization, derivs=False)
    return vals


def eval_poly_with_derivative(rec, n, x, normalization="monic"):
    """Same as eval_poly but also returns the derivatives, from the
    differentiated recurrence."""
    return _eval_with_derivatives(rec, n, x, normalization, derivs=True)


def _eval_with_derivatives(rec, n, x, normalization, derivs):
    if n < 0:
        raise ValidationError("degree must be >= 0")
    if normalization not in ("monic", "orthonormal"):
        raise ValidationError("normalization must be 'monic' or 'orthonormal'")
    if n > 0 and (len(rec.b) < n or len(rec.a_sq) < n - 1):
        raise ValidationError(f"recurrence data too short for degree {n}")
    x = mpf(x)
    if normalization == "monic":
        p = [mpf(1)]
        dp = [mpf(0)]
        if n >= 1:
            p.append(x - rec.b[0])
            dp.append(mpf(1))
        for k in range(1, n):
            p.append((x - rec.b[k]) * p[k] - mpf(rec.a_sq[k - 1]) * p[k - 1])
            if derivs:
                dp.append(p[k] + (x - rec.b[k]) * dp[k]
                          - mpf(rec.a_sq[k - 1]) * dp[k - 1])
        return p, (dp if derivs else None)
    p = [1 / mpmath.sqrt(mpf(rec.m0))]
    dp = [mpf(0)]
    if n >= 1:
        a1 = rec.a(1)
        p.append((x - rec.b[0]) * p[0] / a1)
        dp.append(p[0] / a1)
    for k in range(1, n):
        ak, ak1 = rec.a(k), rec.a(k + 1)
        p.append(((x - rec.b[k]) * p[k] - ak * p[k - 1]) / ak1)
        if derivs:
            dp.append((p[k] + (x - rec.b[k]) * dp[k] - ak * dp[k - 1]) / ak1)
    return p, (dp if derivs else None)


def orthonormal_values_np(rec, n, x):
    """Vectorized binary64 evaluation of p_0..p_n on an array of points.
    Returns an array of shape (n+1, len(x))."""
    x = np.asarray(x, dtype=float)
    a = np.sqrt(np.array([float(v) for v in rec.a_sq[:max(n, 1)]]))
    b = np.array([float(v) for v in rec.b[:max(n + 1, 1)]])
    out = np.empty((n + 1, x.size))
    out[0] = 1.0 / math.sqrt(float(rec.m0))
    if n >= 1:
        out[1] = (x - b[0]) * out[0] / a[0]
    for k in range(1, n):
        out[k + 1] = ((x - b[k]) * out[k] - a[k - 1] * out[k - 1]) / a[k]
    return out


def monic_coefficients(rec, n):
    """Ascending coefficient lists of P_0..P_n built from the recurrence."""
    polys = [[mpf(1)]]
    if n >= 1:
        polys.append([-mpf(rec.b[0]), mpf(1)])
    for k in range(1, n):
        pk, pk1 = polys[k], polys[k - 1]
        new = [mpf(0)] * (k + 2)
        for i, c in enumerate(pk):          # x * P_k
            new[i + 1] += c
        for i, c in enumerate(pk):          # -b_k P_k
            new[i] -= mpf(rec.b[k]) * c
        for i, c in enumerate(pk1):         # -a_k^2 P_{k-1}
            new[i] -= mpf(rec.a_sq[k - 1]) * c
        polys.append(new)
    return polys


def poly_eval_coeffs(coeffs, x):
    """Horner evaluation of an ascending coefficient list."""
    acc = mpf(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


# --------------------------------------------------------------------------
# Christoffel-Darboux kernel
# --------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class KernelOperator:
    """Finite-n Christoffel-Darboux kernel K_n with its weight.

    mode 'plain' is sum_{k<n} p_k(x) p_k(y); mode 'weighted' multiplies by
    sqrt(w(x) w(y)), which is the kernel whose determinants are correlation
    densities with respect to Lebesgue measure.
    """

    n: int
    recurrence: RecurrenceCoefficients
    weight: Weight
    mode: str = "plain"

    def __post_init__(self):
        if self.mode not in ("plain", "weighted"):
            raise ValidationError("mode must be 'plain' or 'weighted'")
        if self.n < 1:
            raise ValidationError("kernel degree must be >= 1")
        if len(self.recurrence.a_sq) < self.n:
            raise ValidationError("recurrence data too short for the kernel")


def kernel_for(weight, n, mode="plain", precision_bits=DEFAULT_PRECISION_BITS):
    return KernelOperator(n, recurrence_for(weight, n + 1, precision_bits),
                          weight, mode)


CONFLUENT_SWITCH = 1e-6


def cd_kernel(kernel, x, y):
    """K_n(x, y) by the two-term Christoffel-Darboux formula.

    The divided-difference form is used when |x-y| > 1e-6 (1+|x|); below the
    switch the confluent form (with derivatives from the differentiated
    recurrence, evaluated at the midpoint) avoids the cancellation.
    """
    rec, n = kernel.recurrence, kernel.n
    x, y = mpf(x), mpf(y)
    if kernel.mode == "weighted":
        if not (kernel.weight.contains(x) and kernel.weight.contains(y)):
            raise ValidationError("point outside the weight domain "
                                  "in weighted mode")
    an = rec.a(n)
    if abs(x - y) > CONFLUENT_SWITCH * (1 + abs(x)):
        px = eval_poly(rec, n, x, "orthonormal")
        py = eval_poly(rec, n, y, "orthonormal")
        val = an * (px[n] * py[n - 1] - px[n - 1] * py[n]) / (x - y)
    else:
        m = (x + y) / 2
        p, dp = eval_poly_with_derivative(rec, n, m, "orthonormal")
        val = an * (dp[n] * p[n - 1] - dp[n - 1] * p[n])
    if kernel.mode == "weighted":
        val *= mpmath.sqrt(kernel.weight.density(x) * kernel.weight.density(y))
    return val


def cd_kernel_matrix_np(kernel, x):
    """Binary64 matrix K(x_i, x_j) over a point array (weighted per mode),
    from the explicit sum; used on quadrature-grid paths."""
    x = np.asarray(x, dtype=float)
    P = orthonormal_values_np(kernel.recurrence, kernel.n - 1, x)
    K = P.T @ P
    if kernel.mode == "weighted":
        s = np.sqrt(kernel.weight.density_np(x))
        K = K * np.outer(s, s)
    return K


# --------------------------------------------------------------------------
# Zeros and Gauss rules
# --------------------------------------------------------------------------

def polynomial_zeros(rec, n, precision_bits=DEFAULT_PRECISION_BITS):
    """All n zeros of P_n, by sign-change bisection on a bracketing grid
    plus a Newton polish. Raises NumericalError if fewer than n sign changes
    are found (zeros of orthogonal polynomials are real and simple, so this
    indicates broken input)."""
    if n < 1:
        return []
    with workprec(precision_bits):
        amax = max(mpmath.sqrt(mpf(v)) for v in rec.a_sq[:max(n - 1, 1)]) \
            if n > 1 else mpf(1)
        bvals = [mpf(v) for v in rec.b[:n]]
        lo = min(bvals) - 2 * amax - 1
        hi = max(bvals) + 2 * amax + 1

        def pn(x):
            return eval_poly(rec, n, x, "monic")[n]

        grid_size = 16 * n
        for _ in range(6):
            xs = [lo + (hi - lo) * mpf(i) / grid_size for i in range(grid_size + 1)]
            vals = [pn(x) for x in xs]
            exact = [xs[i] for i in range(grid_size + 1) if vals[i] == 0]
            brackets = [(xs[i], xs[i + 1]) for i in range(grid_size)
                        if vals[i] * vals[i + 1] < 0]
            if len(brackets) + len(exact) >= n:
                break
            grid_size *= 2
        if len(brackets) + len(exact) < n:
            raise NumericalError(
                f"only {len(brackets) + len(exact)} sign changes found "
                f"for {n} expected zeros")
        zeros = list(exact)
        for a, b in brackets[:n - len(exact)]:
            fa = pn(a)
            for _ in range(60):
                m = (a + b) / 2
                fm = pn(m)
                if fm == 0:
                    a = b = m
                    break
                if (fa < 0) != (fm < 0):
                    b = m
                else:
                    a, fa = m, fm
            z = (a + b) / 2
            for _ in range(8):
                p, dp = eval_poly_with_derivative(rec, n, z, "monic")
                if dp[n] == 0:
                    break
                z = z - p[n] / dp[n]
            zeros.append(z)
        return sorted(zeros)


def gauss_rule(rec, m, precision_bits=DEFAULT_PRECISION_BITS):
    """m-point Gauss rule for the measure behind ``rec``: nodes are the zeros
    of P_m, weights are the Christoffel numbers 1/K_m(x_i, x_i)."""
    nodes = polynomial_zeros(rec, m, precision_bits)
    with workprec(precision_bits):
        wts = []
        for x in nodes:
            p = eval_poly(rec, m - 1, x, "orthonormal")
            wts.append(1 / mpmath.fsum(v ** 2 for v in p))
    return nodes, wts


# --------------------------------------------------------------------------
# Heine Monte Carlo
# --------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class MonteCarloEstimate:
    value: float
    stderr: float
    samples: int

    def within(self, exact, k=4.0):
        return abs(self.value - float(exact)) <= k * self.stderr


def heine_monte_carlo(weight, n, samples, mode="det", seed=0, x=None, shards=1):
    """Monte-Carlo evaluation of the n-fold Heine integrals.

    mode 'det' estimates D_n = m_0^n/n! E[Delta_n^2] with the points drawn
    i.i.d. from the normalized weight; mode 'poly' estimates the monic P_n(x)
    as m_0^n/(n! D_n) E[prod_i (x - x_i) Delta_n^2]. Deterministic under a
    fixed (seed, shards): shard s uses the counter-based Philox stream keyed
    by (seed, s), and the shard merge is exact, so a sharded run reproduces
    the single-worker result for the same total stream.
    """
    if samples < 1000:
        raise ValidationError("need samples >= 1000")
    if mode not in ("det", "poly"):
        raise ValidationError("mode must be 'det' or 'poly'")
    if mode == "poly" and x is None:
        raise ValidationError("poly mode needs the evaluation point x")
    if not weight.normalizable():
        raise ValidationError("weight is not normalizable")

    m0 = float(compute_moments(weight, 1, 64)[0])
    per = [samples // shards + (1 if s < samples % shards else 0)
           for s in range(shards)]
    count, mean, m2 = 0, 0.0, 0.0
    for s in range(shards):
        if per[s] == 0:
            continue
        rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(entropy=int(seed), spawn_key=(s,))))
        pts = weight.sample(rng, (per[s], n))
        vals = _vandermonde_sq(pts)
        if mode == "poly":
            vals = vals * np.prod(float(x) - pts, axis=1)
        count, mean, m2 = _merge_moments(count, mean, m2,
                                         len(vals), float(np.mean(vals)),
                                         float(np.sum((vals - np.mean(vals)) ** 2)))
    scale = m0 ** n / math.factorial(n)
    if mode == "poly":
        mom = compute_moments(weight, 2 * n + 1)
        scale /= float(hankel_det(mom, n))
    var = m2 / (count - 1) if count > 1 else 0.0
    return MonteCarloEstimate(scale * mean,
                              abs(scale) * math.sqrt(var / count), count)


def _vandermonde_sq(pts):
    """Squared Vandermonde factor prod_{i>j} (x_i - x_j)^2 per sample row."""
    n = pts.shape[1]
    out = np.ones(pts.shape[0])
    for i in range(1, n):
        for j in range(i):
            out *= (pts[:, i] - pts[:, j]) ** 2
    return out


def _merge_moments(n1, mean1, m2_1, n2, mean2, m2_2):
    """Chan et al. pooled mean/M2 merge; exact and order-deterministic."""
    if n1 == 0:
        return n2, mean2, m2_2
    n = n1 + n2
    delta = mean2 - mean1
    mean = mean1 + delta * n2 / n
    m2 = m2_1 + m2_2 + delta * delta * n1 * n2 / n
    return n, mean, m2
