"""Discrete Painleve systems for semiclassical recurrence coefficients:
the unique positive d-PI solution, OPUC Verblunsky sequences and d-PII,
Toda-type lattice flows, Painleve ODE residuals, singularity confinement,
and Wronskian identities for Toda-deformed moments.

Everything here is verified by two routes wherever the theory provides
them: fixed-point solutions against moment determinants, lattice ODE
integration against direct moment solves, Wronskian determinants against
closed-form moments.
"""

import dataclasses
import math

import mpmath
import numpy as np
from mpmath import mpf

from . import opcore, quadrature
from .errors import (ConvergenceError, NumericalError,
                     PrecisionExhaustedError, ValidationError)
from .precision import (DEFAULT_PRECISION_BITS, fd_weights, workprec)
from .weights import MomentSequence, Weight, compute_moments


# --------------------------------------------------------------------------
# Discrete Painleve I: the unique positive solution
# --------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class DP1Solution:
    """x_n = a_n^2 for the weight e^(-x^4 + t x^2), n = 1..N."""

    t: float
    N: int
    x: tuple
    iterations: int
    residual: float
    sup_change_history: tuple

    def xval(self, n):
        if n == 0:
            return 0.0
        return self.x[n - 1]


def _dp1_tail_seed(n, t):
    # Freud asymptote sqrt(n/12) * (1 + t / (2 sqrt(3 n)))
    return math.sqrt(n / 12.0) * (1.0 + t / (2.0 * math.sqrt(3.0 * n)))


def dp1_positive_solution(t, N, tol=1e-12, max_sweeps=200000, buffer=48,
                          precision_bits=128):
    """The positive solution of 4 x_n (x_{n+1} + x_n + x_{n-1} - t/2) = n.

    Forward iteration of the recurrence is violently unstable, so the
    solution is computed as the fixed point of the under-relaxed sweep
    x_n <- x_n/2 + n / (8 (x_{n-1} + x_n + x_{n+1} - t/2)), with x_0 = 0
    and the tail beyond N + buffer pinned to the Freud asymptote. A fast
    binary64 phase runs until its rounding floor; if the absolute equation
    residual (which grows like n * eps in binary64) is still above ``tol``,
    the same sweep continues in software floats at ``precision_bits``.
    The sup-change history of all sweeps is part of the result.
    """
    if N < 4:
        raise ValidationError("need N >= 4")
    if tol < 1e-14:
        raise ValidationError("tol must be >= 1e-14")
    M = N + int(buffer)
    n_idx = np.arange(0, M + 2, dtype=float)
    x = np.array([_dp1_tail_seed(n, t) if n >= 1 else 0.0 for n in n_idx])
    history = []
    it = 0
    float_target = max(tol / 10, 1e-15 * max(1.0, _dp1_tail_seed(M, t)))
    while it < max_sweeps:
        it += 1
        s = x[0:M] + x[1:M + 1] + x[2:M + 2] - t / 2.0
        if np.any(s <= 0):
            raise ConvergenceError("sweep produced a nonpositive divisor",
                                   sweep=it)
        new_inner = 0.5 * x[1:M + 1] + 0.5 * n_idx[1:M + 1] / (4.0 * s)
        change = float(np.max(np.abs(new_inner - x[1:M + 1])))
        x[1:M + 1] = new_inner
        history.append(change)
        if change < float_target:
            break
        if it > 400 and change >= history[-300] and change < 1e-11:
            break               # binary64 floor reached
    else:
        raise ConvergenceError("d-PI fixed point did not converge",
                               sweeps=it, last_change=history[-1])
    if np.any(x[1:N + 1] <= 0):
        raise ConvergenceError("converged iterate is not positive")

    xs = [mpf(v) for v in x]
    res = _dp1_residual_max(xs, t, N, precision_bits)
    if res > tol:
        xs, extra, res = _dp1_polish(xs, t, N, M, tol, precision_bits,
                                     history)
        it += extra
    if res > tol:
        raise ConvergenceError("d-PI residual above tolerance after "
                               "convergence", residual=res)
    vals = xs[1:N + 1]
    if any(v <= 0 for v in vals):
        raise ConvergenceError("converged iterate is not positive")
    return DP1Solution(float(t), int(N), tuple(float(v) for v in vals),
                       it, res, tuple(history))


def _dp1_polish(xs, t, N, M, tol, bits, history, cap=400):
    with workprec(bits):
        t_m = mpf(t)
        for sweep in range(1, cap + 1):
            new = list(xs)
            change = mpf(0)
            for n in range(1, M + 1):
                s = xs[n - 1] + xs[n] + xs[n + 1] - t_m / 2
                v = xs[n] / 2 + mpf(n) / (8 * s)
                change = max(change, abs(v - xs[n]))
                new[n] = v
            xs = new
            history.append(float(change))
            if sweep % 10 == 0 or change < mpf(tol) / 100:
                res = _dp1_residual_max(xs, t, N, bits)
                if res < tol * 0.9:
                    return xs, sweep, res
        raise ConvergenceError("high-precision polish did not reach the "
                               "residual target", residual=float(
                                   _dp1_residual_max(xs, t, N, bits)))


def _dp1_residual_max(xs, t, N, bits):
    with workprec(bits):
        t_m = mpf(t)
        worst = mpf(0)
        for n in range(1, N + 1):
            r = 4 * xs[n] * (xs[n + 1] + xs[n] + xs[n - 1] - t_m / 2) - n
            worst = max(worst, abs(r))
        return float(worst)


def dp1_forward_map(x_prev, x_cur, n_start, steps, t=0,
                    precision_bits=DEFAULT_PRECISION_BITS):
    """Raw forward iteration x_{n+1} = n/(4 x_n) - x_n - x_{n-1} + t/2
    starting from (x_{n-1}, x_n) at n = n_start. This is the unstable
    direction; it exists for singularity probes and instability demos."""
    with workprec(precision_bits):
        a, b = mpf(x_prev), mpf(x_cur)
        out = []
        for k in range(steps):
            n = n_start + k
            if b == 0:
                raise ZeroDivisionError("iterate hit exactly zero; the map "
                                        "divides by x_n")
            c = mpf(n) / (4 * b) - b - a + mpf(t) / 2
            out.append(c)
            a, b = b, c
        return out


# --------------------------------------------------------------------------
# Freud structure relation
# --------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class StructureRelationReport:
    t: float
    rows: tuple              # (n, A_n, C_n, residual)
    max_residual: float


def structure_relation_check(t, N, precision_bits=DEFAULT_PRECISION_BITS):
    """Fit P_n' = A_n P_{n-1} + C_n P_{n-3} for the weight e^(-x^4 + t x^2)
    by coefficient matching; the residual is the largest coefficient left
    unmatched."""
    rec = opcore.recurrence_for(Weight.freud(t), N + 1, precision_bits)
    polys = opcore.monic_coefficients(rec, N)
    rows = []
    worst = 0.0
    with workprec(precision_bits):
        for n in range(1, N + 1):
            dp = [k * polys[n][k] for k in range(1, n + 1)]   # degree n-1
            A = dp[n - 1]                                      # P_{n-1} monic
            rem = [dp[i] - A * polys[n - 1][i] for i in range(n)]
            C = mpf(0)
            if n >= 3:
                C = rem[n - 3]
                rem = [rem[i] - C * polys[n - 3][i] for i in range(n - 2)]
            else:
                rem = rem[:max(n - 2, 0)]
            resid = float(max((abs(v) for v in rem), default=mpf(0)))
            worst = max(worst, resid)
            rows.append((n, float(A), float(C), resid))
    return StructureRelationReport(float(t), tuple(rows), worst)


# --------------------------------------------------------------------------
# OPUC: Verblunsky coefficients and discrete Painleve II
# --------------------------------------------------------------------------

def bessel_i_series(k, t, precision_bits=DEFAULT_PRECISION_BITS):
    """Modified Bessel I_k(t) by its ascending series (the trigonometric
    moments of the weight e^(t cos theta))."""
    with workprec(precision_bits):
        t = mpf(t)
        k = abs(int(k))
        half = t / 2
        term = half ** k / mpmath.factorial(k)
        total = term
        j = 1
        while True:
            term = term * half ** 2 / (j * (j + k))
            total += term
            if abs(term) < mpmath.eps * abs(total):
                return total
            j += 1


def opuc_bessel_moments(count, t, precision_bits=DEFAULT_PRECISION_BITS):
    vals = [bessel_i_series(k, t, precision_bits) for k in range(count)]
    return MomentSequence(vals, precision_bits, f"opuc_bessel(t={t})")


@dataclasses.dataclass(frozen=True)
class VerblunskySequence:
    """alpha_0..alpha_N for the circle weight e^(t cos theta); the boundary
    convention alpha_{-1} = -1 is stored explicitly."""

    t: float
    alphas: tuple
    source: str
    alpha_minus_1: int = -1

    def alpha(self, n):
        if n == -1:
            return mpf(self.alpha_minus_1)
        return self.alphas[n]

    def __len__(self):
        return len(self.alphas)


def _verblunsky_from_determinants(c, N):
    """alpha_{n-1} = (-1)^(n+1) M_n / T_n with T_n = det(c_{j-i})_{0..n-1}
    and M_n the same minor with columns shifted by one."""
    from . import linalg

    def cm(k):
        return c[abs(k)]

    out = []
    for n in range(1, N + 2):
        T = linalg.det([[cm(j - i) for j in range(n)] for i in range(n)]) \
            if n > 0 else mpf(1)
        M = linalg.det([[cm(j - i) for j in range(1, n + 1)]
                        for i in range(n)])
        if T == 0:
            raise PrecisionExhaustedError("Toeplitz determinant vanished",
                                          last_good_index=n - 2)
        out.append(mpf(-1) ** (n + 1) * M / T)
    return out


def _verblunsky_from_szego(c, N):
    """Szego recurrence Phi_{n+1} = z Phi_n - alpha_n Phi_n^*, with alpha_n
    extracted from the moment inner products at each step."""
    def inner(p, q):
        # <sum p_a z^a, sum q_b z^b> with <z^a, z^b> = c_{a-b}
        return mpmath.fsum(pa * qb * c[abs(a - b)]
                           for a, pa in enumerate(p) if pa != 0
                           for b, qb in enumerate(q) if qb != 0)

    phi = [mpf(1)]
    out = []
    for n in range(N + 1):
        zphi = [mpf(0)] + phi
        star = list(reversed(phi))
        alpha = inner(zphi, star) / inner(star, star)
        out.append(alpha)
        phi = [a - alpha * s for a, s in zip(zphi, star + [mpf(0)])]
        phi[-1] = mpf(1)
    return out


def verblunsky_sequence(t, N, precision_bits=DEFAULT_PRECISION_BITS,
                        source="moment_determinant"):
    """Verblunsky coefficients alpha_0..alpha_N for v(theta) = e^(t cos).

    Both the Toeplitz-determinant route and the Szego-recurrence route are
    computed from the Bessel moment table; they must agree to 1e-10, and
    every alpha_n must satisfy |alpha_n| < 1 (else the working precision is
    declared exhausted at the last index that still did).
    """
    if t == 0:
        raise ValidationError("t must be nonzero")
    if source not in ("moment_determinant", "szego_recurrence"):
        raise ValidationError("unknown source")
    with workprec(precision_bits):
        c = [bessel_i_series(k, t, precision_bits) for k in range(N + 3)]
        det_route = _verblunsky_from_determinants(c, N)
        szego_route = _verblunsky_from_szego(c, N)
        for n, (x, y) in enumerate(zip(det_route, szego_route)):
            if abs(x - y) > mpf("1e-10"):
                raise NumericalError(
                    "determinant and Szego routes disagree",
                    index=n, determinant=float(x), szego=float(y))
            if not abs(x) < 1:
                raise PrecisionExhaustedError(
                    "|alpha_n| >= 1; precision exhausted",
                    last_good_index=n - 1)
        chosen = det_route if source == "moment_determinant" else szego_route
        return VerblunskySequence(float(t), tuple(chosen), source)


def dp2_residual(seq):
    """Max residual of the d-PII relation
    alpha_{n+1} + alpha_{n-1} + (2/t) (n+1) alpha_n / (1 - alpha_n^2) = 0,
    n >= 0, with alpha_{-1} = -1."""
    if len(seq) < 2:
        raise ValidationError("need at least alpha_0, alpha_1")
    with workprec(DEFAULT_PRECISION_BITS):
        t = mpf(seq.t)
        worst = mpf(0)
        for n in range(len(seq) - 1):
            an = seq.alpha(n)
            if not abs(an) < 1:
                raise NumericalError(f"|alpha_{n}| >= 1", index=n)
            r = seq.alpha(n + 1) + seq.alpha(n - 1) \
                + (2 / t) * (n + 1) * an / (1 - an ** 2)
            worst = max(worst, abs(r))
        return worst


# --------------------------------------------------------------------------
# Lattice flows (Toda, Langmuir, Ablowitz-Ladik)
# --------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class SemiclassicalFamily:
    tag: str
    params: dict

    def __post_init__(self):
        checks = {
            "freud": lambda p: True,
            "gaussian": lambda p: True,
            "laguerre": lambda p: p.get("alpha", 0) > -1,
            "gen_charlier": lambda p: p["beta"] > 0 and p["c"] > 0,
            "gen_meixner": lambda p: p["gamma"] > 0 and p["beta"] > 0
                                     and p["a"] > 0,
            "chen_its": lambda p: p["alpha"] > -1 and p["t"] > 0,
            "bce_jacobi": lambda p: p["alpha"] > -1 and p["beta"] > -1,
            "opuc_bessel": lambda p: True,
        }
        if self.tag not in checks:
            raise ValidationError(f"unknown family tag {self.tag!r}")
        if not checks[self.tag](self.params):
            raise ValidationError(f"parameters out of range for {self.tag}")


@dataclasses.dataclass(frozen=True)
class LatticeState:
    """Recurrence-coefficient snapshot along a deformation flow."""

    t: float
    a_sq: tuple
    b: tuple
    family: str

    def toda_c(self, n):
        """Toda auxiliary C_n(t) = -a_n^2(t)."""
        return -self.a_sq[n - 1]


_LATTICES = ("toda", "langmuir", "ablowitz_ladik")


def _flow_weight(family, t):
    tag, p = family.tag, family.params
    if tag == "freud":
        return Weight.freud(t)
    if tag == "gaussian":
        return None     # resolved per lattice below
    if tag == "laguerre":
        if t >= 1:
            raise ValidationError("toda-deformed laguerre needs t < 1")
        return Weight.laguerre(p.get("alpha", 0), c=1 - t)
    raise ValidationError(f"family {tag!r} has no continuous flow weight")


def _flow_coefficients(family, lattice, t, N, precision_bits):
    """Route (i): a_1^2..a_{N+1}^2 and b_0..b_N directly from moments at
    deformation time t."""
    tag = family.tag
    if lattice == "ablowitz_ladik":
        seq = verblunsky_sequence(t, N + 1, precision_bits)
        return seq.alphas, ()
    if tag == "gaussian":
        w = Weight.hermite_shifted(t) if lattice == "toda" \
            else Weight.hermite(s=1 - t)
    else:
        w = _flow_weight(family, t)
    rec = opcore.recurrence_for(w, N + 1, precision_bits)
    return tuple(rec.a_sq), tuple(rec.b)


def _lattice_rhs(lattice, t, a_sq, b, boundary):
    """Right-hand sides of the lattice equations for the truncated state."""
    N = len(a_sq)
    if lattice == "toda":
        b_top = boundary(t)
        da = [a_sq[n] * ((b[n + 1] if n + 1 < len(b) else b_top) - b[n])
              for n in range(N)]
        db = [a_sq[n] - (a_sq[n - 1] if n >= 1 else 0.0)
              for n in range(len(b))]
        return da, db
    if lattice == "langmuir":
        a_top = boundary(t)
        da = []
        for n in range(N):
            up = a_sq[n + 1] if n + 1 < N else a_top
            dn = a_sq[n - 1] if n >= 1 else 0.0
            da.append(a_sq[n] * (up - dn))
        return da, []
    if lattice == "ablowitz_ladik":
        al_top = boundary(t)
        out = []
        for n in range(N):
            up = a_sq[n + 1] if n + 1 < N else al_top
            dn = a_sq[n - 1] if n >= 1 else -1.0
            out.append(0.5 * (1 - a_sq[n] ** 2) * (up - dn))
        return out, []
    raise ValidationError(f"unknown lattice {lattice!r}")


@dataclasses.dataclass(frozen=True)
class LatticeFlowReport:
    family: str
    lattice: str
    grid_t: tuple
    states: tuple
    fd_residual_max: float
    fd_h: float
    route_discrepancy: float
    steps: int


def lattice_flow(family, lattice, t0, t1, N, steps=200, grid_points=9,
                 fd_h=1e-4, precision_bits=DEFAULT_PRECISION_BITS):
    """Flow of recurrence coefficients under the exponential deformation.

    Two independent computations are compared: (i) direct moment solves on a
    t-grid, with central-difference residuals of the lattice equations, and
    (ii) classical RK4 integration of the lattice from the t0 data, with the
    single top-index closure term interpolated from route (i). The report
    carries the max pointwise discrepancy between the routes.
    """
    if lattice not in _LATTICES:
        raise ValidationError(f"lattice must be one of {_LATTICES}")
    compatible = {"toda": ("gaussian", "laguerre"),
                  "langmuir": ("freud", "gaussian"),
                  "ablowitz_ladik": ("opuc_bessel",)}
    if family.tag not in compatible[lattice]:
        raise ValidationError(
            f"family {family.tag!r} is not {lattice}-deformable")
    t0, t1 = float(t0), float(t1)
    if not t1 > t0:
        raise ValidationError("need t1 > t0")

    grid = np.linspace(t0, t1, grid_points)
    direct = [_flow_coefficients(family, lattice, t, N, precision_bits)
              for t in grid]

    # top-index closure for the truncated ODE system, interpolated in t
    if lattice == "toda":
        top_vals = [float(d[1][N]) for d in direct]
    elif lattice == "langmuir":
        top_vals = [float(d[0][N]) for d in direct]
    else:
        top_vals = [float(d[0][N]) for d in direct]
    coeffs = np.polyfit(grid, top_vals, len(grid) - 1)

    def boundary(t):
        return float(np.polyval(coeffs, t))

    # route (ii): RK4 on the truncated system
    if lattice == "toda":
        state = (np.array([float(v) for v in direct[0][0][:N]]),
                 np.array([float(v) for v in direct[0][1][:N]]))
    else:
        state = (np.array([float(v) for v in direct[0][0][:N]]), np.array([]))
    h = (t1 - t0) / steps
    ode_at_grid = {0: state}
    t = t0
    k = 0
    per_grid = steps // (grid_points - 1)
    if per_grid * (grid_points - 1) != steps:
        raise ValidationError("steps must be divisible by grid_points - 1")
    for i in range(steps):
        state = _rk4_step(lattice, t, state, h, boundary)
        t = t0 + (i + 1) * h
        if (i + 1) % per_grid == 0:
            k += 1
            ode_at_grid[k] = state

    # route comparison at the grid times
    disc = 0.0
    states = []
    for i, t in enumerate(grid):
        a_dir = [float(v) for v in direct[i][0][:N]]
        b_dir = [float(v) for v in direct[i][1][:N]] if lattice == "toda" else []
        states.append(LatticeState(float(t), tuple(a_dir), tuple(b_dir),
                                   family.tag))
        if i in ode_at_grid:
            sa, sb = ode_at_grid[i]
            disc = max(disc, float(np.max(np.abs(sa - np.array(a_dir)))))
            if lattice == "toda":
                disc = max(disc, float(np.max(np.abs(sb - np.array(b_dir)))))

    fd_max = _fd_lattice_residual(family, lattice, grid, N, fd_h,
                                  precision_bits)
    return LatticeFlowReport(family.tag, lattice, tuple(float(v) for v in grid),
                             tuple(states), fd_max, fd_h, disc, steps)


def _rk4_step(lattice, t, state, h, boundary):
    a, b = state

    def f(tt, aa, bb):
        da, db = _lattice_rhs(lattice, tt, list(aa), list(bb), boundary)
        return np.array(da), np.array(db)

    k1a, k1b = f(t, a, b)
    k2a, k2b = f(t + h / 2, a + h / 2 * k1a, b + h / 2 * k1b)
    k3a, k3b = f(t + h / 2, a + h / 2 * k2a, b + h / 2 * k2b)
    k4a, k4b = f(t + h, a + h * k3a, b + h * k3b)
    return (a + h / 6 * (k1a + 2 * k2a + 2 * k3a + k4a),
            b + h / 6 * (k1b + 2 * k2b + 2 * k3b + k4b))


def _fd_lattice_residual(family, lattice, grid, N, h, precision_bits):
    """Central-difference derivative residuals of the lattice equations on
    route-(i) coefficients, at three interior grid times."""
    worst = 0.0
    probe_ts = [grid[len(grid) // 4], grid[len(grid) // 2],
                grid[(3 * len(grid)) // 4]]
    for t in probe_ts:
        lo = _flow_coefficients(family, lattice, t - h, N, precision_bits)
        mid = _flow_coefficients(family, lattice, t, N, precision_bits)
        hi = _flow_coefficients(family, lattice, t + h, N, precision_bits)
        if lattice == "toda":
            for n in range(1, N + 1):
                da = (float(hi[0][n - 1]) - float(lo[0][n - 1])) / (2 * h)
                rhs = float(mid[0][n - 1]) * (float(mid[1][n])
                                              - float(mid[1][n - 1]))
                worst = max(worst, abs(da - rhs))
            for n in range(0, N):
                db = (float(hi[1][n]) - float(lo[1][n])) / (2 * h)
                rhs = float(mid[0][n]) - (float(mid[0][n - 1]) if n >= 1
                                          else 0.0)
                worst = max(worst, abs(db - rhs))
        elif lattice == "langmuir":
            for n in range(1, N + 1):
                da = (float(hi[0][n - 1]) - float(lo[0][n - 1])) / (2 * h)
                up = float(mid[0][n]) if n < N + 1 else 0.0
                dn = float(mid[0][n - 2]) if n >= 2 else 0.0
                rhs = float(mid[0][n - 1]) * (up - dn)
                worst = max(worst, abs(da - rhs))
        else:
            for n in range(0, N):
                dal = (float(hi[0][n]) - float(lo[0][n])) / (2 * h)
                up = float(mid[0][n + 1])
                dn = float(mid[0][n - 1]) if n >= 1 else -1.0
                rhs = 0.5 * (1 - float(mid[0][n]) ** 2) * (up - dn)
                worst = max(worst, abs(dal - rhs))
    return worst


# --------------------------------------------------------------------------
# Painleve ODE residuals
# --------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class ODEResidualReport:
    quantity: str
    n: int
    t: float
    h: float
    residual: float
    values: tuple


ODE_QUANTITIES = ("p4_freud", "p5_opuc", "p5_charlier", "p3_chen_its",
                  "p5_bce")


def _stencil_values(quantity, n, ts, precision_bits, params):
    """The transformed variable on the 5-point t-stencil."""
    out = []
    for t in ts:
        if quantity == "p4_freud":
            rec = opcore.recurrence_for(Weight.freud(float(t)), n,
                                        precision_bits)
            out.append(mpf(rec.a_sq[n - 1]))
        elif quantity == "p5_opuc":
            seq = verblunsky_sequence(float(t), n, precision_bits)
            out.append(seq.alpha(n))
        elif quantity == "p5_charlier":
            beta = params["beta"]
            mom = charlier_moments(beta, float(t), 2 * n + 4, precision_bits)
            rec = opcore.recurrence_from_moments(mom, n + 1)
            x = mpf(rec.a_sq[n - 1])
            out.append(1 - mpf(t) / x)
        elif quantity == "p3_chen_its":
            alpha = params["alpha"]
            rec = opcore.recurrence_for(Weight.chen_its(alpha, float(t)),
                                        n + 1, precision_bits)
            out.append(mpf(rec.b[n]) - (2 * n + mpf(alpha) + 1))
        elif quantity == "p5_bce":
            alpha, beta = params["alpha"], params["beta"]
            rec = opcore.recurrence_for(
                Weight.bce_jacobi(alpha, beta, float(t)), n + 1,
                precision_bits)
            R = (2 * n + 1 + mpf(alpha) + mpf(beta) - mpf(t)
                 - mpf(t) * mpf(rec.b[n])) / 2
            out.append(1 + mpf(t) / R)
        else:
            raise ValidationError(f"unknown quantity {quantity!r}")
    return out


def _ode_rhs(quantity, n, t, y, dy, params):
    t = mpf(t)
    if quantity == "p4_freud":
        # eliminating the neighbors from the string and Langmuir relations
        # gives the linear-in-y coefficient n/4 + t^2/8 (checked against
        # high-precision data; n/2 does not close)
        return (dy ** 2 / (2 * y) + 3 * y ** 3 / 2 - t * y ** 2
                + y * (mpf(n) / 4 + t ** 2 / 8) - mpf(n) ** 2 / (32 * y))
    if quantity == "p5_opuc":
        return (-y / (1 - y ** 2) * dy ** 2 - dy / t - y * (1 - y ** 2)
                + mpf(n + 1) ** 2 / t ** 2 * y / (1 - y ** 2))
    if quantity == "p5_charlier":
        # the (y')^2 bracket carries no extra 1/2: this is the PV normal
        # form with delta = 0, gamma = -2 (checked against high-precision
        # recurrence data)
        beta = mpf(params["beta"])
        return ((1 / (2 * y) + 1 / (y - 1)) * dy ** 2 - dy / t
                + (1 - y) ** 2 / t ** 2 * (mpf(n) ** 2 * y / 2
                                           - (beta - 1) ** 2 / (2 * y))
                - 2 * y / t)
    if quantity == "p3_chen_its":
        alpha = mpf(params["alpha"])
        return (dy ** 2 / y - dy / t + (2 * n + alpha + 1) * y ** 2 / t ** 2
                + y ** 3 / t ** 2 + alpha / t - 1 / y)
    if quantity == "p5_bce":
        alpha, beta = mpf(params["alpha"]), mpf(params["beta"])
        s = 2 * n + 1 + alpha + beta
        return ((3 * y - 1) / (2 * y * (y - 1)) * dy ** 2 - dy / t
                + 2 * s * y / t - 2 * y * (y + 1) / (y - 1)
                + (y - 1) ** 2 / t ** 2 * (alpha ** 2 * y / 2
                                           - beta ** 2 / (2 * y)))
    raise ValidationError(f"unknown quantity {quantity!r}")


def painleve_ode_residual(quantity, n, t, h, precision_bits=192, **params):
    """|y'' - RHS| for the registered Painleve reduction, with y evaluated
    on the 5-point stencil t-2h..t+2h and second-order central differences
    (so the residual scales as O(h^2))."""
    if quantity not in ODE_QUANTITIES:
        raise ValidationError(f"quantity must be one of {ODE_QUANTITIES}")
    with workprec(precision_bits):
        t, h = mpf(t), mpf(h)
        ts = [t - 2 * h, t - h, t, t + h, t + 2 * h]
        if quantity != "p4_freud" and any(v == 0 for v in ts):
            raise ValidationError("stencil crosses t = 0")
        ys = _stencil_values(quantity, n, ts, precision_bits, params)
        y = ys[2]
        _guard_poles(quantity, y)
        dy = (ys[3] - ys[1]) / (2 * h)
        d2y = (ys[3] - 2 * ys[2] + ys[1]) / h ** 2
        rhs = _ode_rhs(quantity, n, t, y, dy, params)
        return ODEResidualReport(quantity, n, float(t), float(h),
                                 float(abs(d2y - rhs)),
                                 tuple(float(v) for v in ys))


def _guard_poles(quantity, y):
    near = mpf("1e-9")
    if quantity in ("p4_freud", "p3_chen_its") and abs(y) < near:
        raise NumericalError("stencil crosses a pole of the transformed "
                             "variable", value=float(y))
    if quantity in ("p5_charlier", "p5_bce") and \
            (abs(y) < near or abs(y - 1) < near):
        raise NumericalError("stencil crosses a pole of the transformed "
                             "variable", value=float(y))
    if quantity == "p5_opuc" and (abs(y) >= 1 or abs(1 - y ** 2) < near):
        raise NumericalError("alpha_n outside (-1, 1)", value=float(y))


# --------------------------------------------------------------------------
# Discrete semiclassical families and their nonlinear systems
# --------------------------------------------------------------------------

def charlier_moments(beta, c, count, precision_bits=512):
    """Moments of the measure sum_k delta_k c^k / ((beta)_k k!) by direct
    summation, each series cut when the term falls below 2^-bits of the
    partial sum."""
    if beta <= 0 or c <= 0:
        raise ValidationError("need beta > 0 and c > 0")
    return _discrete_moments(lambda j: mpf(1), beta, c, count, precision_bits,
                             f"gen_charlier(beta={beta},c={c})")


def meixner_moments(gamma, beta, a, count, precision_bits=512):
    if gamma <= 0 or beta <= 0 or a <= 0:
        raise ValidationError("need gamma, beta, a > 0")
    with workprec(precision_bits):
        g = mpf(gamma)
        return _discrete_moments(lambda j: mpmath.rf(g, j), beta, a, count,
                                 precision_bits,
                                 f"gen_meixner(gamma={gamma},beta={beta},a={a})")


def _discrete_moments(extra, beta, c, count, precision_bits, tag):
    with workprec(precision_bits):
        beta, c = mpf(beta), mpf(c)
        cutoff = mpf(2) ** (-precision_bits)
        vals = []
        for k in range(count):
            total = mpf(0) if k > 0 else extra(0)
            base = mpf(1)       # c^j / ((beta)_j j!)
            j = 0
            while True:
                j += 1
                base = base * c / ((beta + j - 1) * j)
                term = extra(j) * base * mpf(j) ** k
                total += term
                if j > k + 4 and abs(term) < cutoff * max(abs(total), mpf(1)):
                    break
                if j > 100000:
                    raise NumericalError("discrete moment series did not "
                                         "converge", order=k)
            vals.append(total)
        return MomentSequence(vals, precision_bits, tag)


@dataclasses.dataclass(frozen=True)
class SemiclassicalReport:
    family: str
    residuals: dict
    max_residual: float


def semiclassical_system_residual(family, N, precision_bits=None):
    """Per-n residuals of the family's discrete (string) equations, with the
    recurrence coefficients computed from moments at working precision."""
    tag, p = family.tag, family.params
    if tag == "gen_charlier":
        bits = precision_bits or 512
        beta, c = mpf(p["beta"]), mpf(p["c"])
        mom = charlier_moments(p["beta"], p["c"], 2 * N + 6, bits)
        rec = opcore.recurrence_from_moments(mom, N + 2)
        with workprec(bits):
            a2 = [mpf(0)] + [mpf(v) for v in rec.a_sq]
            b = [mpf(v) for v in rec.b]
            r1 = {n: float(abs(b[n] + b[n - 1] - n + beta - c * n / a2[n]))
                  for n in range(1, N + 1)}
            r2 = {n: float(abs((a2[n + 1] - c) * (a2[n] - c)
                               - c * (b[n] - n) * (b[n] - n + beta - 1)))
                  for n in range(0, N + 1)}
        worst = max(max(r1.values()), max(r2.values()))
        return SemiclassicalReport(tag, {"string": r1, "product": r2}, worst)
    if tag == "gen_meixner":
        bits = precision_bits or 512
        gamma, beta, a = mpf(p["gamma"]), mpf(p["beta"]), mpf(p["a"])
        mom = meixner_moments(p["gamma"], p["beta"], p["a"], 2 * N + 6, bits)
        rec = opcore.recurrence_from_moments(mom, N + 2)
        with workprec(bits):
            a2 = [mpf(0)] + [mpf(v) for v in rec.a_sq]
            b = [mpf(v) for v in rec.b]
            u = [(n * a - a2[n]) / (gamma - 1) for n in range(N + 2)]
            v = [(n + gamma - beta + a - b[n]) * a / (gamma - 1)
                 for n in range(N + 2)]
            ratio = (gamma - beta) / (gamma - 1)
            e1 = {n: float(abs((u[n] + v[n]) * (u[n + 1] + v[n])
                               - (gamma - 1) / a ** 2 * v[n] * (v[n] - a)
                               * (v[n] - a * ratio)))
                  for n in range(0, N + 1)}
            e2 = {n: float(abs((u[n] + v[n]) * (u[n] + v[n - 1])
                               - u[n] / (u[n] - a * n / (gamma - 1))
                               * (u[n] + a) * (u[n] + a * ratio)))
                  for n in range(1, N + 1)}
        worst = max(max(e1.values()), max(e2.values()))
        return SemiclassicalReport(tag, {"forward": e1, "backward": e2}, worst)
    if tag == "chen_its":
        bits = precision_bits or DEFAULT_PRECISION_BITS
        alpha, t = mpf(p["alpha"]), mpf(p["t"])
        rec = opcore.recurrence_for(Weight.chen_its(p["alpha"], p["t"]),
                                    N + 2, bits)
        with workprec(bits):
            a2 = [mpf(0)] + [mpf(v) for v in rec.a_sq]
            b = [mpf(v) for v in rec.b]
            cvals = [b[n] - (2 * n + alpha + 1) for n in range(N + 2)]
            x = [1 / cv for cv in cvals]
            csum = [mpf(0)]
            for n in range(1, N + 2):
                csum.append(csum[-1] + cvals[n - 1])
            y = [a2[n] - n * (n + alpha) - csum[n] for n in range(N + 2)]
            f1 = {n: float(abs(x[n] + x[n - 1]
                               - (n * t - (2 * n + alpha) * y[n])
                               / (y[n] * (y[n] - t))))
                  for n in range(1, N + 1)}
            f2 = {n: float(abs(y[n] + y[n + 1] - t + (2 * n + alpha + 1) / x[n]
                               + 1 / x[n] ** 2))
                  for n in range(1, N + 1)}
        worst = max(max(f1.values()), max(f2.values()))
        return SemiclassicalReport(tag, {"x": f1, "y": f2}, worst)
    if tag == "bce_jacobi":
        bits = precision_bits or DEFAULT_PRECISION_BITS
        alpha, beta, t = mpf(p["alpha"]), mpf(p["beta"]), mpf(p["t"])
        rec = opcore.recurrence_for(
            Weight.bce_jacobi(p["alpha"], p["beta"], p["t"]), N + 2, bits)
        with workprec(bits):
            a2 = [mpf(0)] + [mpf(v) for v in rec.a_sq]
            b = [mpf(v) for v in rec.b]
            s = lambda n: 2 * n + 1 + alpha + beta
            R = [(s(n) - t - t * b[n]) / 2 for n in range(N + 2)]
            # r_0 = 0; the sweep relation closes with the coefficient
            # (2n+1+alpha+beta-2t) on R_n (verified to working precision
            # against the r_n extracted from the a_n^2 relation)
            r = [mpf(0)]
            for n in range(N + 1):
                r.append((4 * R[n] ** 2 - 2 * R[n] * (s(n) - 2 * t)
                          - 2 * alpha * t) / (2 * t) - r[n])
            g1 = {n: float(abs(n * (n + beta) - (2 * n + alpha + beta) * r[n]
                               - r[n] * (r[n] + alpha)
                               * (t ** 2 / (R[n] * R[n - 1]) + t / R[n]
                                  + t / R[n - 1])))
                  for n in range(1, N + 1)}
            g2 = {n: float(abs(t * (t + R[n]) * a2[n] - n * (n + beta)
                               + (2 * n + alpha + beta) * r[n]
                               + t * r[n] * (r[n] + alpha) / R[n]))
                  for n in range(1, N + 1)}
        worst = max(max(g1.values()), max(g2.values()))
        return SemiclassicalReport(tag, {"string": g1, "a_sq": g2}, worst)
    raise ValidationError(f"no discrete system registered for {tag!r}")


# --------------------------------------------------------------------------
# Singularity confinement probe
# --------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class ProbeResult:
    n: int
    eps: float
    x_ref: float
    iterates: tuple          # x_{n+1}, x_{n+2}, x_{n+3}, x_{n+4}
    recovery_dev: float      # x_{n+3} + (n+3)/n eps        (O(eps^2))
    memory_dev: float        # x_{n+4} - n/(n+3) x_{n-1} - C eps


def singularity_probe(n, eps, x_ref, precision_bits=DEFAULT_PRECISION_BITS):
    """Drive the t=0 d-PI map through a near-singularity x_n = eps and
    measure how the orbit recovers.

    Carrying the expansion through the four singular steps exactly (the
    lattice parameter z_k = k/4 moves between steps, so its increments
    survive in the coefficients) gives

        x_{n+3} = -(n+3)/n eps + O(eps^2),
        x_{n+4} = n/(n+3) x_{n-1} + C eps + O(eps^2),
        C = 2/n + 2(n+1)^2/(n(n+3)) - 4 x_{n-1}^2 (2n+3)/(n+3)^2,

    so the singularity is confined and the pre-singular value is recovered
    up to the deterministic factor z_n/z_{n+3} = n/(n+3). The two returned
    deviations subtract these expansions and must vanish quadratically.
    """
    if not (1e-10 <= eps <= 1e-2):
        raise ValidationError("eps must lie in [1e-10, 1e-2] (and the map "
                              "divides by x_n, so eps = 0 is singular)")
    with workprec(precision_bits):
        xs = dp1_forward_map(x_ref, eps, n, 4, t=0,
                             precision_bits=precision_bits)
        if any(not mpmath.isfinite(v) for v in xs):
            raise NumericalError("overflow before x_{n+4}; eps too small "
                                 "for the working precision")
        eps_m, ref = mpf(eps), mpf(x_ref)
        rec_dev = xs[2] + mpf(n + 3) / n * eps_m
        C = (mpf(2) / n + 2 * mpf(n + 1) ** 2 / (n * mpf(n + 3))
             - 4 * ref ** 2 * (2 * n + 3) / mpf(n + 3) ** 2)
        mem_dev = xs[3] - mpf(n) / (n + 3) * ref - C * eps_m
        return ProbeResult(n, float(eps), float(x_ref),
                           tuple(float(v) for v in xs),
                           float(rec_dev), float(mem_dev))


def probe_slopes(n, x_ref, eps_list, precision_bits=DEFAULT_PRECISION_BITS):
    """Fitted log-log slopes of the two O(eps^2) deviations over eps_list."""
    results = [singularity_probe(n, e, x_ref, precision_bits)
               for e in eps_list]
    lx = np.log([r.eps for r in results])
    s1 = np.polyfit(lx, np.log([abs(r.recovery_dev) for r in results]), 1)[0]
    s2 = np.polyfit(lx, np.log([abs(r.memory_dev) for r in results]), 1)[0]
    return float(s1), float(s2), results


# --------------------------------------------------------------------------
# Wronskian identities for Toda-deformed moments
# --------------------------------------------------------------------------

def freud_mass_closed_form(t, precision_bits=DEFAULT_PRECISION_BITS):
    """m_0(t) = 2^(-1/4) sqrt(pi) e^(t^2/8) D_{-1/2}(-t/sqrt(2)), with the
    parabolic cylinder function from its integral representation
    D_{-1/2}(z) = e^(-z^2/4)/Gamma(1/2) int_0^inf e^(-z u - u^2/2) / sqrt(u) du.
    """
    with workprec(precision_bits):
        t = mpf(t)
        z = -t / mpmath.sqrt(2)
        integral, _ = quadrature.integrate(
            lambda u: mpmath.exp(-z * u - u ** 2 / 2) / mpmath.sqrt(u),
            0, mpmath.inf, precision_bits=precision_bits)
        pcf = mpmath.exp(-z ** 2 / 4) / mpmath.sqrt(mpmath.pi) * integral
        return 2 ** mpf("-0.25") * mpmath.sqrt(mpmath.pi) \
            * mpmath.exp(t ** 2 / 8) * pcf


def freud_mass_quadrature(t, precision_bits=DEFAULT_PRECISION_BITS):
    with workprec(precision_bits):
        t = mpf(t)
        val, _ = quadrature.integrate(
            lambda x: mpmath.exp(-x ** 4 + t * x ** 2),
            mpmath.ninf, mpmath.inf, precision_bits=precision_bits)
        return val


@dataclasses.dataclass(frozen=True)
class WronskianReport:
    base: str
    t: float
    n: int
    a_sq_wronskian: tuple
    b_wronskian: tuple
    a_sq_moment: tuple
    b_moment: tuple
    max_difference: float


def wronskian_identities(base, t, n, precision_bits=DEFAULT_PRECISION_BITS,
                         master_h=None, log_h=None):
    """Recurrence coefficients from the Wronskian of the deformed mass.

    For the Gaussian base the moments of e^(x t) e^(-x^2) are the
    t-derivatives of m_0(t) = sqrt(pi) e^(t^2/4); for the Freud base the
    even moments of e^(-x^4 + t x^2) are the t-derivatives of the
    parabolic-cylinder mass. All derivatives come from finite differences
    of the scalar mass on a wide master grid (Fornberg weights), so this
    route shares nothing with the closed-form moment route it is checked
    against. a_n^2 = D_{n+1} D_{n-1} / D_n^2; for the e^(x t) deformation
    b_n = (log D_{n+1})' - (log D_n)' by a five-point derivative of log D,
    while the symmetric Freud deformation has b_n = 0 through the exactly
    vanishing odd moments.
    """
    if base not in ("gaussian", "freud"):
        raise ValidationError("base must be 'gaussian' or 'freud'")
    if n < 0:
        raise ValidationError("need n >= 0")
    bits = precision_bits
    with workprec(bits):
        t = mpf(t)
        order = 2 * n + (1 if base == "gaussian" else 0)
        P = 2 * order + 9
        hw = mpf(master_h) if master_h else mpf(1) / 16
        grid = [t + hw * (i - (P - 1) // 2) for i in range(P)]
        if base == "gaussian":
            mass = [mpmath.sqrt(mpmath.pi) * mpmath.exp(s ** 2 / 4)
                    for s in grid]
        else:
            mass = [freud_mass_closed_form(s, bits) for s in grid]

        def moments_at(tau, count):
            w = fd_weights(tau, grid, count - 1)
            if base == "gaussian":
                return [mpmath.fsum(wi * mi for wi, mi in zip(w[k], mass))
                        for k in range(count)]
            vals = []
            for k in range(count):
                if k % 2 == 1:
                    vals.append(mpf(0))
                else:
                    vals.append(mpmath.fsum(
                        wi * mi for wi, mi in zip(w[k // 2], mass)))
            return vals

        def hankel_at(tau, m):
            if m == 0:
                return mpf(1)
            mom = moments_at(tau, 2 * m)
            from . import linalg
            return linalg.det([[mom[i + j] for j in range(m)]
                               for i in range(m)])

        D_center = [hankel_at(t, m) for m in range(n + 2)]
        a_sq_w = tuple(D_center[m + 1] * D_center[m - 1] / D_center[m] ** 2
                       for m in range(1, n + 1))

        if base == "gaussian":
            hb = mpf(log_h) if log_h else mpf(1) / 256
            taus = [t - 2 * hb, t - hb, t + hb, t + 2 * hb]
            logd = {m: [mpmath.log(hankel_at(tau, m)) for tau in taus]
                    for m in range(1, n + 2)}

            def dlog(m):
                v = logd[m]
                return (v[0] - 8 * v[1] + 8 * v[2] - v[3]) / (12 * hb)

            b_w = tuple(dlog(m + 1) - dlog(m) if m >= 1
                        else dlog(1) for m in range(n + 1))
            base_weight = Weight.hermite_shifted(float(t))
        else:
            b_w = tuple(mpf(0) for _ in range(n + 1))
            base_weight = Weight.freud(float(t))

        if n >= 1:
            rec = opcore.recurrence_for(base_weight, n + 1, bits)
            a_sq_m = tuple(rec.a_sq[:n])
            b_m = tuple(rec.b[:n + 1])
        else:
            mom = compute_moments(base_weight, 2, bits)
            a_sq_m = ()
            b_m = (mom[1] / mom[0],)
        diff = 0.0
        for x, y in zip(a_sq_w, a_sq_m):
            diff = max(diff, abs(float(x - y)))
        for x, y in zip(b_w, b_m):
            diff = max(diff, abs(float(x - y)))
        return WronskianReport(base, float(t), n,
                               tuple(float(v) for v in a_sq_w),
                               tuple(float(v) for v in b_w),
                               tuple(float(v) for v in a_sq_m),
                               tuple(float(v) for v in b_m), diff)
