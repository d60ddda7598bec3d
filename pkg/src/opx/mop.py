"""Multiple orthogonal polynomials: type I/II solves from joint moments,
normality, nearest-neighbor recurrences and their compatibility equations,
the path-independent Christoffel-Darboux kernel, Hermite-Pade residuals,
and the classical closed-form families.

A system holds r measures mu_j = w_j(x) dmu(x) over a common base measure
(Lebesgue on the shared domain unless a base weight is given). Type II
solutions P_n are monic of degree |n| with int x^k P_n dmu_j = 0 for
k < n_j; type I vectors (A_1..A_r), deg A_j <= n_j - 1, make
Q_n = sum_j A_j w_j orthogonal to degrees < |n|-1 and normalized against
x^(|n|-1).
"""

import dataclasses
import itertools
import math

import mpmath
import numpy as np
from mpmath import mpf

from . import linalg, opcore, quadrature
from .errors import NonNormalIndexError, NumericalError, ValidationError
from .precision import DEFAULT_PRECISION_BITS, workprec
from .weights import Weight, compute_moments

NORMALITY_FLOOR = mpf("1e-30")


class MultiIndex:
    """Multi-index n = (n_1..n_r) with neighbor arithmetic."""

    __slots__ = ("components",)

    def __init__(self, components):
        comps = tuple(int(c) for c in components)
        if len(comps) < 1:
            raise ValidationError("multi-index needs r >= 1 components")
        if any(c < 0 for c in comps):
            raise ValidationError("multi-index components must be >= 0")
        self.components = comps

    @staticmethod
    def of(x):
        if isinstance(x, MultiIndex):
            return x
        if isinstance(x, int):
            return MultiIndex((x,))
        return MultiIndex(tuple(x))

    @property
    def r(self):
        return len(self.components)

    @property
    def size(self):
        return sum(self.components)

    def up(self, k):
        c = list(self.components)
        c[k] += 1
        return MultiIndex(c)

    def down(self, j):
        c = list(self.components)
        if c[j] == 0:
            raise ValidationError(f"cannot decrement component {j} below zero")
        c[j] -= 1
        return MultiIndex(c)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, j):
        return self.components[j]

    def __eq__(self, other):
        return isinstance(other, MultiIndex) and \
            self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def __repr__(self):
        return f"MultiIndex{self.components}"


def stepline_path(n):
    """The stepline from 0 to n: components are raised in round-robin order
    (1,0,..), (1,1,..), ..., skipping components already at their target."""
    n = MultiIndex.of(n)
    cur = MultiIndex((0,) * n.r)
    path = [cur]
    k = 0
    while cur.components != n.components:
        if cur[k] < n[k]:
            cur = cur.up(k)
            path.append(cur)
        k = (k + 1) % n.r
    return path


def monotone_paths(n):
    """Every monotone lattice path from 0 to n (distinct step orderings)."""
    n = MultiIndex.of(n)
    steps = []
    for k, c in enumerate(n.components):
        steps.extend([k] * c)
    paths = []
    for perm in sorted(set(itertools.permutations(steps))):
        cur = MultiIndex((0,) * n.r)
        p = [cur]
        for k in perm:
            cur = cur.up(k)
            p.append(cur)
        paths.append(p)
    return paths


class MOPSystem:
    """r weights over a common base measure, with cached joint moments and
    cached type I/II solutions. The mathematical content is immutable."""

    def __init__(self, weights, base=None, system_class="generic",
                 precision_bits=DEFAULT_PRECISION_BITS):
        self.weights = tuple(weights)
        if not self.weights:
            raise ValidationError("need at least one weight")
        dom = self.weights[0].domain
        for w in self.weights:
            if w.domain != dom:
                raise ValidationError("all weights must share a domain")
        self.base = base
        self.system_class = system_class
        self.precision_bits = precision_bits
        self._moments = [[] for _ in self.weights]
        self._type_ii = {}
        self._type_i = {}

    # ------------------------------------------------------------- classics
    @staticmethod
    def multiple_hermite(c, precision_bits=DEFAULT_PRECISION_BITS):
        c = tuple(float(v) for v in c)
        if len(set(c)) != len(c):
            raise ValidationError("multiple Hermite needs distinct c_j")
        return MOPSystem([Weight.hermite_shifted(v) for v in c],
                         system_class="at_system",
                         precision_bits=precision_bits)

    @staticmethod
    def multiple_laguerre1(alphas, precision_bits=DEFAULT_PRECISION_BITS):
        alphas = tuple(float(a) for a in alphas)
        for ai, aj in itertools.combinations(alphas, 2):
            if abs((ai - aj) - round(ai - aj)) < 1e-12:
                raise ValidationError(
                    "first-kind multiple Laguerre needs alpha_i - alpha_j "
                    "not an integer")
        return MOPSystem([Weight.laguerre(a) for a in alphas],
                         system_class="at_system",
                         precision_bits=precision_bits)

    @staticmethod
    def multiple_laguerre2(alpha, cs, precision_bits=DEFAULT_PRECISION_BITS):
        cs = tuple(float(v) for v in cs)
        if len(set(cs)) != len(cs):
            raise ValidationError("second-kind multiple Laguerre needs "
                                  "distinct c_j")
        if any(v <= 0 for v in cs):
            raise ValidationError("c_j must be positive")
        return MOPSystem([Weight.laguerre(alpha, c) for c in cs],
                         system_class="at_system",
                         precision_bits=precision_bits)

    @staticmethod
    def jacobi_pineiro(alphas, beta, precision_bits=DEFAULT_PRECISION_BITS):
        alphas = tuple(float(a) for a in alphas)
        for ai, aj in itertools.combinations(alphas, 2):
            if abs((ai - aj) - round(ai - aj)) < 1e-12:
                raise ValidationError("Jacobi-Pineiro needs alpha_i - alpha_j "
                                      "not an integer")
        return MOPSystem([Weight.jacobi(a, beta) for a in alphas],
                         system_class="at_system",
                         precision_bits=precision_bits)

    @staticmethod
    def angelesco_legendre(intervals=((-1.0, -0.2), (0.2, 1.0)),
                           precision_bits=DEFAULT_PRECISION_BITS):
        """Angelesco fixture: unit weights on disjoint intervals. The weights
        are represented on the common hull, vanishing off their own interval."""
        ordered = sorted(intervals)
        for (a1, b1), (a2, b2) in zip(ordered, ordered[1:]):
            if b1 > a2:
                raise ValidationError("Angelesco intervals must be pairwise "
                                      "disjoint")
        hull = (min(a for a, _ in intervals), max(b for _, b in intervals))

        def box_weight(a, b):
            def density(x):
                return mpf(1) if a <= x <= b else mpf(0)
            w = Weight.custom(density, hull)
            object.__setattr__(w, "params", {"a": a, "b": b, "boxed": True})
            return w

        sys = MOPSystem([box_weight(a, b) for a, b in intervals],
                        system_class="angelesco",
                        precision_bits=precision_bits)
        sys._angelesco_intervals = tuple(intervals)
        return sys

    # ------------------------------------------------------------- misc
    def to_json_dict(self):
        """Serialization mirroring the single-weight schema plus the
        weight list."""
        d = {"system_class": self.system_class,
             "precision_bits": self.precision_bits,
             "weights": [w.to_json_dict(self.precision_bits)
                         for w in self.weights]}
        if self.base is not None:
            d["base"] = self.base.to_json_dict(self.precision_bits)
        return d

    @staticmethod
    def from_json_dict(d):
        weights = [Weight.from_json_dict(wd)[0] for wd in d["weights"]]
        base = Weight.from_json_dict(d["base"])[0] if "base" in d else None
        return MOPSystem(weights, base=base,
                         system_class=d.get("system_class", "generic"),
                         precision_bits=int(d.get("precision_bits", 256)))

    # ------------------------------------------------------------- moments
    @property
    def r(self):
        return len(self.weights)

    def moment(self, j, k):
        """m_k^(j), extending the cached table on demand."""
        table = self._moments[j]
        if k >= len(table):
            w = self.weights[j]
            if w.family == "custom" and w.params.get("boxed"):
                a, b = w.params["a"], w.params["b"]
                with workprec(self.precision_bits):
                    need = k + 8
                    table.clear()
                    table.extend((mpf(b) ** (i + 1) - mpf(a) ** (i + 1)) / (i + 1)
                                 for i in range(need + 1))
            else:
                seq = compute_moments(w, k + 8, self.precision_bits)
                table.clear()
                table.extend(seq.values)
        return table[k]

    def weight_value(self, j, x):
        """w_j(x) relative to the base measure."""
        v = self.weights[j].density(x)
        if self.base is not None:
            v = v / self.base.density(x)
        return v


# --------------------------------------------------------------------------
# Normality and the type I/II linear solves
# --------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class TypeIIPoly:
    index: MultiIndex
    coefficients: tuple      # ascending; leading coefficient exactly 1

    def __call__(self, x):
        return opcore.poly_eval_coeffs(self.coefficients, mpf(x))

    def degree(self):
        return len(self.coefficients) - 1


@dataclasses.dataclass(frozen=True)
class TypeIVector:
    index: MultiIndex
    coefficient_lists: tuple  # per weight, ascending; () for n_j = 0

    def evaluate_q(self, system, x):
        """Q_n(x) = sum_j A_j(x) w_j(x)."""
        x = mpf(x)
        return mpmath.fsum(
            opcore.poly_eval_coeffs(cl, x) * system.weight_value(j, x)
            for j, cl in enumerate(self.coefficient_lists) if cl)


def _stacked_matrix(system, n):
    n = MultiIndex.of(n)
    size = n.size
    rows = []
    for j in range(system.r):
        for k in range(n[j]):
            rows.append([system.moment(j, k + l) for l in range(size)])
    return rows


def normality_det(system, n):
    """Determinant of the stacked block-Hankel moment matrix; the index n is
    normal iff this is nonzero at working precision."""
    n = MultiIndex.of(n)
    if n.size == 0:
        return mpf(1)
    with workprec(system.precision_bits):
        return linalg.det(_stacked_matrix(system, n))


def _require_normal(system, n, rows):
    d = linalg.det(rows)
    if abs(d) <= NORMALITY_FLOOR * linalg.row_norm_product(rows):
        raise NonNormalIndexError(f"multi-index {tuple(n)} is not normal",
                                  det=float(d))
    return d


def solve_type_ii(system, n):
    """Monic type II polynomial P_n from the joint moment table."""
    n = MultiIndex.of(n)
    size = n.size
    if size == 0:
        return TypeIIPoly(n, (mpf(1),))
    if n in system._type_ii:
        return system._type_ii[n]
    with workprec(system.precision_bits):
        rows = _stacked_matrix(system, n)
        _require_normal(system, n, rows)
        rhs = []
        for j in range(system.r):
            for k in range(n[j]):
                rhs.append(-system.moment(j, k + size))
        coeffs = linalg.solve(rows, rhs) + [mpf(1)]
        poly = TypeIIPoly(n, tuple(coeffs))
    system._type_ii[n] = poly
    return poly


def solve_type_i(system, n):
    """Type I vector (A_1..A_r) with the unit normalization against
    x^(|n|-1)."""
    n = MultiIndex.of(n)
    size = n.size
    if size < 1:
        raise ValidationError("type I needs |n| >= 1")
    if n in system._type_i:
        return system._type_i[n]
    with workprec(system.precision_bits):
        cols = [(j, l) for j in range(system.r) for l in range(n[j])]
        rows = [[system.moment(j, m + l) for (j, l) in cols]
                for m in range(size)]
        _require_normal(system, n, rows)
        rhs = [mpf(0)] * (size - 1) + [mpf(1)]
        sol = linalg.solve(rows, rhs)
        lists = []
        pos = 0
        for j in range(system.r):
            lists.append(tuple(sol[pos:pos + n[j]]))
            pos += n[j]
        vec = TypeIVector(n, tuple(lists))
    system._type_i[n] = vec
    return vec


def biorthogonality_integral(system, n, m):
    """int P_n Q_m dmu, evaluated exactly through the moment tables."""
    n, m = MultiIndex.of(n), MultiIndex.of(m)
    P = solve_type_ii(system, n)
    A = solve_type_i(system, m)
    with workprec(system.precision_bits):
        total = mpf(0)
        for j, cl in enumerate(A.coefficient_lists):
            for q, aq in enumerate(cl):
                for p, cp in enumerate(P.coefficients):
                    total += aq * cp * system.moment(j, p + q)
        return total


# --------------------------------------------------------------------------
# Nearest-neighbor recurrence relations
# --------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class NNRRCoefficients:
    index: MultiIndex
    a: tuple
    b: tuple
    max_residual: float = 0.0


def _functional(system, j, m, coeffs):
    """Apply int . x^m dmu_j to an ascending coefficient list."""
    return mpmath.fsum(c * system.moment(j, m + l)
                       for l, c in enumerate(coeffs) if c != 0)


def _poly_sub(p, q):
    out = [mpf(v) for v in p] + [mpf(0)] * max(0, len(q) - len(p))
    for i, v in enumerate(q):
        out[i] -= v
    return out


def _poly_shift_x(p):
    return [mpf(0)] + [mpf(v) for v in p]


def nnrr_coefficients(system, n):
    """Recurrence coefficients of x P_n = P_{n+e_k} + b_{n,k} P_n
    + sum_j a_{n,j} P_{n-e_j}.

    The a_{n,j} and b_{n,k} are extracted together by applying the moment
    functionals int . x^m dmu_i, 0 <= m <= n_i, to all r relations (a
    least-squares solve that is exact for a normal system); the assembled
    relation is then re-checked pointwise on a test grid.
    """
    n = MultiIndex.of(n)
    r = system.r
    with workprec(system.precision_bits):
        Pn = solve_type_ii(system, n)
        ups = [solve_type_ii(system, n.up(k)) for k in range(r)]
        downs = [solve_type_ii(system, n.down(j)) if n[j] >= 1 else None
                 for j in range(r)]
        x_pn = _poly_shift_x(Pn.coefficients)
        active = [j for j in range(r) if n[j] >= 1]

        rows, rhs = [], []
        for k in range(r):
            target = _poly_sub(x_pn, ups[k].coefficients)
            for i in range(r):
                for m in range(n[i] + 1):
                    row = [mpf(0)] * (r + len(active))
                    row[k] = _functional(system, i, m, Pn.coefficients)
                    for col, j in enumerate(active):
                        row[r + col] = _functional(system, i, m,
                                                   downs[j].coefficients)
                    rows.append(row)
                    rhs.append(_functional(system, i, m, target))
        sol = linalg.lstsq(rows, rhs)
        b = tuple(sol[:r])
        a = [mpf(0)] * r
        for col, j in enumerate(active):
            a[j] = sol[r + col]

        # pointwise residual of the assembled relation on a test grid
        lo, hi = system.weights[0].domain
        lo = lo if math.isfinite(lo) else -3.0
        hi = hi if math.isfinite(hi) else 3.0
        grid = [mpf(lo) + (mpf(hi) - mpf(lo)) * i / 6 for i in range(7)]
        worst, scale = mpf(0), mpf(1)
        for k in range(r):
            for x in grid:
                lhs = x * Pn(x)
                rhs_v = ups[k](x) + b[k] * Pn(x) + mpmath.fsum(
                    a[j] * downs[j](x) for j in active)
                worst = max(worst, abs(lhs - rhs_v))
                scale = max(scale, abs(lhs))
        if worst > mpf("1e-10") * scale:
            raise NumericalError("nearest-neighbor relation residual too large",
                                 residual=float(worst), index=tuple(n))
    return NNRRCoefficients(n, tuple(a), b, float(worst / scale))


def nnrr_closed_form(family, n, **params):
    """Published closed-form NNRR coefficients for the classical families."""
    n = MultiIndex.of(n)
    if family == "multiple_hermite":
        c = params["c"]
        return (tuple(mpf(nj) / 2 for nj in n),
                tuple(mpf(ck) / 2 for ck in c))
    if family == "multiple_laguerre2":
        alpha, c = mpf(params["alpha"]), params["c"]
        size = n.size
        a = tuple(nj * (size + alpha) / mpf(cj) ** 2 for nj, cj in zip(n, c))
        ssum = mpmath.fsum(mpf(nj) / cj for nj, cj in zip(n, c))
        b = tuple((size + alpha + 1) / mpf(ck) + ssum for ck in c)
        return a, b
    if family == "multiple_laguerre1":
        alphas = [mpf(v) for v in params["alphas"]]
        size = n.size
        a = []
        for j, (nj, aj) in enumerate(zip(n, alphas)):
            v = mpf(nj) * (nj + aj)
            for i, (ni, ai) in enumerate(zip(n, alphas)):
                if i != j:
                    v *= (nj + aj - ai) / (nj - ni + aj - ai)
            a.append(v)
        b = tuple(size + nk + ak + 1 for nk, ak in zip(n, alphas))
        return tuple(a), b
    raise ValidationError(f"no closed-form recurrence for family {family!r}")


def nnrr_field(system, box):
    """NNRR coefficients on the full index box {0..N_1} x ... x {0..N_r}."""
    ranges = [range(N + 1) for N in box]
    return {tuple(idx): nnrr_coefficients(system, idx)
            for idx in itertools.product(*ranges)}


def compatibility_residual(field, r):
    """Max residual of the three partial difference equations linking the
    nearest-neighbor coefficients, over all i != j and all indices of the
    field whose needed neighbors are present.

    The ratio identity is evaluated cross-multiplied,
    a_{n,i} (b_{n,j} - b_{n,i}) - a_{n+e_j,i} (b_{n-e_i,j} - b_{n-e_i,i}),
    so vanishing denominators cannot blow up the report.
    """
    per_index = compatibility_residual_field(field, r)
    return max(per_index.values(), default=mpf(0))


def compatibility_residual_field(field, r):
    """Per-index max absolute residual of the identities anchored at each
    index of the field (neighbors missing from the field are skipped)."""
    def get(idx):
        return field.get(tuple(idx))

    out = {}
    for key, cf in field.items():
        n = MultiIndex.of(key)
        worst = mpf(0)
        for i in range(r):
            for j in range(r):
                if i == j:
                    continue
                up_i, up_j = get(n.up(i)), get(n.up(j))
                if up_i is not None and up_j is not None:
                    r1 = (up_i.b[j] - cf.b[j]) - (up_j.b[i] - cf.b[i])
                    r2 = (mpmath.fsum(up_j.a) - mpmath.fsum(up_i.a)
                          - (up_j.b[i] * cf.b[j] - cf.b[i] * up_i.b[j]))
                    worst = max(worst, abs(r1), abs(r2))
                if n[i] >= 1 and up_j is not None:
                    dn = get(n.down(i))
                    if dn is not None:
                        r3 = (cf.a[i] * (cf.b[j] - cf.b[i])
                              - up_j.a[i] * (dn.b[j] - dn.b[i]))
                        worst = max(worst, abs(r3))
        out[tuple(n)] = worst
    return out


# --------------------------------------------------------------------------
# Christoffel-Darboux kernel for multiple orthogonality
# --------------------------------------------------------------------------

def _validate_path(path, endpoint):
    endpoint = MultiIndex.of(endpoint)
    if path[0].components != (0,) * endpoint.r:
        raise ValidationError("path must start at the zero index")
    if path[-1] != endpoint:
        raise ValidationError("path must end at the requested index")
    for a, b in zip(path, path[1:]):
        diff = [y - x for x, y in zip(a.components, b.components)]
        if sorted(diff) != [0] * (endpoint.r - 1) + [1]:
            raise ValidationError("path steps must raise one component by 1")


def mop_cd_kernel(system, endpoint, x, y, path=None):
    """sum_{k<N} P_{n_k}(x) Q_{n_{k+1}}(y) along a monotone path from 0 to
    the endpoint; the value depends only on the endpoint."""
    endpoint = MultiIndex.of(endpoint)
    path = [MultiIndex.of(p) for p in path] if path is not None \
        else stepline_path(endpoint)
    _validate_path(path, endpoint)
    with workprec(system.precision_bits):
        x, y = mpf(x), mpf(y)
        total = mpf(0)
        for k in range(len(path) - 1):
            P = solve_type_ii(system, path[k])
            Q = solve_type_i(system, path[k + 1])
            total += P(x) * Q.evaluate_q(system, y)
        return total


def mop_cd_closed_form(system, endpoint, x, y):
    """(P_n(x) Q_n(y) - sum_j a_{n,j} P_{n-e_j}(x) Q_{n+e_j}(y)) / (x - y)."""
    n = MultiIndex.of(endpoint)
    with workprec(system.precision_bits):
        x, y = mpf(x), mpf(y)
        if x == y:
            raise ValidationError("closed form needs x != y")
        coeffs = nnrr_coefficients(system, n)
        total = solve_type_ii(system, n)(x) * \
            solve_type_i(system, n).evaluate_q(system, y)
        for j in range(system.r):
            if n[j] >= 1:
                total -= coeffs.a[j] * solve_type_ii(system, n.down(j))(x) * \
                    solve_type_i(system, n.up(j)).evaluate_q(system, y)
        return total / (x - y)


# --------------------------------------------------------------------------
# Closed-form families
# --------------------------------------------------------------------------

def _hermite_phys_coeffs(m):
    """Ascending coefficients of the physicists' Hermite H_m."""
    polys = [[mpf(1)]]
    if m >= 1:
        polys.append([mpf(0), mpf(2)])
    for k in range(1, m):
        prev, prev2 = polys[k], polys[k - 1]
        new = [mpf(0)] * (k + 2)
        for i, c in enumerate(prev):
            new[i + 1] += 2 * c
        for i, c in enumerate(prev2):
            new[i] -= 2 * k * c
        polys.append(new)
    return polys[m]


def _index_boxes(n):
    return itertools.product(*(range(c + 1) for c in n))


def family_closed_form(family, n, **params):
    """Type II polynomial of a classical family from its explicit finite sum.

    families: multiple_hermite(c), multiple_laguerre1(alphas),
    multiple_laguerre2(alpha, c), jacobi_pineiro(alphas, beta).
    The Jacobi-Pineiro sum is normalized monic numerically from its leading
    coefficient; the other three sums are monic as written.
    """
    n = MultiIndex.of(n)
    size = n.size
    with workprec(DEFAULT_PRECISION_BITS):
        if family == "multiple_hermite":
            c = [mpf(v) for v in params["c"]]
            if len(set(map(float, c))) != len(c):
                raise ValidationError("needs distinct c_j")
            out = [mpf(0)] * (size + 1)
            for ks in _index_boxes(n.components):
                ksize = sum(ks)
                coef = mpf(1)
                for nj, kj, cj in zip(n, ks, c):
                    coef *= mpmath.binomial(nj, kj) * cj ** (nj - kj)
                coef *= (-1) ** ksize
                h = _hermite_phys_coeffs(ksize)
                for i, hv in enumerate(h):
                    out[i] += coef * hv
            sign = mpf(-1) ** size / mpf(2) ** size
            return TypeIIPoly(n, tuple(sign * v for v in out))

        if family == "multiple_laguerre2":
            alpha = mpf(params["alpha"])
            c = [mpf(v) for v in params["c"]]
            if len(set(map(float, c))) != len(c):
                raise ValidationError("needs distinct c_j")
            out = [mpf(0)] * (size + 1)
            for ks in _index_boxes(n.components):
                ksize = sum(ks)
                coef = mpmath.binomial(size + alpha, ksize) * \
                    (-1) ** ksize * mpmath.factorial(ksize)
                for nj, kj, cj in zip(n, ks, c):
                    coef *= mpmath.binomial(nj, kj) / cj ** kj
                out[size - ksize] += coef
            return TypeIIPoly(n, tuple(out))

        if family == "multiple_laguerre1":
            alphas = [mpf(v) for v in params["alphas"]]
            out = [mpf(0)] * (size + 1)
            tail = [mpmath.fsum(n.components[j:]) for j in range(n.r)] + [mpf(0)]
            for ks in _index_boxes(n.components):
                ksize = sum(ks)
                coef = mpf(-1) ** ksize
                ktail = 0
                for j in range(n.r - 1, -1, -1):
                    nj, kj, aj = n[j], ks[j], alphas[j]
                    coef *= mpmath.factorial(nj) / mpmath.factorial(nj - kj)
                    coef *= mpmath.binomial(tail[j] + aj - ktail, kj)
                    ktail += kj
                out[size - ksize] += coef
            return TypeIIPoly(n, tuple(out))

        if family == "jacobi_pineiro":
            alphas = [mpf(v) for v in params["alphas"]]
            beta = mpf(params["beta"])
            out = [mpf(0)] * (size + 1)
            for ks in _index_boxes(n.components):
                ksize = sum(ks)
                coef = mpf(-1) ** ksize * mpmath.binomial(size + beta, ksize) \
                    * mpmath.factorial(ksize)
                prefix = 0
                for j in range(n.r):
                    nj, kj, aj = n[j], ks[j], alphas[j]
                    coef *= mpmath.binomial(nj + aj + prefix, nj - kj)
                    coef /= mpmath.factorial(kj)
                    prefix += kj
                # x^ksize (1-x)^(size-ksize) expanded to monomials
                for s in range(size - ksize + 1):
                    out[ksize + s] += coef * mpmath.binomial(size - ksize, s) \
                        * (-1) ** s
            lead = out[size]
            if lead == 0:
                raise ValidationError("degenerate Jacobi-Pineiro parameters")
            return TypeIIPoly(n, tuple(v / lead for v in out))

    raise ValidationError(f"unknown closed-form family {family!r}")


# --------------------------------------------------------------------------
# Hermite-Pade approximation
# --------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class HermitePadeResult:
    index: MultiIndex
    kind: str
    z_values: tuple
    errors: tuple            # per j for type II, single list for type I
    slopes: tuple


def _markov_function(system, j, z, precision_bits=192):
    lo, hi = system.weights[j].domain
    w = system.weights[j]
    val, _ = quadrature.integrate(
        lambda x: w.density(x) / (z - x),
        mpmath.ninf if math.isinf(lo) else lo,
        mpmath.inf if math.isinf(hi) else hi,
        precision_bits=precision_bits, rel_tol=mpf("1e-30"))
    return val


def _divided_difference_transform(coeffs, z, moments):
    """int (p(z) - p(x))/(z - x) dmu from the moment list: the divided
    difference is sum_k c_k sum_{i<k} z^(k-1-i) x^i."""
    total = mpf(0)
    for k, ck in enumerate(coeffs):
        if ck == 0:
            continue
        for i in range(k):
            total += ck * z ** (k - 1 - i) * moments[i]
    return total


def _default_z_list(system):
    lo, hi = system.weights[0].domain
    if math.isinf(lo) and math.isinf(hi):
        return [mpmath.mpc(0, s) for s in (8, 16, 32, 64)]
    if math.isinf(hi):
        return [mpf(-s) for s in (8, 16, 32, 64)]
    scale = max(abs(lo), abs(hi), 1.0)
    return [mpf(s) * scale for s in (8, 16, 32, 64)]


def hermite_pade_residual(system, n, kind, z_list=None):
    """Decay order of the Hermite-Pade approximation error at large |z|.

    Type I: sum_j A_j f_j - B_n = O(z^(-|n|)); type II, per j:
    P_n f_j - Q_{n,j} = O(z^(-n_j-1)). Returns the fitted slope(s) of
    log|error| against log|z|; Markov functions f_j are evaluated by
    quadrature, the transformed polynomials from the moment tables.
    """
    n = MultiIndex.of(n)
    if kind not in ("I", "II"):
        raise ValidationError("kind must be 'I' or 'II'")
    if n.size < 1:
        raise ValidationError("Hermite-Pade needs |n| >= 1")
    zs = [mpmath.mpmathify(z) for z in (z_list or _default_z_list(system))]
    with workprec(system.precision_bits):
        mom = [[system.moment(j, k) for k in range(n.size + 2)]
               for j in range(system.r)]
        fvals = [[_markov_function(system, j, z) for z in zs]
                 for j in range(system.r)]
        if kind == "I":
            A = solve_type_i(system, n)
            errs = []
            for iz, z in enumerate(zs):
                b = mpmath.fsum(
                    _divided_difference_transform(cl, z, mom[j])
                    for j, cl in enumerate(A.coefficient_lists) if cl)
                s = mpmath.fsum(
                    opcore.poly_eval_coeffs(cl, z) * fvals[j][iz]
                    for j, cl in enumerate(A.coefficient_lists) if cl)
                errs.append(abs(s - b))
            slope = _fit_slope(zs, errs)
            return HermitePadeResult(n, "I", tuple(zs), (tuple(errs),),
                                     (slope,))
        P = solve_type_ii(system, n)
        all_errs, slopes = [], []
        for j in range(system.r):
            errs = []
            for iz, z in enumerate(zs):
                q = _divided_difference_transform(P.coefficients, z, mom[j])
                errs.append(abs(opcore.poly_eval_coeffs(P.coefficients, z)
                                * fvals[j][iz] - q))
            all_errs.append(tuple(errs))
            slopes.append(_fit_slope(zs, errs))
        return HermitePadeResult(n, "II", tuple(zs), tuple(all_errs),
                                 tuple(slopes))


def _fit_slope(zs, errs):
    xs = np.array([float(mpmath.log(abs(z))) for z in zs])
    ys = np.array([float(mpmath.log(e)) if e > 0 else -745.0 for e in errs])
    return float(np.polyfit(xs, ys, 1)[0])
