"""Random-matrix ensembles: sampling, Monte-Carlo averaged characteristic
polynomials, exact predictions, and spectral histograms.

Sampling conventions
--------------------
gue(n)      Hermitian, diagonal entries N(0, 1/(2n)), off-diagonal real and
            imaginary parts N(0, 1/(4n)); eigenvalue weight e^(-n x^2).
wigner(n,s) same layout with every variance equal to s^2.
wishart     X is n x m with independent standard complex Gaussian entries
            (real/imag parts N(0, 1/2)); the sample is X X*.
truncated_unitary(m, n, k)
            U Haar on U(m+k) via phase-fixed QR of a complex Ginibre
            matrix; V is the m x n upper-left corner, the sample is V*V.
external_source(n, a)
            density exp(-Tr(M^2 - A M)). Completing the square,
            M^2 - A M = (M - A/2)^2 - A^2/4, so M = A/2 + G with G drawn
            from the fixed density exp(-Tr G^2) (diagonal N(0,1/2),
            off-diagonal parts N(0,1/4)); no rejection step is needed.

The registered exact prediction for wishart is the Laguerre polynomial with
alpha = (m-n-1)/2. For the complex Wishart matrices this module samples,
the actual average characteristic polynomial is the monic Laguerre with
alpha = m-n; the registry deliberately keeps the (m-n-1)/2 exponent and the
discrepancy is documented rather than silently corrected (see README).
"""

import dataclasses
import math

import numpy as np

from . import detproc, mop, opcore
from .errors import ValidationError
from .weights import Weight

KINDS = ("gue", "wigner", "wishart", "truncated_unitary", "external_source")


@dataclasses.dataclass(frozen=True)
class EnsembleSpec:
    kind: str
    n: int
    m: int = None
    k: int = None
    sigma: float = None
    a_eigs: tuple = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown ensemble kind {self.kind!r}")
        if self.n < 1:
            raise ValidationError("matrix dimension n must be >= 1")
        if self.kind == "wigner" and not (self.sigma and self.sigma > 0):
            raise ValidationError("wigner needs sigma > 0")
        if self.kind == "wishart" and (self.m is None or self.m < self.n):
            raise ValidationError("wishart needs m >= n")
        if self.kind == "truncated_unitary":
            if self.m is None or self.k is None or self.m < self.n or self.k < 1:
                raise ValidationError("truncated unitary needs m >= n, k >= 1")
        if self.kind == "external_source":
            if not self.a_eigs or len(self.a_eigs) != self.n:
                raise ValidationError("external source needs n eigenvalues of A")

    @staticmethod
    def gue(n):
        return EnsembleSpec("gue", n)

    @staticmethod
    def wigner(n, sigma):
        return EnsembleSpec("wigner", n, sigma=sigma)

    @staticmethod
    def wishart(n, m):
        return EnsembleSpec("wishart", n, m=m)

    @staticmethod
    def truncated_unitary(m, n, k):
        return EnsembleSpec("truncated_unitary", n, m=m, k=k)

    @staticmethod
    def external_source(n, a_eigs):
        return EnsembleSpec("external_source", n,
                            a_eigs=tuple(float(v) for v in a_eigs))


@dataclasses.dataclass(frozen=True)
class CharPolyEstimate:
    degree: int
    coeff_means: tuple       # ascending, leading coefficient exactly 1
    coeff_stderrs: tuple
    samples: int


def _rng(seed, shard=0):
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=int(seed), spawn_key=(int(shard),))))


def _hermitian_batch(rng, count, n, var_diag, var_off):
    X = rng.normal(0.0, 1.0, (count, n, n))
    Y = rng.normal(0.0, 1.0, (count, n, n))
    M = np.zeros((count, n, n), dtype=complex)
    iu = np.triu_indices(n, 1)
    off = math.sqrt(var_off) * (X[:, iu[0], iu[1]] + 1j * Y[:, iu[0], iu[1]])
    M[:, iu[0], iu[1]] = off
    M[:, iu[1], iu[0]] = off.conj()
    di = np.arange(n)
    M[:, di, di] = math.sqrt(var_diag) * X[:, di, di]
    return M


def _sample_batch(spec, rng, count):
    n = spec.n
    if spec.kind == "gue":
        return _hermitian_batch(rng, count, n, 1.0 / (2 * n), 1.0 / (4 * n))
    if spec.kind == "wigner":
        s2 = spec.sigma ** 2
        return _hermitian_batch(rng, count, n, s2, s2)
    if spec.kind == "wishart":
        X = (rng.normal(0.0, 1.0, (count, n, spec.m))
             + 1j * rng.normal(0.0, 1.0, (count, n, spec.m))) / math.sqrt(2)
        return X @ X.conj().transpose(0, 2, 1)
    if spec.kind == "truncated_unitary":
        N = spec.m + spec.k
        G = (rng.normal(0.0, 1.0, (count, N, N))
             + 1j * rng.normal(0.0, 1.0, (count, N, N))) / math.sqrt(2)
        Q, R = np.linalg.qr(G)
        d = np.diagonal(R, axis1=1, axis2=2)
        U = Q * (d / np.abs(d))[:, None, :]
        V = U[:, :spec.m, :n]
        return V.conj().transpose(0, 2, 1) @ V
    if spec.kind == "external_source":
        G = _hermitian_batch(rng, count, n, 0.5, 0.25)
        return G + np.diag(np.asarray(spec.a_eigs) / 2.0)[None, :, :]
    raise ValidationError(f"unknown ensemble kind {spec.kind!r}")


def sample_ensemble(spec, seed):
    """One draw from the ensemble (Hermitian, or the product form XX*/V*V)."""
    return _sample_batch(spec, _rng(seed), 1)[0]


def _charpoly_coeffs_from_eigs(lam):
    """Monic characteristic-polynomial coefficients (descending) for each row
    of eigenvalues, by sequential root multiplication."""
    count, n = lam.shape
    c = np.zeros((count, n + 1))
    c[:, 0] = 1.0
    for i in range(n):
        c[:, 1:i + 2] -= lam[:, i:i + 1] * c[:, 0:i + 1].copy()
    return c


def avg_char_poly_mc(spec, samples, seed, shards=1, batch=20000):
    """Monte-Carlo estimate of E det(xI - M), coefficient by coefficient.

    Per-sample coefficients come from the eigenvalues; shards use derived
    Philox streams and merge exactly, so the result is deterministic in
    (seed, shards).
    """
    if samples < 1000:
        raise ValidationError("need samples >= 1000")
    n = spec.n
    per = [samples // shards + (1 if s < samples % shards else 0)
           for s in range(shards)]
    count = 0
    mean = np.zeros(n + 1)
    m2 = np.zeros(n + 1)
    for s in range(shards):
        rng = _rng(seed, s)
        left = per[s]
        while left > 0:
            take = min(left, batch)
            lam = np.linalg.eigvalsh(_sample_batch(spec, rng, take))
            cs = _charpoly_coeffs_from_eigs(lam)
            bmean = cs.mean(axis=0)
            bm2 = ((cs - bmean) ** 2).sum(axis=0)
            if count == 0:
                mean, m2, count = bmean, bm2, take
            else:
                tot = count + take
                delta = bmean - mean
                mean = mean + delta * take / tot
                m2 = m2 + bm2 + delta ** 2 * count * take / tot
                count = tot
            left -= take
    stderr = np.sqrt(m2 / (count - 1) / count)
    asc_mean = mean[::-1].copy()
    asc_err = stderr[::-1].copy()
    asc_mean[n] = 1.0       # monic by construction
    asc_err[n] = 0.0
    return CharPolyEstimate(n, tuple(asc_mean), tuple(asc_err), count)


def exact_avg_char_poly(spec):
    """Registered prediction for E det(xI - M), ascending monic coefficients.

    gue(n)   -> monic Hermite for the weight e^(-n x^2), i.e. H_n(sqrt(n) x)
                rescaled monic.
    wigner   -> sigma^n H_n(x / 2 sigma) via the three-term recurrence
                P_j = x P_{j-1} - 2 (j-1) sigma^2 P_{j-2}.
    wishart  -> monic Laguerre, alpha = (m-n-1)/2  [registered value; for the
                complex samples this module draws, the empirical average is
                the monic Laguerre with alpha = m-n].
    truncated_unitary -> monic Jacobi on [0,1], alpha = m-n, beta = k-n
                (needs k >= n for an integrable weight).
    external_source -> the type II multiple Hermite polynomial for the
                eigenvalue data of A.
    """
    n = spec.n
    if spec.kind == "gue":
        rec = opcore.RecurrenceCoefficients.hermite(n, s=n)
        return [float(c) for c in opcore.monic_coefficients(rec, n)[n]]
    if spec.kind == "wigner":
        p_prev, p = [1.0], [0.0, 1.0]
        for j in range(2, n + 1):
            new = [0.0] + p
            for i, c in enumerate(p_prev):
                new[i] -= 2 * (j - 1) * spec.sigma ** 2 * c
            p_prev, p = p, new
        return p if n >= 1 else p_prev
    if spec.kind == "wishart":
        alpha = (spec.m - n - 1) / 2.0
        if alpha <= -1:
            raise ValidationError("no prediction registered for m <= n - 1")
        rec = opcore.RecurrenceCoefficients.laguerre(n, alpha=alpha)
        return [float(c) for c in opcore.monic_coefficients(rec, n)[n]]
    if spec.kind == "truncated_unitary":
        alpha, beta = spec.m - n, spec.k - n
        if beta <= -1:
            raise ValidationError(
                "no prediction registered for k <= n - 1 (weight not "
                "integrable)")
        rec = opcore.recurrence_for(Weight.jacobi(alpha, beta, "01"), n + 1, 192)
        return [float(c) for c in opcore.monic_coefficients(rec, n)[n]]
    if spec.kind == "external_source":
        cs, mult = [], []
        for v in spec.a_eigs:
            if cs and abs(v - cs[-1]) < 1e-12:
                mult[-1] += 1
            elif v in cs:
                raise ValidationError("eigenvalues of A must be grouped")
            else:
                cs.append(v)
                mult.append(1)
        poly = mop.family_closed_form("multiple_hermite", tuple(mult),
                                      c=tuple(cs))
        return [float(c) for c in poly.coefficients]
    raise ValidationError(f"no prediction registered for {spec.kind!r}")


@dataclasses.dataclass(frozen=True)
class EigenvalueStats:
    bin_edges: tuple
    counts: tuple
    expected: tuple
    chi_square: float
    samples: int


def eigenvalue_stats(spec, samples, bins, seed, batch=20000):
    """Histogram of sampled eigenvalues against the determinantal prediction
    samples * integral_bin K_n(x,x) w(x) dx.

    ``bins`` is (lo, hi, count). The prediction is registered for gue only.
    """
    if samples * spec.n < 10 ** 4:
        raise ValidationError("need samples * n >= 1e4")
    if spec.kind != "gue":
        raise ValidationError("spectral prediction registered for gue only")
    lo, hi, nb = float(bins[0]), float(bins[1]), int(bins[2])
    edges = np.linspace(lo, hi, nb + 1)
    counts = np.zeros(nb)
    rng = _rng(seed)
    left = samples
    while left > 0:
        take = min(left, batch)
        lam = np.linalg.eigvalsh(_sample_batch(spec, rng, take)).ravel()
        counts += np.histogram(lam, edges)[0]
        left -= take
    kernel = opcore.kernel_for(Weight.hermite(s=spec.n), spec.n, "weighted", 128)
    expected = np.array([
        float(detproc.expected_count(kernel, (edges[i], edges[i + 1])))
        for i in range(nb)]) * samples
    mask = expected > 1e-12
    chi2 = float(np.sum((counts[mask] - expected[mask]) ** 2 / expected[mask]))
    return EigenvalueStats(tuple(edges), tuple(counts), tuple(expected),
                           chi2, samples)
