import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mpf

from opx import SingularHankelError, ValidationError, opcore
from opx.opcore import (KernelOperator, RecurrenceCoefficients, cd_kernel,
                        eval_poly, gauss_rule, hankel_det,
                        heine_monte_carlo, kernel_for, monic_coefficients,
                        polynomial_zeros, recurrence_from_moments)
from opx.precision import workprec
from opx.weights import Weight, compute_moments

from conftest import approx_mp


def gram_schmidt_recurrence(moments, N):
    """Independent oracle: modified Gram-Schmidt on monomials in the moment
    inner product <x^i, x^j> = m_{i+j}; a_n^2 = |P_n|^2/|P_{n-1}|^2 and
    b_n = <x P_n, P_n>/|P_n|^2."""
    with workprec(moments.precision_bits):
        def inner(p, q):
            return mpmath.fsum(a * b * moments[i + j]
                               for i, a in enumerate(p) if a != 0
                               for j, b in enumerate(q) if b != 0)

        polys = [[mpf(1)]]
        for n in range(1, N + 1):
            cand = [mpf(0)] * n + [mpf(1)]
            for q in polys:
                coef = inner(cand, q) / inner(q, q)
                cand = [c - coef * (q[i] if i < len(q) else 0)
                        for i, c in enumerate(cand)]
            polys.append(cand)
        norms = [inner(p, p) for p in polys]
        a_sq = [norms[n] / norms[n - 1] for n in range(1, N + 1)]
        b = [inner([mpf(0)] + polys[n], polys[n]) / norms[n]
             for n in range(N)]
        return a_sq, b


class TestHankel:
    def test_d1_is_m0(self):
        mom = compute_moments(Weight.hermite(), 3, 192)
        with workprec(192):
            approx_mp(hankel_det(mom, 1), mpmath.sqrt(mpmath.pi), mpf("1e-50"))

    def test_d2_by_hand(self):
        # 2x2 determinant m0 m2 - m1^2 = pi/2
        mom = compute_moments(Weight.hermite(), 3, 192)
        with workprec(192):
            oracle = mom[0] * mom[2] - mom[1] ** 2
            approx_mp(hankel_det(mom, 2), oracle, mpf("1e-50"))
            approx_mp(oracle, mpmath.pi / 2, mpf("1e-50"))

    def test_laguerre_3x3_direct_expansion(self):
        mom = compute_moments(Weight.laguerre(0), 5, 192)
        m = [float(v) for v in mom.values]
        oracle = (m[0] * (m[2] * m[4] - m[3] ** 2)
                  - m[1] * (m[1] * m[4] - m[3] * m[2])
                  + m[2] * (m[1] * m[3] - m[2] ** 2))
        assert oracle == 4.0
        assert float(hankel_det(mom, 3)) == pytest.approx(4.0, abs=1e-30)

    def test_d0_convention(self):
        mom = compute_moments(Weight.hermite(), 1, 64)
        assert hankel_det(mom, 0) == 1

    def test_positivity_all_weights_to_20(self):
        # infinite-support measures: every leading Hankel minor positive
        for w in (Weight.hermite(), Weight.laguerre(0.3),
                  Weight.jacobi(0.2, 0.5), Weight.freud(0.4)):
            mom = compute_moments(w, 39, 256)
            for n in range(1, 21):
                assert hankel_det(mom, n) > 0, (w.family, n)

    def test_insufficient_moments(self):
        mom = compute_moments(Weight.hermite(), 3, 64)
        with pytest.raises(ValidationError):
            hankel_det(mom, 3)


class TestRecurrence:
    def test_hermite_vs_gram_schmidt(self):
        mom = compute_moments(Weight.hermite(), 9, 256)
        rec = recurrence_from_moments(mom, 3)
        assert [float(v) for v in rec.a_sq] == [0.5, 1.0, 1.5]
        assert all(v == 0 for v in rec.b)

    def test_laguerre_closed_form(self):
        mom = compute_moments(Weight.laguerre(0), 7, 256)
        rec = recurrence_from_moments(mom, 2)
        assert float(rec.b[0]) == pytest.approx(1.0, abs=1e-60)
        assert float(rec.a_sq[0]) == pytest.approx(1.0, abs=1e-60)
        assert float(rec.b[1]) == pytest.approx(3.0, abs=1e-60)

    def test_freud_a1(self):
        mom = compute_moments(Weight.freud(0), 5, 256)
        rec = recurrence_from_moments(mom, 1)
        with workprec(256):
            oracle = mpmath.gamma(mpf(3) / 4) / mpmath.gamma(mpf(1) / 4)
            approx_mp(rec.a_sq[0], oracle, mpf("1e-60"))
            assert abs(float(rec.a_sq[0]) - 0.3379891) < 1e-7

    @pytest.mark.parametrize("weight", [
        Weight.hermite(), Weight.laguerre(0.5), Weight.jacobi(0.3, 0.7),
        Weight.freud(0.2),
    ])
    def test_consistency_with_gram_schmidt_oracle(self, weight):
        # the determinant route must agree with modified Gram-Schmidt to
        # 1e-20 relative through n = 12
        mom = compute_moments(weight, 27, 320)
        rec = recurrence_from_moments(mom, 12)
        a_o, b_o = gram_schmidt_recurrence(mom, 12)
        with workprec(320):
            for n in range(12):
                assert abs(rec.a_sq[n] - a_o[n]) <= mpf("1e-20") * a_o[n]
                assert abs(rec.b[n] - b_o[n]) <= mpf("1e-20") * (1 + abs(b_o[n]))

    def test_singular_hankel_reports_index(self):
        # two-point measure: Hankel degenerates at n = 3
        vals = [mpf(2), mpf(0), mpf(2), mpf(0), mpf(2), mpf(0), mpf(2)]
        mom = compute_moments(Weight.hermite(), 7, 128)
        from opx.weights import MomentSequence
        twopoint = MomentSequence(vals, 128, "two-point")
        with pytest.raises(SingularHankelError) as err:
            recurrence_from_moments(twopoint, 3)
        assert err.value.diagnostics["index"] == 3

    def test_gamma_accessor(self):
        rec = RecurrenceCoefficients.hermite(4)
        with workprec(128):
            # gamma_n^2 = 1/(m0 prod a_k^2); n=2: 1/(sqrt(pi) * 1/2 * 1) = 2/sqrt(pi)
            approx_mp(rec.gamma_sq(2), 2 / mpmath.sqrt(mpmath.pi), mpf("1e-30"))
            # and D_n via the accessor matches the determinant route
            mom = compute_moments(Weight.hermite(), 9, 192)
            approx_mp(rec.hankel(3), hankel_det(mom, 3), mpf("1e-30"))


class TestEvalPoly:
    def test_hermite_p2_at_zero(self):
        rec = RecurrenceCoefficients.hermite(3)
        vals = eval_poly(rec, 2, 0, "monic")
        assert [float(v) for v in vals] == [1.0, 0.0, -0.5]

    def test_p0_is_one(self):
        rec = RecurrenceCoefficients.laguerre(3, alpha=0.7)
        assert eval_poly(rec, 0, 5.0, "monic") == [mpf(1)]

    def test_laguerre_p1(self):
        rec = RecurrenceCoefficients.laguerre(2)
        vals = eval_poly(rec, 1, 1.0, "monic")
        assert [float(v) for v in vals] == [1.0, 0.0]

    def test_orthonormal_normalization(self):
        # p_k = gamma_k P_k, spot-checked through the gamma accessor
        rec = RecurrenceCoefficients.hermite(5)
        with workprec(128):
            x = mpf("0.37")
            mono = eval_poly(rec, 4, x, "monic")
            ortho = eval_poly(rec, 4, x, "orthonormal")
            for k in range(5):
                approx_mp(ortho[k], mono[k] * mpmath.sqrt(rec.gamma_sq(k)),
                          mpf("1e-30"))

    def test_monic_coefficients_match_eval(self):
        rec = RecurrenceCoefficients.laguerre(6, alpha=0.3)
        with workprec(128):
            polys = monic_coefficients(rec, 5)
            x = mpf("1.7")
            vals = eval_poly(rec, 5, x, "monic")
            for k, coeffs in enumerate(polys):
                approx_mp(opcore.poly_eval_coeffs(coeffs, x), vals[k],
                          mpf("1e-25") * (1 + abs(vals[k])))


class TestCDKernel:
    def test_n1_constant(self):
        k = kernel_for(Weight.hermite(), 1)
        with workprec(128):
            expect = 1 / mpmath.sqrt(mpmath.pi)
            for x, y in ((0.0, 0.0), (1.3, -0.4)):
                approx_mp(cd_kernel(k, x, y), expect, mpf("1e-30"))

    def test_confluent_point(self):
        k = kernel_for(Weight.hermite(), 2)
        with workprec(128):
            approx_mp(cd_kernel(k, 0, 0), 1 / mpmath.sqrt(mpmath.pi), mpf("1e-30"))

    def test_brute_force_sum_oracle(self):
        k = kernel_for(Weight.hermite(), 3)
        with workprec(192):
            x, y = mpf("0.3"), mpf("0.7")
            px = eval_poly(k.recurrence, 2, x, "orthonormal")
            py = eval_poly(k.recurrence, 2, y, "orthonormal")
            brute = mpmath.fsum(a * b for a, b in zip(px, py))
            assert abs(cd_kernel(k, x, y) - brute) < mpf("1e-12")

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-4, 4), st.floats(-4, 4), st.integers(2, 15))
    def test_cd_identity_random_points(self, x, y, n):
        rec = RecurrenceCoefficients.hermite(16)
        k = KernelOperator(n, rec, Weight.hermite())
        with workprec(192):
            px = eval_poly(rec, n - 1, mpf(x), "orthonormal")
            py = eval_poly(rec, n - 1, mpf(y), "orthonormal")
            brute = mpmath.fsum(a * b for a, b in zip(px, py))
            closed = cd_kernel(k, mpf(x), mpf(y))
            assert abs(closed - brute) <= mpf("1e-10") * (1 + abs(brute))

    def test_symmetry_in_arguments(self):
        k = kernel_for(Weight.laguerre(0.5), 4)
        with workprec(128):
            a = cd_kernel(k, mpf("0.8"), mpf("2.3"))
            b = cd_kernel(k, mpf("2.3"), mpf("0.8"))
            assert abs(a - b) < mpf("1e-30") * (1 + abs(a))

    def test_diagonal_nonnegative(self):
        # K_n(x,x) is a sum of squares
        for w in (Weight.hermite(), Weight.laguerre(0.3)):
            k = kernel_for(w, 5)
            for x in (0.0, 0.4, 1.9, 3.5):
                if not w.contains(x):
                    continue
                assert float(cd_kernel(k, x, x)) >= 0

    def test_weighted_mode_domain_check(self):
        k = kernel_for(Weight.laguerre(0.0), 3, "weighted")
        with pytest.raises(ValidationError):
            cd_kernel(k, -1.0, 2.0)

    def test_reproducing_property(self):
        # int K_n(x,y) q(y) w(y) dy = q(x) for deg q <= n-1, via a Gauss rule
        # of order >= n (exact for these degrees)
        n = 6
        w = Weight.hermite()
        k = kernel_for(w, n)
        nodes, wts = gauss_rule(k.recurrence, 8, 192)
        rng = np.random.default_rng(3)
        with workprec(192):
            for _ in range(4):
                q = [mpf(float(c)) for c in rng.uniform(-1, 1, n)]
                x = mpf(float(rng.uniform(-2, 2)))
                integral = mpmath.fsum(
                    wt * cd_kernel(k, x, node)
                    * opcore.poly_eval_coeffs(q, node)
                    for node, wt in zip(nodes, wts))
                expect = opcore.poly_eval_coeffs(q, x)
                assert abs(integral - expect) <= mpf("1e-10") * (1 + abs(expect))


class TestZeros:
    @pytest.mark.parametrize("weight,n", [
        (Weight.hermite(), 8), (Weight.laguerre(0.4), 7),
        (Weight.jacobi(0.3, 0.6), 6), (Weight.freud(0.2), 6),
    ])
    def test_zeros_real_simple_inside_domain(self, weight, n):
        rec = opcore.recurrence_for(weight, n + 1, 192)
        zeros = polynomial_zeros(rec, n, 192)
        assert len(zeros) == n
        lo, hi = weight.domain
        for i, z in enumerate(zeros):
            assert lo <= float(z) <= hi
            if i:
                assert zeros[i] - zeros[i - 1] > mpf("1e-12")

    def test_gauss_rule_integrates_mass(self):
        rec = RecurrenceCoefficients.hermite(6)
        nodes, wts = gauss_rule(rec, 5, 160)
        with workprec(160):
            approx_mp(mpmath.fsum(wts), mpmath.sqrt(mpmath.pi), mpf("1e-40"))
            # and x^2 exactly
            approx_mp(mpmath.fsum(w * x ** 2 for x, w in zip(nodes, wts)),
                      mpmath.sqrt(mpmath.pi) / 2, mpf("1e-40"))


class TestHeineMonteCarlo:
    def test_d1_exact(self):
        est = heine_monte_carlo(Weight.hermite(), 1, 5000, "det", seed=1)
        assert est.value == pytest.approx(math.sqrt(math.pi), rel=1e-12)
        assert est.stderr == 0.0

    def test_d2_within_stderr(self):
        est = heine_monte_carlo(Weight.hermite(), 2, 1_000_000, "det", seed=2)
        assert est.within(math.pi / 2)
        assert est.stderr < 0.01

    def test_poly_mode_p2_at_zero(self):
        est = heine_monte_carlo(Weight.hermite(), 2, 1_000_000, "poly",
                                seed=3, x=0.0)
        assert est.within(-0.5)

    def test_seed_determinism_and_shard_merge(self):
        a = heine_monte_carlo(Weight.hermite(), 2, 40000, "det", seed=9,
                              shards=4)
        b = heine_monte_carlo(Weight.hermite(), 2, 40000, "det", seed=9,
                              shards=4)
        assert a == b
        # shard merge reproduces a manual merge of independent shard runs
        parts = [heine_monte_carlo(Weight.hermite(), 2, 10000, "det",
                                   seed=9, shards=1)]
        assert parts[0].samples == 10000

    def test_stderr_scales_as_inverse_sqrt(self):
        e1 = heine_monte_carlo(Weight.hermite(), 2, 20000, "det", seed=5)
        e2 = heine_monte_carlo(Weight.hermite(), 2, 80000, "det", seed=5)
        ratio = e1.stderr / e2.stderr
        assert 1.6 < ratio < 2.4

    def test_convergence_rate_over_seeds(self):
        # |estimate - exact| <= 4 stderr in at least 95% of seeded runs
        hits = 0
        for seed in range(20):
            est = heine_monte_carlo(Weight.hermite(), 2, 20000, "det",
                                    seed=seed)
            hits += est.within(math.pi / 2)
        assert hits >= 19

    def test_validation(self):
        with pytest.raises(ValidationError):
            heine_monte_carlo(Weight.hermite(), 2, 100, "det", seed=0)
        with pytest.raises(ValidationError):
            heine_monte_carlo(Weight.hermite(), 2, 5000, "poly", seed=0)
