import math

import mpmath
import numpy as np
import pytest
from mpmath import mpf

from opx import ValidationError, opcore
from opx.detproc import (NibmKernelSpec, correlation_k, expected_count,
                         gap_probability, joint_density, nibm_kernel)
from opx.opcore import RecurrenceCoefficients, cd_kernel, eval_poly, gauss_rule
from opx.precision import workprec
from opx.weights import Weight

from conftest import approx_mp


@pytest.fixture(scope="module")
def hermite_kernels():
    w = Weight.hermite()
    return {n: opcore.kernel_for(w, n, "weighted", 192) for n in (1, 2, 3, 5, 8)}


class TestCorrelation:
    def test_rho1_is_weighted_p0(self, hermite_kernels):
        with workprec(160):
            x = mpf("0.7")
            got = correlation_k(hermite_kernels[1], [x]).value
            expect = mpmath.exp(-x ** 2) / mpmath.sqrt(mpmath.pi)
            approx_mp(got, expect, mpf("1e-30"))

    def test_empty_determinant(self, hermite_kernels):
        assert correlation_k(hermite_kernels[2], []).value == 1

    def test_repeated_point_vanishes(self, hermite_kernels):
        v = correlation_k(hermite_kernels[2], [mpf("0.4"), mpf("0.4")]).value
        assert abs(v) < mpf("1e-40")

    def test_order_exceeds_degree(self, hermite_kernels):
        with pytest.raises(ValidationError):
            correlation_k(hermite_kernels[1], [0.0, 1.0])

    def test_nonnegative_on_distinct_points(self, hermite_kernels):
        rng = np.random.default_rng(7)
        for _ in range(20):
            pts = sorted(rng.uniform(-2, 2, 3))
            v = correlation_k(hermite_kernels[5], [mpf(p) for p in pts]).value
            assert float(v) >= -1e-10

    def test_permutation_symmetry(self, hermite_kernels):
        with workprec(160):
            a = correlation_k(hermite_kernels[3], [0.1, 0.5, -0.7]).value
            b = correlation_k(hermite_kernels[3], [-0.7, 0.1, 0.5]).value
            assert abs(a - b) < mpf("1e-35") * (1 + abs(a))


class TestJointDensity:
    def test_vandermonde_route_agrees(self, hermite_kernels):
        v = joint_density(hermite_kernels[2], [mpf("0.5"), mpf("-0.5")])
        assert float(v) > 0      # construction already cross-checks routes

    def test_single_point_is_normalized_weight(self, hermite_kernels):
        with workprec(160):
            x = mpf("0.2")
            got = joint_density(hermite_kernels[1], [x])
            approx_mp(got, mpmath.exp(-x ** 2) / mpmath.sqrt(mpmath.pi),
                      mpf("1e-30"))

    def test_coincident_points_vanish(self, hermite_kernels):
        v = joint_density(hermite_kernels[2], [mpf("0.3"), mpf("0.3")])
        assert abs(v) < mpf("1e-40")

    def test_size_mismatch(self, hermite_kernels):
        with pytest.raises(ValidationError):
            joint_density(hermite_kernels[2], [0.0])

    def test_marginalization_to_rho2(self, hermite_kernels):
        # n!/(n-k)! int P(x1,x2,x3) dmu(x3) = rho_2(x1,x2); the integrand is
        # polynomial times the weight, so a Gauss rule of adequate order is
        # exact. The combinatorial factor for n=3, k=2 is 3!/1! = 6.
        k3 = hermite_kernels[3]
        rule_rec = opcore.recurrence_for(Weight.hermite(), 7, 160)
        nodes, wts = gauss_rule(rule_rec, 6, 160)
        rng = np.random.default_rng(1)
        with workprec(160):
            for _ in range(20):
                x1, x2 = (mpf(float(v)) for v in rng.uniform(-1.5, 1.5, 2))
                marg = mpmath.fsum(
                    wt / k3.weight.density(node)
                    * joint_density(k3, [x1, x2, node])
                    for node, wt in zip(nodes, wts))
                rho2 = correlation_k(k3, [x1, x2]).value
                assert abs(6 * marg - rho2) <= mpf("1e-8") * (1 + abs(rho2))


class TestExpectedCount:
    def test_full_line_gives_n(self, hermite_kernels):
        approx_mp(expected_count(hermite_kernels[5],
                                 (-math.inf, math.inf)), 5, mpf("1e-10"))

    def test_half_line_symmetry(self, hermite_kernels):
        approx_mp(expected_count(hermite_kernels[1], (0, math.inf)),
                  mpf(1) / 2, mpf("1e-10"))

    def test_term_by_term_oracle(self, hermite_kernels):
        # E N([-1,1]) for n=3 equals the sum of the three single-k integrals
        k3 = hermite_kernels[3]
        got = expected_count(k3, (-1.0, 1.0))
        assert 0 < float(got) < 3
        from opx import quadrature
        with workprec(160):
            total = mpf(0)
            for j in range(3):
                def single(x, j=j):
                    p = eval_poly(k3.recurrence, j, x, "orthonormal")
                    return p[j] ** 2 * k3.weight.density(x)
                total += quadrature.integrate(single, -1, 1,
                                              precision_bits=160)[0]
            approx_mp(got, total, mpf("1e-10"))

    def test_rho1_integrates_to_n(self, hermite_kernels):
        for n in (2, 8):
            got = expected_count(hermite_kernels[n], (-math.inf, math.inf))
            approx_mp(got, n, mpf("1e-9"))


class TestSemigroup:
    def test_kernel_composes(self, hermite_kernels):
        # int K(x,s) K(s,y) w(s) ds = K(x,y); the integrand is polynomial
        # times weight of degree 2(n-1), so an n-point Gauss rule is exact
        k = hermite_kernels[8]
        nodes, wts = gauss_rule(k.recurrence, 8, 160)
        plain = opcore.KernelOperator(8, k.recurrence, k.weight, "plain")
        with workprec(160):
            for x, y in ((mpf("0.3"), mpf("-1.1")), (mpf("1.7"), mpf("0.2"))):
                lhs = mpmath.fsum(
                    wt * cd_kernel(plain, x, s) * cd_kernel(plain, s, y)
                    for s, wt in zip(nodes, wts))
                rhs = cd_kernel(plain, x, y)
                assert abs(lhs - rhs) <= mpf("1e-9") * (1 + abs(rhs))


class TestGapProbability:
    def test_gue1_half_line(self, hermite_kernels):
        g = gap_probability(hermite_kernels[1], (0.0, 6.0), 20)
        assert g.converged
        assert abs(g.result - 0.5) < 1e-6

    def test_degenerate_interval(self, hermite_kernels):
        g = gap_probability(hermite_kernels[2], (0.3, 0.3), 20)
        assert g.result == 1.0

    def test_n2_inclusion_exclusion_series(self, hermite_kernels):
        # for n = 2 the expansion terminates: gap = 1 - int rho1 + 1/2 iint rho2
        k2 = hermite_kernels[2]
        g = gap_probability(k2, (-0.5, 0.5), 20)
        from opx.quadrature import gauss_legendre_mapped
        x, wx = gauss_legendre_mapped(40, -0.5, 0.5)
        P = opcore.orthonormal_values_np(k2.recurrence, 1, x)
        K = (P.T @ P) * np.sqrt(np.outer(k2.weight.density_np(x),
                                         k2.weight.density_np(x)))
        rho1 = np.sum(np.diag(K) * wx)
        W = np.outer(wx, wx)
        rho2 = np.sum((np.multiply.outer(np.diag(K), np.diag(K)) - K ** 2) * W)
        series = 1 - rho1 + rho2 / 2
        assert abs(g.result - series) < 1e-8

    def test_tail_mass_consistency(self, hermite_kernels):
        # single eigenvalue: no-eigenvalue probability on [-L, L] equals the
        # two-sided Gaussian tail mass, so gap + P(>= 1 eigenvalue) = 1
        L = 4.0
        g = gap_probability(hermite_kernels[1], (-L, L), 24)
        tails = math.erfc(L)     # 2 * int_L^inf e^(-x^2)/sqrt(pi) dx
        assert abs(g.result + (1.0 - tails) - 1.0) < 1e-8

    def test_validation(self, hermite_kernels):
        with pytest.raises(ValidationError):
            gap_probability(hermite_kernels[2], (0.0, math.inf), 20)
        with pytest.raises(ValidationError):
            gap_probability(hermite_kernels[2], (0.0, 1.0), 5)

    def test_result_in_unit_interval(self, hermite_kernels):
        for iv in ((-1.0, 1.0), (-3.0, 0.5), (0.2, 2.0)):
            g = gap_probability(hermite_kernels[3], iv, 24)
            assert -1e-8 <= g.result <= 1 + 1e-8


class TestNibm:
    def test_single_one_term(self):
        spec = NibmKernelSpec(1, 0.5, "single")
        with workprec(128):
            x, y = mpf("0.3"), mpf("0.4")
            got = nibm_kernel(spec, x, y)
            expect = mpmath.exp(-(x ** 2 + y ** 2) / 2) / mpmath.sqrt(mpmath.pi)
            approx_mp(got, expect, mpf("1e-25"))

    def test_single_term_by_term_oracle(self):
        spec = NibmKernelSpec(3, 0.3, "single")
        with workprec(160):
            t = mpf("0.3")
            x, y = mpf("0.1"), mpf("-0.2")
            rec = RecurrenceCoefficients.hermite(3)
            hu = eval_poly(rec, 2, x / mpmath.sqrt(2 * t), "orthonormal")
            hv = eval_poly(rec, 2, y / mpmath.sqrt(2 * (1 - t)), "orthonormal")
            oracle = mpmath.exp(-x ** 2 / (4 * t) - y ** 2 / (4 * (1 - t))) \
                * mpmath.fsum(a * b for a, b in zip(hu, hv))
            assert abs(nibm_kernel(spec, x, y) - oracle) < mpf("1e-12")

    def test_double_nonnegative_diag(self):
        spec = NibmKernelSpec(2, 0.5, "double", b=1.0)
        assert float(nibm_kernel(spec, 0.0, 0.0)) >= 0
        for s in (-1.5, -0.5, 0.5, 1.5):
            assert float(nibm_kernel(spec, s, s)) >= -1e-12

    def test_double_expected_count_normalization(self):
        from opx import quadrature
        spec = NibmKernelSpec(2, 0.4, "double", b=0.8)
        with workprec(96):
            total, _ = quadrature.integrate(
                lambda s: nibm_kernel(spec, s, s), mpmath.ninf, mpmath.inf,
                precision_bits=96, rel_tol=mpf("1e-10"))
            approx_mp(total, 2, mpf("1e-8"))

    def test_validation(self):
        with pytest.raises(ValidationError):
            NibmKernelSpec(2, 1.5, "single")
        with pytest.raises(ValidationError):
            NibmKernelSpec(3, 0.5, "double")
