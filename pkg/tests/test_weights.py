import json
import math

import mpmath
import numpy as np
import pytest
from mpmath import mpf

from opx import DivergentMomentError, ValidationError
from opx.precision import workprec
from opx.weights import MomentSequence, Weight, compute_moments

from conftest import approx_mp


class TestClosedFormMoments:
    def test_hermite_first_three(self):
        mom = compute_moments(Weight.hermite(), 3, 256)
        with workprec(256):
            approx_mp(mom[0], mpmath.sqrt(mpmath.pi), mpf("1e-70"))
            assert mom[1] == 0
            approx_mp(mom[2], mpmath.sqrt(mpmath.pi) / 2, mpf("1e-70"))

    def test_laguerre_factorials(self):
        mom = compute_moments(Weight.laguerre(0), 4, 256)
        assert [float(v) for v in mom.values] == [1.0, 1.0, 2.0, 6.0]

    def test_freud_gamma_oracle(self):
        # independent Gamma evaluation: m0 = Gamma(1/4)/2, m2 = Gamma(3/4)/2
        mom = compute_moments(Weight.freud(0), 3, 256)
        with workprec(256):
            approx_mp(mom[0], mpmath.gamma(mpf(1) / 4) / 2, mpf("1e-70"))
            assert mom[1] == 0
            approx_mp(mom[2], mpmath.gamma(mpf(3) / 4) / 2, mpf("1e-70"))
            assert abs(float(mom[0]) - 1.81280495) < 1e-8

    @pytest.mark.parametrize("weight", [
        Weight.hermite(), Weight.hermite(2.0), Weight.hermite_shifted(0.8),
        Weight.laguerre(0.5, 1.3), Weight.jacobi(0.3, 0.7),
        Weight.jacobi(0.3, 0.7, "pm1"), Weight.freud(0.4),
        Weight.chen_its(0.5, 1.0), Weight.bce_jacobi(0.2, 0.4, 0.3),
        Weight.uniform(-1, 1),
    ])
    def test_closed_forms_match_quadrature(self, weight):
        mom = compute_moments(weight, 5, 128)
        from opx import quadrature
        lo, hi = weight.domain
        with workprec(160):
            for k in range(5):
                direct, _ = quadrature.integrate(
                    lambda x, k=k: x ** k * weight.density(x),
                    mpmath.ninf if math.isinf(lo) else lo,
                    mpmath.inf if math.isinf(hi) else hi,
                    precision_bits=160)
                approx_mp(mom[k], direct, mpf("1e-30") * (1 + abs(direct)))

    def test_custom_table_weight(self):
        w = Weight.custom_table([0.0, 0.5, 1.0], [1.0, 1.0, 1.0])
        mom = compute_moments(w, 3, 128)
        approx_mp(mom[0], 1, mpf("1e-25"))
        approx_mp(mom[1], mpf(1) / 2, mpf("1e-25"))

    def test_divergent_moment_detected(self):
        cauchy = Weight.custom(lambda x: 1 / (1 + x ** 2),
                               (-math.inf, math.inf))
        with pytest.raises(DivergentMomentError):
            compute_moments(cauchy, 4, 64)


class TestValidation:
    def test_parameter_domains(self):
        with pytest.raises(ValidationError):
            Weight.laguerre(-1.5)
        with pytest.raises(ValidationError):
            Weight.jacobi(-2, 0)
        with pytest.raises(ValidationError):
            Weight.uniform(2, 1)

    def test_moment_sequence_invariants(self):
        mom = compute_moments(Weight.hermite(), 9, 128)
        assert mom.validate()
        bad = MomentSequence([mpf(-1), mpf(0)], 128, "broken")
        with pytest.raises(ValidationError):
            bad.validate()

    def test_symmetric_odd_moments_exact_zero(self):
        for w in (Weight.hermite(), Weight.freud(0.3), Weight.uniform(-2, 2)):
            mom = compute_moments(w, 8, 128)
            assert all(mom[k] == 0 for k in (1, 3, 5, 7))


class TestSerialization:
    def test_round_trip_preserves_precision(self):
        w = Weight.freud(0.25)
        mom = compute_moments(w, 6, 256)
        blob = mom.to_json(w)
        w2, mom2 = Weight.from_json_dict(json.loads(blob))
        assert w2.family == "freud"
        with workprec(256):
            for a, b in zip(mom.values, mom2.values):
                assert abs(a - b) <= mpf(2) ** -240 * (1 + abs(a))

    def test_callable_custom_does_not_serialize(self):
        w = Weight.custom(lambda x: mpf(1), (0, 1))
        with pytest.raises(ValidationError):
            w.to_json_dict()


class TestSampling:
    def test_sampler_moments_match(self):
        rng = np.random.default_rng(5)
        for w, mean, var in [
            (Weight.hermite(), 0.0, 0.5),
            (Weight.hermite_shifted(1.0), 0.5, 0.5),
            (Weight.laguerre(0.5, 2.0), 0.75, 0.375),
        ]:
            x = w.sample(rng, 200_000)
            assert abs(np.mean(x) - mean) < 0.01
            assert abs(np.var(x) - var) < 0.01

    def test_freud_rejection_matches_moments(self):
        rng = np.random.default_rng(11)
        x = Weight.freud(0.5).sample(rng, 200_000)
        mom = compute_moments(Weight.freud(0.5), 3, 64)
        assert abs(np.mean(x ** 2) - float(mom[2] / mom[0])) < 5e-3

    def test_custom_has_no_sampler(self):
        w = Weight.custom(lambda x: mpf(1), (0, 1))
        with pytest.raises(ValidationError):
            w.sample(np.random.default_rng(0), 10)


def test_pearson_pairs_satisfy_equation():
    # (sigma w)' = tau w, checked numerically at a few points
    with workprec(128):
        h = mpf("1e-12")
        for w in (Weight.hermite(), Weight.laguerre(0.7),
                  Weight.jacobi(0.4, 0.6), Weight.freud(0.3)):
            sigma, tau = w.pearson
            for x0 in (mpf("0.3"), mpf("0.62")):
                def sw(x):
                    s = mpmath.fsum(c * x ** i for i, c in enumerate(sigma))
                    return s * w.density(x)
                lhs = (sw(x0 + h) - sw(x0 - h)) / (2 * h)
                tv = mpmath.fsum(c * x0 ** i for i, c in enumerate(tau))
                rhs = tv * w.density(x0)
                assert abs(lhs - rhs) < mpf("1e-8") * (1 + abs(rhs))
