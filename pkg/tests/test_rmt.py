import numpy as np
import pytest

from opx import ValidationError, rmt
from opx.rmt import (EnsembleSpec, avg_char_poly_mc, eigenvalue_stats,
                     exact_avg_char_poly, sample_ensemble)


class TestSampling:
    def test_gue1_scalar_variance(self):
        xs = np.array([sample_ensemble(EnsembleSpec.gue(1), seed)[0, 0].real
                       for seed in range(4000)])
        assert abs(xs.mean()) < 0.05
        assert abs(xs.var() - 0.5) < 0.05

    def test_gue_entry_variances(self):
        n = 3
        rng = rmt._rng(11)
        M = rmt._sample_batch(EnsembleSpec.gue(n), rng, 30000)
        assert np.allclose(M, M.conj().transpose(0, 2, 1))
        assert abs(M[:, 0, 0].real.var() - 1 / (2 * n)) < 0.01
        assert abs(M[:, 0, 1].real.var() - 1 / (4 * n)) < 0.01
        assert abs(M[:, 0, 1].imag.var() - 1 / (4 * n)) < 0.01

    def test_wishart_psd_hermitian(self):
        W = sample_ensemble(EnsembleSpec.wishart(2, 3), 1)
        assert np.allclose(W, W.conj().T)
        assert np.linalg.eigvalsh(W).min() >= -1e-12

    def test_truncated_unitary_eigs_in_unit_interval(self):
        for seed in range(5):
            T = sample_ensemble(EnsembleSpec.truncated_unitary(3, 2, 1), seed)
            lam = np.linalg.eigvalsh(T)
            assert lam.min() >= -1e-12
            assert lam.max() <= 1 + 1e-12

    def test_haar_truncation_is_unitary_part(self):
        # QR phase fix gives unitary matrices: U U* = I
        rng = rmt._rng(3)
        N = 4
        G = (rng.normal(size=(1, N, N)) + 1j * rng.normal(size=(1, N, N)))
        Q, R = np.linalg.qr(G)
        d = np.diagonal(R, axis1=1, axis2=2)
        U = (Q * (d / np.abs(d))[:, None, :])[0]
        assert np.allclose(U @ U.conj().T, np.eye(N), atol=1e-12)

    def test_external_source_mean_shift(self):
        rng = rmt._rng(5)
        spec = EnsembleSpec.external_source(2, (-1.0, 1.0))
        M = rmt._sample_batch(spec, rng, 20000)
        means = M.mean(axis=0)
        assert abs(means[0, 0].real + 0.5) < 0.02
        assert abs(means[1, 1].real - 0.5) < 0.02

    def test_validation(self):
        with pytest.raises(ValidationError):
            EnsembleSpec.wishart(3, 2)
        with pytest.raises(ValidationError):
            EnsembleSpec.truncated_unitary(2, 3, 1)
        with pytest.raises(ValidationError):
            EnsembleSpec.wigner(2, 0.0)
        with pytest.raises(ValidationError):
            EnsembleSpec.external_source(2, (1.0,))


class TestExactPredictions:
    def test_gue1_linear(self):
        assert exact_avg_char_poly(EnsembleSpec.gue(1)) == [0.0, 1.0]

    def test_gue2(self):
        assert exact_avg_char_poly(EnsembleSpec.gue(2)) == \
            pytest.approx([-0.25, 0.0, 1.0], abs=1e-14)

    def test_wigner3_two_recurrence_steps(self):
        # P3 = x P2 - 4 sigma^2 P1 with P2 = x^2 - 2 sigma^2 -> x^3 - 6 s^2 x
        for s in (1.0, 0.7):
            got = exact_avg_char_poly(EnsembleSpec.wigner(3, s))
            assert got == pytest.approx([0.0, -6 * s ** 2, 0.0, 1.0], abs=1e-14)

    def test_wishart_registered_alpha(self):
        # registered prediction carries alpha = (m-n-1)/2: for (2,3) this is
        # the monic Laguerre with alpha = 0, i.e. x^2 - 4x + 2
        got = exact_avg_char_poly(EnsembleSpec.wishart(2, 3))
        assert got == pytest.approx([2.0, -4.0, 1.0], abs=1e-12)

    def test_external_source_single_eigenvalue_reduction(self):
        # A = c I: the multiple Hermite prediction collapses to the shifted
        # monic Hermite for e^(-x^2+cx), i.e. M_n(x - c/2)
        from opx import opcore
        from opx.weights import Weight
        c = 0.8
        got = exact_avg_char_poly(EnsembleSpec.external_source(3, (c, c, c)))
        rec = opcore.recurrence_for(Weight.hermite_shifted(c), 4, 192)
        expect = [float(v) for v in opcore.monic_coefficients(rec, 3)[3]]
        assert got == pytest.approx(expect, abs=1e-12)

    def test_no_prediction_for_deficient_truncation(self):
        with pytest.raises(ValidationError):
            exact_avg_char_poly(EnsembleSpec.truncated_unitary(3, 2, 1))


class TestMonteCarloAgreement:
    def test_gue2_coefficients(self):
        est = avg_char_poly_mc(EnsembleSpec.gue(2), 100_000, seed=7)
        assert est.coeff_means[2] == 1.0 and est.coeff_stderrs[2] == 0.0
        assert abs(est.coeff_means[0] + 0.25) <= 4 * est.coeff_stderrs[0]
        assert abs(est.coeff_means[1]) <= 4 * est.coeff_stderrs[1]

    def test_wigner2(self):
        est = avg_char_poly_mc(EnsembleSpec.wigner(2, 1.0), 100_000, seed=7)
        assert abs(est.coeff_means[0] + 2.0) <= 4 * est.coeff_stderrs[0]

    def test_gue1_mean_zero(self):
        est = avg_char_poly_mc(EnsembleSpec.gue(1), 20_000, seed=1)
        assert abs(est.coeff_means[0]) <= 4 * est.coeff_stderrs[0]

    def test_truncated_unitary_agreement(self):
        spec = EnsembleSpec.truncated_unitary(3, 2, 2)
        est = avg_char_poly_mc(spec, 60_000, seed=5)
        exact = exact_avg_char_poly(spec)
        for i in range(2):
            assert abs(est.coeff_means[i] - exact[i]) <= 4 * est.coeff_stderrs[i]

    def test_external_source_agreement(self):
        spec = EnsembleSpec.external_source(2, (-1.0, 1.0))
        est = avg_char_poly_mc(spec, 60_000, seed=5)
        exact = exact_avg_char_poly(spec)
        for i in range(2):
            assert abs(est.coeff_means[i] - exact[i]) <= 4 * est.coeff_stderrs[i]

    def test_wishart_matches_corrected_alpha_not_registry(self):
        # the sampled complex Wishart averages to the monic Laguerre with
        # alpha = m - n (here x^2 - 6x + 6), not the registered exponent
        from opx import opcore
        spec = EnsembleSpec.wishart(2, 3)
        est = avg_char_poly_mc(spec, 100_000, seed=3)
        rec = opcore.RecurrenceCoefficients.laguerre(2, alpha=1.0)
        corrected = [float(v) for v in opcore.monic_coefficients(rec, 2)[2]]
        assert corrected == pytest.approx([6.0, -6.0, 1.0], abs=1e-12)
        for i in range(2):
            assert abs(est.coeff_means[i] - corrected[i]) \
                <= 4 * est.coeff_stderrs[i]
        registered = exact_avg_char_poly(spec)
        assert abs(est.coeff_means[0] - registered[0]) > 10 * est.coeff_stderrs[0]

    def test_monic_invariance_and_symmetry(self):
        for spec in (EnsembleSpec.gue(3), EnsembleSpec.wigner(3, 0.5)):
            est = avg_char_poly_mc(spec, 40_000, seed=2)
            assert est.coeff_means[3] == 1.0
            # odd coefficients of the degree-3 polynomial vanish on average
            assert abs(est.coeff_means[2]) <= 4 * max(est.coeff_stderrs[2],
                                                      1e-12)
            assert abs(est.coeff_means[0]) <= 4 * max(est.coeff_stderrs[0],
                                                      1e-12)

    def test_agreement_battery_across_seeds(self):
        # every registered kind with a matching sampling convention, n <= 4:
        # at least 95% of MC coefficients land within 4 stderr of the
        # prediction across a fixed seed set
        specs = [EnsembleSpec.gue(4), EnsembleSpec.wigner(4, 0.8),
                 EnsembleSpec.truncated_unitary(5, 3, 4),
                 EnsembleSpec.external_source(3, (-1.0, 0.5, 0.5))]
        hits = trials = 0
        for spec in specs:
            exact = exact_avg_char_poly(spec)
            for seed in (1, 2, 3):
                est = avg_char_poly_mc(spec, 20_000, seed=seed)
                for i in range(spec.n):
                    trials += 1
                    hits += (abs(est.coeff_means[i] - exact[i])
                             <= 4 * max(est.coeff_stderrs[i], 1e-15))
        assert hits / trials >= 0.95

    def test_determinism_and_shards(self):
        a = avg_char_poly_mc(EnsembleSpec.gue(2), 20_000, seed=9, shards=4)
        b = avg_char_poly_mc(EnsembleSpec.gue(2), 20_000, seed=9, shards=4)
        assert a == b

    def test_positivity_of_product_samples(self):
        rng = rmt._rng(13)
        W = rmt._sample_batch(EnsembleSpec.wishart(3, 4), rng, 500)
        assert np.linalg.eigvalsh(W).min() >= -1e-10
        T = rmt._sample_batch(EnsembleSpec.truncated_unitary(4, 3, 3), rng, 500)
        lam = np.linalg.eigvalsh(T)
        assert lam.min() >= -1e-10 and lam.max() <= 1 + 1e-12


class TestEigenvalueStats:
    def test_gue1_histogram_matches_gaussian(self):
        stats = eigenvalue_stats(EnsembleSpec.gue(1), 100_000, (-3, 3, 24), 4)
        counts = np.array(stats.counts)
        expected = np.array(stats.expected)
        mask = expected > 25
        z = (counts[mask] - expected[mask]) / np.sqrt(expected[mask])
        assert np.mean(np.abs(z) < 4) == 1.0

    def test_gue4_total_counts(self):
        stats = eigenvalue_stats(EnsembleSpec.gue(4), 30_000, (-4, 4, 30), 8)
        assert sum(stats.counts) == 4 * 30_000
        expected = np.array(stats.expected)
        counts = np.array(stats.counts)
        mask = expected > 1
        frac = np.mean(np.abs(counts[mask] - expected[mask])
                       <= 5 * np.sqrt(expected[mask]))
        assert frac >= 0.9

    def test_no_prediction_for_other_kinds(self):
        with pytest.raises(ValidationError):
            eigenvalue_stats(EnsembleSpec.wishart(4, 5), 10_000, (0, 10, 10), 0)
