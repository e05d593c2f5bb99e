import numpy as np
import pytest

from repwalk import (
    ExpansionCoefficients,
    FixedRepetition,
    IncrementModel,
    NonErgodicRhoError,
    RepetitionDistribution,
    SingularDenominatorError,
    TimePropagatorQuery,
    TruncationError,
    WaitingTimeModel,
    asymptotic_moment_exponents,
    gaver_stehfest,
    invert_laplace,
    laplace_moments,
    propagator_bin_mass,
    repetition_laplace_sum,
    step_acf_asymptote,
    step_acf_asymptotic_slope,
    step_acf_exact,
)
from repwalk.theory import gaver_stehfest_weights

import oracles


class TestStepAcfExact:
    def test_lag_zero(self):
        assert step_acf_exact(RepetitionDistribution(2.7), 0) == 1.0

    def test_matches_asymptote_at_large_lag(self):
        rep = RepetitionDistribution(3.5)
        n = 1000
        assert step_acf_exact(rep, n) == pytest.approx(
            float(step_acf_asymptote(rep, n)), rel=0.02
        )

    def test_lag_one_against_double_sum(self):
        rep = RepetitionDistribution(3.5)
        assert step_acf_exact(rep, 1) == pytest.approx(
            oracles.stationary_sojourn_double_sum(3.5, 1), abs=1e-12
        )

    @pytest.mark.parametrize("rho", [2.2, 2.5, 3.0, 3.5])
    def test_asymptote_ratio_converges(self, rho):
        rep = RepetitionDistribution(rho)
        ratio = step_acf_exact(rep, 100_000) / float(step_acf_asymptote(rep, 100_000))
        assert ratio == pytest.approx(1.0, abs=0.01)

    def test_non_ergodic(self):
        with pytest.raises(NonErgodicRhoError):
            step_acf_exact(RepetitionDistribution(1.8), 5)


class TestAsymptoticSlope:
    def test_values(self):
        assert step_acf_asymptotic_slope(RepetitionDistribution(2.25)) == -0.25
        assert step_acf_asymptotic_slope(RepetitionDistribution(3.0)) == -1.0

    def test_fitted_exact_curve(self):
        rep = RepetitionDistribution(2.5)
        lags = np.unique(np.round(np.geomspace(100, 10_000, 30)))
        vals = step_acf_exact(rep, lags)
        slope = oracles.loglog_slope(lags, vals, 100, 10_000)
        assert slope == pytest.approx(-0.5, abs=0.02)


class TestPropagator:
    def test_zero_steps_full_atom(self):
        q = TimePropagatorQuery(1.5, 0, WaitingTimeModel.exponential(1.0),
                                RepetitionDistribution(3.0))
        assert propagator_bin_mass(q, 1.0, 1.0) == pytest.approx(1.0)
        assert propagator_bin_mass(q, 3.0, 1.0) == pytest.approx(0.0)

    def test_many_steps_pure_fresh(self):
        w = WaitingTimeModel.exponential(1.0)
        q = TimePropagatorQuery(1.5, 10_000_000, w, RepetitionDistribution(3.0))
        mass = propagator_bin_mass(q, 1.0, 1.0)
        assert mass == pytest.approx(float(w.cdf(2.0) - w.cdf(1.0)), rel=1e-3)

    def test_mass_conservation(self):
        w = WaitingTimeModel.exponential(1.0)
        q = TimePropagatorQuery(1.5, 5, w, RepetitionDistribution(3.0))
        edges = np.concatenate([np.linspace(0, 50, 5001)])
        total = sum(
            propagator_bin_mass(q, lo, hi - lo)
            for lo, hi in zip(edges[:-1], edges[1:])
        )
        total += 1.0 - float(w.cdf(50.0))  # remaining fresh mass beyond grid
        assert total == pytest.approx(1.0, abs=1e-6)


class TestMomentExponents:
    def test_superdiffusive_case(self):
        rec = asymptotic_moment_exponents(2.5, mu1_zero=False)
        assert rec == {
            "m1_powerlaw_exp": 0.5,
            "variance_powerlaw_exp": 1.5,
            "acf_exp": -0.5,
        }

    def test_symmetric_case_decays_faster(self):
        assert asymptotic_moment_exponents(2.5, mu1_zero=True)["acf_exp"] == -1.5

    def test_normal_diffusion_for_large_rho(self):
        rec = asymptotic_moment_exponents(4.0)
        assert rec["variance_powerlaw_exp"] == 0.0  # < 1: linear term dominates


class TestLaplaceSums:
    def test_vanishes_at_large_s(self):
        val = repetition_laplace_sum(
            0, 1e6, WaitingTimeModel.exponential(1.0), RepetitionDistribution(3.5)
        )
        assert val.value < 1e-4

    def test_c00_limit(self):
        val = repetition_laplace_sum(
            0, 1e-7, WaitingTimeModel.exponential(1.0), RepetitionDistribution(3.5)
        )
        assert val.value == pytest.approx(1.0, abs=1e-4)

    def test_brute_force_order_one(self):
        rho, s = 3.5, 1e-4
        w = WaitingTimeModel.exponential(1.0)
        rep = RepetitionDistribution(rho)
        got = repetition_laplace_sum(1, s, w, rep)
        nu = np.arange(1, 10_000_001, dtype=np.float64)
        brute = float(np.sum(nu * (1.0 / (1.0 + s * nu)) * nu ** (-rho))) / rep.zeta_rho
        assert got.value == pytest.approx(brute, abs=1e-8)

    def test_survival_weight_brute_force(self):
        rho, s = 3.0, 0.05
        w = WaitingTimeModel.exponential(1.3)
        rep = RepetitionDistribution(rho)
        got = repetition_laplace_sum(0, s, w, rep, weight="survival")
        nu = np.arange(1, 2_000_001, dtype=np.float64)
        brute = float(
            np.sum((1.3 / (1.3 + s * nu)) * rep.survival_strict(nu.astype(np.int64)))
        )
        assert got.value == pytest.approx(brute, rel=1e-7)

    def test_truncation_refusal_suggests_cutoff(self):
        w = WaitingTimeModel.exponential(1.0)
        rep = RepetitionDistribution(2.2)
        with pytest.raises(TruncationError, match="nu_max"):
            repetition_laplace_sum(
                1, 1e-6, w, rep, weight="survival",
                tol=1e-12, nu_max=2**18, tail_correction="none",
            )


class TestExpansionCoefficients:
    def test_c00_is_one(self):
        c = ExpansionCoefficients(3.5, 1.0)
        assert c.c0_of(0) == 1.0

    def test_table_values(self):
        rho = 3.5
        c = ExpansionCoefficients(rho, 2.0)
        z = oracles.zeta_series
        assert c.c0_of(1) == pytest.approx(z(rho - 1) / z(rho), rel=1e-9)
        assert c.d0_0 == pytest.approx(z(rho - 1) / z(rho) - 1.0, rel=1e-9)
        assert c.d1_0 == pytest.approx(
            (z(rho - 2) - z(rho - 1)) / (2 * z(rho)), rel=1e-9
        )
        assert c.ratio_c10_over_c01 == -0.5

    def test_ratio_identity_from_sums(self):
        # finite-difference d j(0;s)/ds at s->0 against c1_0 / (-1/mean_dt)
        rho = 3.5
        w = WaitingTimeModel.exponential(1.3)
        rep = RepetitionDistribution(rho)
        s0 = 1e-5
        j0 = repetition_laplace_sum(0, s0, w, rep).value
        c01 = (j0 - 1.0) / s0
        c10 = rep.zeta_rho_m1 / rep.zeta_rho
        assert c10 / c01 == pytest.approx(-1.0 / w.mean_dt, rel=5e-3)


class TestGaverStehfest:
    def test_weights_sum_to_zero(self):
        # sum of Salzer weights vanishes for every even order
        for order in (8, 10, 12):
            assert np.sum(gaver_stehfest_weights(order)) == pytest.approx(
                0.0, abs=1e-4
            )

    def test_known_pair(self):
        # L[t] = 1/s^2
        assert gaver_stehfest(lambda s: 1.0 / s**2, 7.3, 12) == pytest.approx(
            7.3, rel=1e-3
        )

    def test_classical_renewal(self):
        # nu == 1, exponential(rate), mu1 = 1: m1(t) = rate * t exactly
        w = WaitingTimeModel.exponential(1.7)
        h = IncrementModel.gaussian(1.0, 1.0)
        rep = FixedRepetition(1)
        lm = laplace_moments([0.1, 1.0], w, h, rep)
        # transform equals mu1 * psi/(s(1-psi)) = rate/s^2
        assert np.allclose(lm.m1_tilde, 1.7 / np.asarray([0.1, 1.0]) ** 2, rtol=1e-10)
        curves = invert_laplace(lm, [5.0, 20.0])
        assert np.allclose(curves.m1, 1.7 * np.array([5.0, 20.0]), rtol=1e-4)
        assert np.all(curves.reliable)


class TestLaplaceMoments:
    def test_zero_mean_increments(self):
        w = WaitingTimeModel.exponential(1.0)
        h = IncrementModel.gaussian(0.0, 1.0)
        rep = RepetitionDistribution(3.5)
        lm = laplace_moments([0.01, 0.1, 1.0], w, h, rep)
        assert np.allclose(lm.m1_tilde, 0.0)
        assert np.all(lm.m2_tilde > 0)

    def test_tauberian_drift(self):
        # s^2 m1~(s) -> mu1/<dt> as s -> 0
        w = WaitingTimeModel.exponential(0.5)
        h = IncrementModel.gaussian(1.0, 1.0)
        rep = RepetitionDistribution(3.5)
        s = 1e-6
        lm = laplace_moments([s], w, h, rep)
        assert s**2 * lm.m1_tilde[0] == pytest.approx(1.0 / w.mean_dt, rel=1e-3)

    def test_singular_denominator_reports_range(self):
        w = WaitingTimeModel.exponential(1.0)
        h = IncrementModel.gaussian(1.0, 1.0)
        rep = RepetitionDistribution(3.5)
        with pytest.raises(SingularDenominatorError, match="usable range"):
            laplace_moments([1e-14], w, h, rep)

    def test_non_ergodic_rejected(self):
        w = WaitingTimeModel.exponential(1.0)
        h = IncrementModel.gaussian(1.0, 1.0)
        with pytest.raises(NonErgodicRhoError):
            laplace_moments([0.1], w, h, RepetitionDistribution(1.9))
