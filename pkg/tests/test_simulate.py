import numpy as np
import pytest
from scipy import stats

from repwalk import (
    FixedRepetition,
    HorizonError,
    IncrementModel,
    RepetitionDistribution,
    SimConfig,
    WaitingTimeModel,
    ensemble_moments,
    generate_trajectory,
    generate_waiting_sequence,
    simulate_series,
    step_acf,
    session_scatter_stderr,
)


def cfg_for(rho=3.5, rate=1.0, n_events=100_000, seed=0, stationary=True, **kw):
    rep = FixedRepetition(1) if rho is None else RepetitionDistribution(rho)
    return SimConfig(
        repetition=rep,
        waiting=WaitingTimeModel.exponential(rate),
        increment=kw.pop("increment", IncrementModel.gaussian(0, 1)),
        n_events=n_events,
        seed=seed,
        stationary_start=stationary,
        **kw,
    )


def block_lengths(dt):
    changes = np.nonzero(np.diff(dt) != 0)[0]
    starts = np.concatenate([[0], changes + 1])
    ends = np.concatenate([changes + 1, [len(dt)]])
    return ends - starts


class TestWaitingSequence:
    def test_no_memory_limit(self):
        cfg = cfg_for(rho=None, n_events=200_000)
        rng = np.random.default_rng(0)
        dt = generate_waiting_sequence(cfg, rng)
        curve = step_acf(dt, 50)
        n_pairs = len(dt) - np.arange(1, 51)
        assert np.all(np.abs(curve.values[1:]) < 4.0 / np.sqrt(n_pairs))

    def test_marginal_mean_preserved(self):
        cfg = cfg_for(rho=3.5, rate=2.0, n_events=1_000_000)
        dt = generate_waiting_sequence(cfg, np.random.default_rng(1))
        assert dt.mean() == pytest.approx(0.5, rel=0.01)

    def test_block_values_are_iid_psi(self):
        # block values (one per block) are exactly i.i.d. waiting-time draws
        cfg = cfg_for(rho=3.5, n_events=1_000_000)
        dt = generate_waiting_sequence(cfg, np.random.default_rng(2))
        changes = np.nonzero(np.diff(dt) != 0)[0]
        starts = np.concatenate([[0], changes + 1])
        vals = dt[starts]
        # skip the first (stationary residual) block value: same law anyway
        res = stats.kstest(vals[1:], "expon")
        assert res.pvalue > 0.001

    def test_block_length_histogram(self):
        cfg = cfg_for(rho=3.5, n_events=1_000_000)
        dt = generate_waiting_sequence(cfg, np.random.default_rng(3))
        lens = block_lengths(dt)[1:-1]  # drop stationary first, truncated last
        rep = cfg.repetition
        kmax = 20
        counts = np.bincount(np.minimum(lens, kmax + 1), minlength=kmax + 2)[1:]
        probs = np.concatenate(
            [rep.pmf(np.arange(1, kmax + 1)), [rep.survival(kmax + 1)]]
        )
        res = stats.chisquare(counts, probs * len(lens))
        assert res.pvalue > 0.001

    def test_exact_event_count(self):
        cfg = cfg_for(n_events=12345)
        dt = generate_waiting_sequence(cfg, np.random.default_rng(4))
        assert len(dt) == 12345
        assert np.all(dt > 0)

    def test_horizon_early_stop(self):
        cfg = cfg_for(n_events=1_000_000)
        dt = generate_waiting_sequence(cfg, np.random.default_rng(5), horizon=50.0)
        assert dt.sum() > 50.0
        assert len(dt) < 5_000  # far fewer than n_events


class TestStepAutocovariance:
    @pytest.mark.parametrize("rho", [2.5, 3.5])
    def test_matches_sojourn_theory(self, rho):
        n_sess, n_ev = 20, 100_000
        cfg = SimConfig(
            repetition=RepetitionDistribution(rho),
            waiting=WaitingTimeModel.exponential(1.0),
            increment=IncrementModel.gaussian(0, 1),
            n_events=n_ev,
            n_trajectories=n_sess,
            seed=99,
        )
        series = simulate_series(cfg)
        curve = step_acf(series.waiting_times(), 100, series.session_bounds)
        se = session_scatter_stderr(curve)
        theory = cfg.repetition.stationary_sojourn(np.arange(101))
        z = (curve.values[1:] - theory[1:]) / se[1:]
        assert np.nanmax(np.abs(z)) < 3.0

    def test_independence_of_marks_and_times(self):
        cfg = cfg_for(rho=2.5, n_events=500_000,
                      increment=IncrementModel.gaussian(0.0, 1.0))
        series = generate_trajectory(cfg)
        dt = series.waiting_times()
        dx = series.increments
        n = len(dx)
        r1 = np.corrcoef(dx, dt)[0, 1]
        r2 = np.corrcoef(dx[:-1], dx[1:])[0, 1]
        assert abs(r1) < 3.0 / np.sqrt(n)
        assert abs(r2) < 3.0 / np.sqrt(n)


class TestTrajectory:
    def test_single_event(self):
        cfg = cfg_for(n_events=1)
        tr = generate_trajectory(cfg)
        assert len(tr) == 1
        assert tr.times[0] == pytest.approx(tr.waiting_times()[0])

    def test_reject_zero_events(self):
        with pytest.raises(ValueError):
            cfg_for(n_events=0)

    def test_reproducible(self):
        a = generate_trajectory(cfg_for(seed=7, n_events=5000))
        b = generate_trajectory(cfg_for(seed=7, n_events=5000))
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.increments, b.increments)

    def test_sessions_are_independent_streams(self):
        cfg = cfg_for(seed=7, n_events=2000, n_trajectories=3)
        series = simulate_series(cfg)
        a, b = series.session_values(series.increments)[:2]
        assert not np.array_equal(a[:100], b[:100])

    def test_symmetric_increment_mean(self):
        cfg = SimConfig(
            repetition=RepetitionDistribution(3.5),
            waiting=WaitingTimeModel.exponential(1.0),
            increment=IncrementModel.gaussian(0, 1),
            n_events=400,
            n_trajectories=3000,
            seed=21,
            stationary_start=False,
        )
        table = ensemble_moments(cfg, [200.0])
        assert abs(table.m1[0]) < 3.0 * table.se_m1[0]

    def test_drift_rate(self):
        # mean of x(T)/T -> mu1/<dt> at large T
        mu1 = np.sqrt(2 / np.pi)
        cfg = SimConfig(
            repetition=RepetitionDistribution(3.5),
            waiting=WaitingTimeModel.exponential(1.0),
            increment=IncrementModel.gaussian(0, 1, half_rectified=True),
            n_events=3000,
            n_trajectories=4000,
            seed=22,
            stationary_start=False,
        )
        T = 1500.0
        table = ensemble_moments(cfg, [T])
        assert table.m1[0] / T == pytest.approx(mu1, rel=0.02)


class TestEnsembleMoments:
    def test_poisson_normal_diffusion(self):
        # nu == 1, exponential psi, gaussian(0, sigma): var(t) = sigma^2 t rate
        sigma = 0.7
        cfg = SimConfig(
            repetition=FixedRepetition(1),
            waiting=WaitingTimeModel.exponential(2.0),
            increment=IncrementModel.gaussian(0, sigma),
            n_events=3000,
            n_trajectories=6000,
            seed=31,
            stationary_start=False,
        )
        ts = np.array([50.0, 200.0, 1000.0])
        table = ensemble_moments(cfg, ts)
        expect = sigma**2 * 2.0 * ts
        assert np.allclose(table.variance, expect, rtol=0.03)

    def test_horizon_error_lists_horizon(self):
        cfg = cfg_for(n_events=10, n_trajectories=2)
        with pytest.raises(HorizonError, match="n_events"):
            ensemble_moments(cfg, [1e6])

    def test_bad_sample_times(self):
        cfg = cfg_for(n_events=100)
        with pytest.raises(ValueError):
            ensemble_moments(cfg, [3.0, 2.0])

    def test_worker_count_invariance(self):
        cfg = SimConfig(
            repetition=RepetitionDistribution(2.8),
            waiting=WaitingTimeModel.exponential(1.0),
            increment=IncrementModel.gaussian(0.2, 1.0),
            n_events=500,
            n_trajectories=300,
            seed=5,
            stationary_start=False,
        )
        ts = [10.0, 100.0]
        t1 = ensemble_moments(cfg, ts, workers=1)
        t2 = ensemble_moments(cfg, ts, workers=2)
        assert np.array_equal(t1.m1, t2.m1)
        assert np.array_equal(t1.m2, t2.m2)
        assert np.array_equal(t1.se_variance, t2.se_variance)
