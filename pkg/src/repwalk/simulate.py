"""Trajectory generation and Monte Carlo ensembles.

Waiting times come out in blocks of repeated identical values; block lengths
follow the repetition law, block values the waiting-time law, and the two are
independent.  With ``stationary_start`` the first block is the residual of a
block in progress, which makes the waiting-time sequence stationary from the
first event (the right convention for autocorrelation work).  Moment
ensembles are measured on the fresh-start process, the one the closed-form
moment machinery describes; the stationary start has heavy-tailed
time-aggregates for rho < 3 and is not suitable for moments.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .distributions import IncrementModel, WaitingTimeModel
from .series import EventSeries


class HorizonError(ValueError):
    """A requested sample time exceeds the simulated horizon."""


@dataclass(frozen=True)
class SimConfig:
    repetition: object
    waiting: WaitingTimeModel
    increment: IncrementModel
    n_events: int
    n_trajectories: int = 1
    seed: int = 0
    stationary_start: bool = True

    def __post_init__(self):
        if self.n_events < 1:
            raise ValueError("n_events must be >= 1")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")


def _stream(seed: int, domain: int, index: int) -> np.random.Generator:
    # Documented splitting rule: every independent stream is
    # default_rng(SeedSequence(seed, spawn_key=(domain, index))).
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(domain, index)))


def generate_waiting_sequence(
    cfg: SimConfig,
    rng: np.random.Generator,
    n_events: int | None = None,
    horizon: float | None = None,
) -> np.ndarray:
    """Emit the waiting-time sequence dt_1..dt_N.

    Blocks of identical values have i.i.d. lengths from ``cfg.repetition``
    and i.i.d. values from ``cfg.waiting``; the final block is truncated at
    ``n_events``.  If `horizon` is given, generation stops early once the
    cumulative time passes it (the remaining events cannot influence any
    statistic evaluated at or before the horizon).
    """
    n = int(n_events if n_events is not None else cfg.n_events)
    rep, wait = cfg.repetition, cfg.waiting
    mean_len = rep.mean if np.isfinite(rep.mean) else 1.0

    lens_parts: list[np.ndarray] = []
    vals_parts: list[np.ndarray] = []
    total_events = 0
    total_time = 0.0
    first = cfg.stationary_start

    while total_events < n and (horizon is None or total_time <= horizon):
        if first:
            lens = np.array([rep.sample_stationary_remaining(rng)], dtype=np.int64)
            first = False
        else:
            remaining = n - total_events
            if horizon is not None:
                remaining = min(
                    remaining, int((horizon - total_time) / wait.mean_dt) + 64
                )
            n_blocks = max(16, int(remaining / mean_len * 1.15) + 8)
            lens = np.asarray(rep.sample(rng, n_blocks), dtype=np.int64)
        vals = wait.sample(rng, len(lens))
        lens_parts.append(lens)
        vals_parts.append(vals)
        total_events += int(lens.sum())
        total_time += float((lens * vals).sum())

    lens = np.concatenate(lens_parts)
    vals = np.concatenate(vals_parts)
    cum = np.cumsum(lens)
    if cum[-1] > n:
        nb = int(np.searchsorted(cum, n, side="left")) + 1
        lens = lens[:nb].copy()
        lens[-1] -= cum[nb - 1] - n
        vals = vals[:nb]
    return np.repeat(vals, lens)


def generate_trajectory(
    cfg: SimConfig,
    rng: np.random.Generator | None = None,
    horizon: float | None = None,
) -> EventSeries:
    """One trajectory as a single-session event series starting at t=0.

    Increments are i.i.d. from ``cfg.increment`` and independent of the
    waiting times; times are the cumulative sums of the waiting sequence.
    """
    if rng is None:
        rng = _stream(cfg.seed, 0, 0)
    dt = generate_waiting_sequence(cfg, rng, horizon=horizon)
    dx = cfg.increment.sample(rng, len(dt))
    return EventSeries.from_sessions([dt], [dx])


def simulate_series(cfg: SimConfig) -> EventSeries:
    """``cfg.n_trajectories`` independent trajectories packed as the sessions
    of one event series (per-session streams derived from ``cfg.seed``)."""
    dts, dxs = [], []
    for k in range(cfg.n_trajectories):
        rng = _stream(cfg.seed, 0, k)
        dt = generate_waiting_sequence(cfg, rng)
        dts.append(dt)
        dxs.append(cfg.increment.sample(rng, len(dt)))
    return EventSeries.from_sessions(dts, dxs)


def value_at(times: np.ndarray, x: np.ndarray, sample_times: np.ndarray) -> np.ndarray:
    """Right-continuous step interpolation: value after the last jump at or
    before each sample time, 0 before the first event."""
    idx = np.searchsorted(times, sample_times, side="right") - 1
    return np.where(idx >= 0, x[np.maximum(idx, 0)], 0.0)


@dataclass
class MomentTable:
    """Ensemble moments of x(t) with standard errors."""

    sample_times: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    variance: np.ndarray
    se_m1: np.ndarray
    se_m2: np.ndarray
    se_variance: np.ndarray
    n_trajectories: int


# module-level worker state, set once per pool worker
_WORKER: dict = {}


def _init_worker(cfg, sample_times, horizon):
    _WORKER["cfg"] = cfg
    _WORKER["ts"] = sample_times
    _WORKER["horizon"] = horizon


def _moment_chunk(args):
    lo, hi = args
    cfg, ts, horizon = _WORKER["cfg"], _WORKER["ts"], _WORKER["horizon"]
    return _accumulate_chunk(cfg, ts, horizon, lo, hi)


def _accumulate_chunk(cfg, ts, horizon, lo, hi):
    sums = np.zeros((4, len(ts)))
    for k in range(lo, hi):
        rng = _stream(cfg.seed, 0, k)
        dt = generate_waiting_sequence(cfg, rng, horizon=horizon)
        times = np.cumsum(dt)
        if times[-1] < horizon:
            raise HorizonError(
                f"trajectory {k} covers only t <= {times[-1]:.6g}; a sample "
                f"time up to {horizon:.6g} was requested. Increase n_events."
            )
        x = np.cumsum(cfg.increment.sample(rng, len(dt)))
        xt = value_at(times, x, ts)
        sums[0] += xt
        sums[1] += xt * xt
        sums[2] += xt**3
        sums[3] += xt**4
    return sums


_CHUNK = 128  # trajectories per task; fixed so results never depend on workers


def ensemble_moments(
    cfg: SimConfig,
    sample_times,
    workers: int = 1,
) -> MomentTable:
    """Monte Carlo first/second moments and variance of x(t).

    Trajectories are independent; each draws its stream from the root seed by
    index, chunks are reduced in index order, so the result is bit-identical
    for any worker count.  Raises :class:`HorizonError` when a trajectory
    ends before the largest sample time.
    """
    ts = np.asarray(sample_times, dtype=np.float64)
    if ts.ndim != 1 or len(ts) == 0:
        raise ValueError("sample_times must be a non-empty 1-d array")
    if np.any(np.diff(ts) <= 0):
        raise ValueError("sample_times must be strictly increasing")
    horizon = float(ts[-1])

    n = cfg.n_trajectories
    chunks = [(lo, min(lo + _CHUNK, n)) for lo in range(0, n, _CHUNK)]
    if workers <= 1 or len(chunks) == 1:
        parts = [_accumulate_chunk(cfg, ts, horizon, lo, hi) for lo, hi in chunks]
    else:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(cfg, ts, horizon),
        ) as pool:
            parts = list(pool.map(_moment_chunk, chunks))

    total = np.zeros((4, len(ts)))
    for p in parts:  # fixed order: chunk index ascending
        total += p
    s1, s2, s3, s4 = total
    m1 = s1 / n
    m2 = s2 / n
    var = m2 - m1**2
    se_m1 = np.sqrt(np.maximum(var, 0.0) / n)
    se_m2 = np.sqrt(np.maximum(s4 / n - m2**2, 0.0) / n)
    # delta method for the variance: central fourth moment minus var^2
    m3 = s3 / n
    m4c = s4 / n - 4 * m1 * m3 + 6 * m1**2 * m2 - 3 * m1**4
    se_var = np.sqrt(np.maximum(m4c - var**2, 0.0) / n)
    return MomentTable(ts, m1, m2, var, se_m1, se_m2, se_var, n)


def default_workers() -> int:
    env = os.environ.get("REPWALK_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, (os.cpu_count() or 1))
