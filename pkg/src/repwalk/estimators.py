"""Autocorrelation estimators for event series and log-log slope fits.

Two ACF flavours:

* step ACF -- sample autocovariance of a per-event quantity versus lag in
  events, normalized by its lag-0 value.  Computed per session with FFTs and
  pooled, so sessions are never straddled.
* time ACF -- autocovariance of the aggregated-increment series on a regular
  time grid (width ``grid_dt``), reported on logarithmic lag bins.  For
  magnitudes this is the volatility-clustering curve: window sums inherit
  the event-rate memory, which is where the model's long-range dependence
  lives.  A per-event-pair product estimator carries no signal here at all:
  with increments independent of the times, the expected mark product is the
  same in every lag bin, so only count-weighted aggregation can see the
  memory.

Both keep per-session accumulators so slopes can be bootstrapped by
resampling whole sessions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .series import EventSeries


class ZeroVarianceError(ValueError):
    """The series is constant; the normalized ACF is undefined."""


class FitRangeError(ValueError):
    """The requested fit range has too few usable or positive points."""


@dataclass
class AcfCurve:
    """Estimated autocorrelation on a lag grid.

    `lags` are event counts for kind="step" and seconds (bin centers) for
    kind="time".  Missing bins carry NaN values and zero pair counts and are
    skipped by the slope fit.
    """

    kind: str
    lags: np.ndarray
    values: np.ndarray
    pair_counts: np.ndarray
    normalized: bool = True
    stderr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    # per-session raw autocovariance sums and pair counts, for bootstrap
    _session_raw: list = field(default_factory=list, repr=False)
    _session_counts: list = field(default_factory=list, repr=False)
    # time kind: mapping from internal grid lags to output bins
    _bin_of_lag: np.ndarray | None = field(default=None, repr=False)
    _n_bins: int = field(default=0, repr=False)


def _fft_autocov_raw(y: np.ndarray, max_lag: int) -> np.ndarray:
    """Raw sums sum_i y_i y_{i+n} for n = 0..max_lag (linear, via FFT)."""
    L = len(y)
    H = min(max_lag, L - 1)
    nfft = 1 << int(np.ceil(np.log2(max(2 * L, 2))))
    F = np.fft.rfft(y, nfft)
    out = np.zeros(max_lag + 1)
    out[: H + 1] = np.fft.irfft(F * np.conj(F), nfft)[: H + 1]
    return out


def _pool(raws, counts_list, max_lag):
    raw = np.zeros(max_lag + 1)
    cnt = np.zeros(max_lag + 1)
    for r, c in zip(raws, counts_list):
        raw += r
        cnt += c
    return raw, cnt


def step_acf(values, max_lag: int, session_bounds=None) -> AcfCurve:
    """Normalized sample step autocorrelation at lags 0..max_lag.

    De-meaning uses the global mean across sessions; pairs never straddle a
    session boundary.  Raises :class:`ZeroVarianceError` for a constant
    series.
    """
    x = np.asarray(values, dtype=np.float64)
    if session_bounds is None:
        session_bounds = [(0, len(x))]
    longest = max(hi - lo for lo, hi in session_bounds)
    if longest <= max_lag + 10:
        raise ValueError(
            f"longest session ({longest} events) must exceed max_lag + 10 "
            f"({max_lag + 10})"
        )
    gm = x.mean()
    raws, cnts = [], []
    for lo, hi in session_bounds:
        y = x[lo:hi] - gm
        L = hi - lo
        raws.append(_fft_autocov_raw(y, max_lag))
        cnts.append(np.maximum(L - np.arange(max_lag + 1), 0).astype(np.float64))
    raw, cnt = _pool(raws, cnts, max_lag)
    cov0 = raw[0] / cnt[0]
    if cov0 <= 0 or not np.isfinite(cov0):
        raise ZeroVarianceError("series variance is zero; ACF undefined")
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = (raw / np.maximum(cnt, 1.0)) / cov0
    corr[cnt == 0] = np.nan
    return AcfCurve(
        kind="step",
        lags=np.arange(max_lag + 1),
        values=corr,
        pair_counts=cnt.astype(np.int64),
        _session_raw=raws,
        _session_counts=cnts,
    )


def step_acf_waiting(series: EventSeries, max_lag: int) -> AcfCurve:
    """Step ACF of the waiting times of an event series."""
    return step_acf(series.waiting_times(), max_lag, series.session_bounds)


def log_bin_edges(lo: float, hi: float, per_decade: int = 12) -> np.ndarray:
    """Logarithmically spaced bin edges covering [lo, hi]."""
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    n = max(2, int(np.ceil(np.log10(hi / lo) * per_decade)) + 1)
    return np.geomspace(lo, hi, n)


def _aggregate_windows(series: EventSeries, grid_dt: float):
    """Per-session sums of increments over consecutive windows of grid_dt."""
    out = []
    for k, (lo, hi) in enumerate(series.session_bounds):
        t = series.times[lo:hi]
        start = series.session_starts[k]
        span = t[-1] - start
        n_win = int(np.floor(span / grid_dt))
        if n_win < 2:
            continue
        pref = np.concatenate([[0.0], np.cumsum(series.increments[lo:hi])])
        edges = start + np.arange(n_win + 1) * grid_dt
        idx = np.searchsorted(t, edges, side="right")
        out.append(pref[idx[1:]] - pref[idx[:-1]])
    if not out:
        raise ValueError("no session spans at least two grid windows")
    return out


def time_acf(
    series: EventSeries,
    bin_edges=None,
    grid_dt: float | None = None,
    signed: bool = False,
    per_decade: int = 12,
) -> AcfCurve:
    """Time-lag autocorrelation of |aggregated increments| (or signed sums).

    Increments are summed over consecutive windows of width `grid_dt`
    (default: the series' mean waiting time); the window-series ACF is then
    averaged onto logarithmic lag bins `bin_edges` (default: 12 per decade
    from grid_dt to 1000 grid steps), weighted by pair counts.  Empty bins
    are flagged NaN with zero counts.
    """
    if grid_dt is None:
        grid_dt = float(series.waiting_times().mean())
    if grid_dt <= 0:
        raise ValueError("grid_dt must be positive")
    if bin_edges is None:
        bin_edges = log_bin_edges(grid_dt, 1000.0 * grid_dt, per_decade)
    bin_edges = np.asarray(bin_edges, dtype=np.float64)
    if bin_edges[0] <= 0 or np.any(np.diff(bin_edges) <= 0):
        raise ValueError("bin edges must be positive and increasing")

    windows = _aggregate_windows(series, grid_dt)
    agg = [w if signed else np.abs(w) for w in windows]
    total = np.concatenate(agg)
    gm = total.mean()
    max_lag = int(np.ceil(bin_edges[-1] / grid_dt))
    raws, cnts = [], []
    for a in agg:
        y = a - gm
        raws.append(_fft_autocov_raw(y, max_lag))
        cnts.append(np.maximum(len(a) - np.arange(max_lag + 1), 0).astype(np.float64))
    raw, cnt = _pool(raws, cnts, max_lag)
    cov0 = raw[0] / cnt[0]
    if cov0 <= 0 or not np.isfinite(cov0):
        raise ZeroVarianceError("aggregated series has zero variance")

    # grid lag h corresponds to a time lag of h * grid_dt
    tau = np.arange(max_lag + 1) * grid_dt
    bin_of = np.searchsorted(bin_edges, tau, side="right") - 1
    bin_of[(tau < bin_edges[0]) | (tau >= bin_edges[-1])] = -1
    bin_of[0] = -1  # lag zero never enters a bin

    n_bins = len(bin_edges) - 1
    centers = np.sqrt(bin_edges[:-1] * bin_edges[1:])
    values, counts = _bin_curve(raw, cnt, cov0, bin_of, n_bins)
    return AcfCurve(
        kind="time",
        lags=centers,
        values=values,
        pair_counts=counts,
        meta={"grid_dt": grid_dt, "bin_edges": bin_edges, "signed": signed},
        _session_raw=raws,
        _session_counts=cnts,
        _bin_of_lag=bin_of,
        _n_bins=n_bins,
    )


def time_acf_abs(series: EventSeries, bin_edges=None, grid_dt=None, per_decade=12):
    """Volatility-clustering curve: time ACF of absolute increments."""
    return time_acf(series, bin_edges, grid_dt, signed=False, per_decade=per_decade)


def _bin_curve(raw, cnt, cov0, bin_of, n_bins):
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = (raw / np.maximum(cnt, 1.0)) / cov0
    values = np.full(n_bins, np.nan)
    counts = np.zeros(n_bins, dtype=np.int64)
    valid = bin_of >= 0
    if valid.any():
        wsum = np.bincount(bin_of[valid], weights=cnt[valid], minlength=n_bins)
        vsum = np.bincount(
            bin_of[valid], weights=cnt[valid] * corr[valid], minlength=n_bins
        )
        nz = wsum > 0
        values[nz] = vsum[nz] / wsum[nz]
        counts = wsum.astype(np.int64)
    return values, counts


def session_scatter_stderr(curve: AcfCurve) -> np.ndarray:
    """Per-lag standard error from the scatter of per-session estimates.

    Requires at least two sessions; lags missing in a session are skipped.
    """
    S = len(curve._session_raw)
    if S < 2:
        raise ValueError("need >= 2 sessions for a scatter-based stderr")
    raw_all, cnt_all = _pool(curve._session_raw, curve._session_counts, len(curve._session_raw[0]) - 1)
    cov0 = raw_all[0] / cnt_all[0]
    per = []
    for r, c in zip(curve._session_raw, curve._session_counts):
        with np.errstate(invalid="ignore", divide="ignore"):
            per.append(np.where(c > 0, (r / np.maximum(c, 1.0)) / cov0, np.nan))
    per = np.vstack(per)
    n_ok = np.sum(np.isfinite(per), axis=0)
    sd = np.nanstd(per, axis=0, ddof=1)
    se_grid = np.where(n_ok >= 2, sd / np.sqrt(np.maximum(n_ok, 1)), np.nan)
    if curve.kind == "step":
        return se_grid[: len(curve.lags)]
    # map grid-lag errors onto bins (count-weighted, errors combined in quadrature)
    bin_of = curve._bin_of_lag
    n_bins = curve._n_bins
    valid = (bin_of >= 0) & np.isfinite(se_grid)
    wsum = np.bincount(bin_of[valid], weights=cnt_all[valid], minlength=n_bins)
    esum = np.bincount(
        bin_of[valid], weights=(cnt_all[valid] * se_grid[valid]) ** 2, minlength=n_bins
    )
    out = np.full(n_bins, np.nan)
    nz = wsum > 0
    out[nz] = np.sqrt(esum[nz]) / wsum[nz]
    return out


@dataclass
class SlopeFit:
    slope: float
    stderr: float
    fit_range: tuple[float, float]
    r_squared: float
    method: str
    n_points: int
    intercept: float
    stderr_ols: float
    stderr_bootstrap: float | None = None


def _ols_loglog(lags, values, lag_min, lag_max):
    in_range = (lags >= lag_min) & (lags <= lag_max)
    usable = in_range & np.isfinite(values)
    if np.any(usable & (values <= 0)):
        bad = lags[usable & (values <= 0)]
        raise FitRangeError(
            f"ACF is non-positive at lag(s) {bad[:5]} inside "
            f"[{lag_min}, {lag_max}]; narrow the fit range"
        )
    n = int(usable.sum())
    if n < 5:
        raise FitRangeError(
            f"only {n} usable points in [{lag_min}, {lag_max}]; need >= 5"
        )
    lx = np.log(lags[usable])
    ly = np.log(values[usable])
    sxx = np.sum((lx - lx.mean()) ** 2)
    slope = np.sum((lx - lx.mean()) * (ly - ly.mean())) / sxx
    intercept = ly.mean() - slope * lx.mean()
    resid = ly - slope * lx - intercept
    dof = max(n - 2, 1)
    stderr = float(np.sqrt(resid @ resid / dof / sxx))
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - float(resid @ resid / ss_tot) if ss_tot > 0 else 1.0
    return float(slope), float(intercept), stderr, r2, n


def fit_slope(
    curve: AcfCurve,
    lag_min: float,
    lag_max: float,
    bootstrap: int = 0,
    seed: int = 0,
) -> SlopeFit:
    """OLS power-law fit of log(value) against log(lag) over [lag_min, lag_max].

    Missing bins are skipped; non-positive values inside the range raise
    :class:`FitRangeError`.  With ``bootstrap > 0`` the stderr additionally
    comes from resampling whole sessions with replacement (the honest error
    for long-memory data; the OLS residual error is also reported).
    """
    if lag_min >= lag_max:
        raise ValueError("lag_min must be below lag_max")
    lags = np.asarray(curve.lags, dtype=np.float64)
    pos = lags > 0
    slope, intercept, se_ols, r2, n = _ols_loglog(
        lags[pos], np.asarray(curve.values, dtype=np.float64)[pos], lag_min, lag_max
    )
    se_boot = None
    if bootstrap > 0:
        S = len(curve._session_raw)
        if S < 2:
            raise ValueError("session bootstrap needs >= 2 sessions")
        rng = np.random.default_rng(seed)
        max_lag = len(curve._session_raw[0]) - 1
        raws = np.vstack(curve._session_raw)
        cnts = np.vstack(curve._session_counts)
        reps = []
        for _ in range(bootstrap):
            pick = rng.integers(0, S, S)
            raw = raws[pick].sum(axis=0)
            cnt = cnts[pick].sum(axis=0)
            cov0 = raw[0] / cnt[0]
            if cov0 <= 0:
                continue
            if curve.kind == "step":
                with np.errstate(invalid="ignore", divide="ignore"):
                    vals = (raw / np.maximum(cnt, 1.0)) / cov0
                vals[cnt == 0] = np.nan
                rep_lags = np.arange(max_lag + 1, dtype=np.float64)
            else:
                vals, _ = _bin_curve(raw, cnt, cov0, curve._bin_of_lag, curve._n_bins)
                rep_lags = lags
            try:
                s, *_ = _ols_loglog(
                    rep_lags[rep_lags > 0], vals[rep_lags > 0], lag_min, lag_max
                )
            except FitRangeError:
                continue
            reps.append(s)
        if len(reps) >= max(8, bootstrap // 4):
            se_boot = float(np.std(reps, ddof=1))
    return SlopeFit(
        slope=slope,
        stderr=se_boot if se_boot is not None else se_ols,
        fit_range=(float(lag_min), float(lag_max)),
        r_squared=r2,
        method="bootstrap" if se_boot is not None else "ols_loglog",
        n_points=n,
        intercept=intercept,
        stderr_ols=se_ols,
        stderr_bootstrap=se_boot,
    )


def curve_report(curve: AcfCurve, fit: SlopeFit | None = None) -> dict:
    """Compact JSON-ready summary of a curve and optional fit."""
    rep = {
        "kind": curve.kind,
        "lags": [float(v) for v in curve.lags],
        "values": [None if not np.isfinite(v) else float(v) for v in curve.values],
        "counts": [int(c) for c in curve.pair_counts],
    }
    if fit is not None:
        rep.update(
            slope=fit.slope,
            stderr=fit.stderr,
            stderr_ols=fit.stderr_ols,
            stderr_bootstrap=fit.stderr_bootstrap,
            range=list(fit.fit_range),
            r_squared=fit.r_squared,
            n_points=fit.n_points,
            method=fit.method,
        )
    return rep
