"""Tick ingestion, intraday stationarization, session joining and surrogates.

Sessions are clock windows on calendar days; overnight gaps never produce an
event.  The first tick of a session is the price/time reference, so a session
of m ticks yields m-1 events.  Stationarization divides each waiting time by
the seasonal mean for its (weekday, time-of-day) bin, the standard cure for
the intraday activity pattern; shuffling surrogates permute waiting times
and/or increments within sessions, preserving both marginal distributions
exactly while destroying the targeted dependence.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .series import EventSeries

_DAY = 86400.0
# epoch day 0 (1970-01-01) was a Thursday; Monday == 0
_EPOCH_WEEKDAY_OFFSET = 3


def weekday_of(timestamp: float) -> int:
    return int(np.floor(timestamp / _DAY) + _EPOCH_WEEKDAY_OFFSET) % 7


@dataclass(frozen=True)
class SessionRules:
    """Trading-session clock window, e.g. 09:00-17:00."""

    open_time: str = "09:00"
    close_time: str = "17:00"

    def _seconds(self, hhmm: str) -> float:
        h, m = hhmm.split(":")
        return 3600.0 * int(h) + 60.0 * int(m)

    @property
    def open_seconds(self) -> float:
        return self._seconds(self.open_time)

    @property
    def close_seconds(self) -> float:
        s = self._seconds(self.close_time)
        if s <= self.open_seconds:
            raise ValueError("session close must be after open")
        return s

    def contains(self, ts: np.ndarray) -> np.ndarray:
        tod = np.mod(ts, _DAY)
        return (tod >= self.open_seconds) & (tod <= self.close_seconds)


def _parse_timestamp(token: str) -> float:
    try:
        return float(token)
    except ValueError:
        pass
    ts = np.datetime64(token)
    return float((ts - np.datetime64("1970-01-01T00:00:00")) / np.timedelta64(1, "s"))


def ingest_ticks(path, rules: SessionRules | None = None) -> EventSeries:
    """Read a `timestamp,price` CSV into an event series of log-returns.

    Timestamps may be epoch seconds or ISO-8601 (auto-detected).  Records
    outside the session window or with non-positive prices are dropped and
    counted; simultaneous ticks are merged into one event with the summed
    log-return.  Non-monotonic timestamps within a session are a hard error.
    """
    rules = rules or SessionRules()
    ts_list: list[float] = []
    px_list: list[float] = []
    line_nos: list[int] = []
    rejected_price = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.lower().replace(" ", "") == "timestamp,price":
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'timestamp,price'")
            t = _parse_timestamp(parts[0])
            p = float(parts[1])
            if p <= 0:
                rejected_price += 1
                continue
            ts_list.append(t)
            px_list.append(p)
            line_nos.append(lineno)
    if not ts_list:
        raise ValueError(f"{path}: no usable ticks")

    ts = np.asarray(ts_list)
    px = np.asarray(px_list)
    lines = np.asarray(line_nos)
    in_win = rules.contains(ts)
    dropped_window = int(np.sum(~in_win))
    ts, px, lines = ts[in_win], px[in_win], lines[in_win]
    if len(ts) == 0:
        raise ValueError(f"{path}: no ticks inside the session window")

    day = np.floor(ts / _DAY).astype(np.int64)
    merged_ties = 0
    dropped_sessions = 0
    session_dts, session_dxs, session_starts = [], [], []
    boundaries = np.nonzero(np.diff(day) != 0)[0] + 1
    for lo, hi in zip(
        np.concatenate([[0], boundaries]), np.concatenate([boundaries, [len(ts)]])
    ):
        t_sess, p_sess, l_sess = ts[lo:hi], px[lo:hi], lines[lo:hi]
        deltas = np.diff(t_sess)
        if np.any(deltas < 0):
            bad = int(l_sess[1:][deltas < 0][0])
            raise ValueError(f"{path}:{bad}: timestamps go backwards within a session")
        # merge simultaneous ticks: keep the last price per unique timestamp
        keep = np.concatenate([deltas > 0, [True]])
        merged_ties += int(np.sum(~keep))
        t_u, p_u = t_sess[keep], p_sess[keep]
        if len(t_u) < 2:
            dropped_sessions += 1
            continue
        session_starts.append(t_u[0])
        session_dts.append(np.diff(t_u))
        session_dxs.append(np.diff(np.log(p_u)))
    if not session_dts:
        raise ValueError(f"{path}: no session produced any event")

    series = EventSeries.from_sessions(session_dts, session_dxs, session_starts)
    series.meta.update(
        rejected_prices=rejected_price,
        merged_ties=merged_ties,
        dropped_out_of_window=dropped_window,
        dropped_sessions=dropped_sessions,
        source=str(path),
    )
    return series


# ---------------------------------------------------------------------------
# intraday seasonality
# ---------------------------------------------------------------------------


@dataclass
class SeasonalProfile:
    """Mean waiting time per (weekday, time-of-day bin).

    Bins with zero counts are undefined (NaN) and get imputed by linear
    interpolation along the day when the profile is applied.
    """

    bin_width: float
    means: np.ndarray  # (7, n_bins), NaN where undefined
    counts: np.ndarray  # (7, n_bins)

    @property
    def n_bins(self) -> int:
        return self.means.shape[1]

    def defined_weekdays(self) -> list[int]:
        return [w for w in range(7) if np.any(self.counts[w] > 0)]

    def imputed_means(self, weekday: int) -> np.ndarray:
        row = self.means[weekday]
        ok = np.isfinite(row)
        if not ok.any():
            raise ValueError(f"profile has no data for weekday {weekday}")
        if ok.all():
            return row
        idx = np.arange(self.n_bins)
        return np.interp(idx, idx[ok], row[ok])

    def save_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"# bin_width={self.bin_width:.17g}\n")
            fh.write("weekday,bin_start_seconds,mean_dt,count\n")
            for w in range(7):
                for b in range(self.n_bins):
                    m = self.means[w, b]
                    fh.write(
                        f"{w},{b * self.bin_width:.17g},"
                        f"{m if np.isfinite(m) else float('nan'):.17g},"
                        f"{int(self.counts[w, b])}\n"
                    )

    @classmethod
    def load_csv(cls, path) -> "SeasonalProfile":
        with open(path) as fh:
            first = fh.readline().strip()
        if not first.startswith("# bin_width="):
            raise ValueError(f"{path}: missing bin_width header")
        bin_width = float(first.split("=", 1)[1])
        rows = np.atleast_2d(np.genfromtxt(path, delimiter=",", skip_header=2))
        n_bins = int(round(rows[:, 1].max() / bin_width)) + 1
        means = np.full((7, n_bins), np.nan)
        counts = np.zeros((7, n_bins), dtype=np.int64)
        for w, start, m, c in rows:
            b = int(round(start / bin_width))
            means[int(w), b] = m
            counts[int(w), b] = int(c)
        return cls(bin_width, means, counts)


def build_seasonal_profile(series: EventSeries, bin_width: float = 300.0) -> SeasonalProfile:
    """Mean waiting time by weekday and time elapsed since session start.

    Each waiting interval is assigned to the bin of the event that ends it.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    spans = [
        series.times[hi - 1] - series.session_starts[k]
        for k, (lo, hi) in enumerate(series.session_bounds)
    ]
    n_bins = max(1, int(np.ceil(max(spans) / bin_width)))
    sums = np.zeros((7, n_bins))
    counts = np.zeros((7, n_bins), dtype=np.int64)
    dts = series.waiting_times()
    for k, (lo, hi) in enumerate(series.session_bounds):
        w = weekday_of(series.session_starts[k])
        elapsed = series.times[lo:hi] - series.session_starts[k]
        b = np.minimum((elapsed / bin_width).astype(np.int64), n_bins - 1)
        sums[w] += np.bincount(b, weights=dts[lo:hi], minlength=n_bins)
        counts[w] += np.bincount(b, minlength=n_bins)
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return SeasonalProfile(float(bin_width), means, counts)


def stationarize(series: EventSeries, profile: SeasonalProfile) -> EventSeries:
    """Divide every waiting time by its seasonal bin mean.

    Increments are untouched; event order and counts are preserved; times are
    rebuilt from the rescaled waiting times.  The result is dimensionless
    with mean waiting time near 1.
    """
    dts = series.waiting_times()
    new_dts, new_dxs, starts = [], [], []
    for k, (lo, hi) in enumerate(series.session_bounds):
        w = weekday_of(series.session_starts[k])
        factors = profile.imputed_means(w)
        elapsed = series.times[lo:hi] - series.session_starts[k]
        b = np.minimum((elapsed / profile.bin_width).astype(np.int64), profile.n_bins - 1)
        new_dts.append(dts[lo:hi] / factors[b])
        new_dxs.append(series.increments[lo:hi].copy())
        starts.append(series.session_starts[k])
    out = EventSeries.from_sessions(new_dts, new_dxs, starts, stationarized=True)
    out.meta = dict(series.meta)
    return out


def join_sessions(series: EventSeries) -> EventSeries:
    """Concatenate all sessions into one, dropping inter-session gaps.

    The joined waiting-time sequence is exactly the concatenation of the
    per-session sequences; no artificial gap is inserted.
    """
    if not series.stationarized:
        warnings.warn(
            "joining sessions that were not stationarized; intraday "
            "seasonality will leak into long-lag statistics",
            stacklevel=2,
        )
    dts = series.waiting_times()
    out = EventSeries.from_sessions(
        [dts], [series.increments.copy()], [0.0], stationarized=series.stationarized
    )
    out.meta = dict(series.meta)
    return out


# ---------------------------------------------------------------------------
# shuffling surrogates
# ---------------------------------------------------------------------------


class SurrogateKind(enum.Enum):
    ORIGINAL = "original"
    SHUFFLE_DT = "shuffle_dt"
    SHUFFLE_DX = "shuffle_dx"
    SHUFFLE_BOTH = "shuffle_both"


def make_surrogate(series: EventSeries, kind: SurrogateKind, seed: int = 0) -> EventSeries:
    """Within-session permutation surrogate.

    `shuffle_dt` permutes waiting times only, `shuffle_dx` increments only,
    `shuffle_both` permutes each independently; `original` returns an
    identical copy.  Marginal distributions are preserved exactly (the
    multisets are untouched); permutations run per session so session
    boundaries stay meaningful.
    """
    if isinstance(kind, str):
        kind = SurrogateKind(kind)
    if kind is SurrogateKind.ORIGINAL:
        return series.copy()
    dts = series.waiting_times()
    new_dts, new_dxs, starts = [], [], []
    for k, (lo, hi) in enumerate(series.session_bounds):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2, k)))
        dt = dts[lo:hi].copy()
        dx = series.increments[lo:hi].copy()
        if kind in (SurrogateKind.SHUFFLE_DT, SurrogateKind.SHUFFLE_BOTH):
            dt = rng.permutation(dt)
        if kind in (SurrogateKind.SHUFFLE_DX, SurrogateKind.SHUFFLE_BOTH):
            dx = rng.permutation(dx)
        new_dts.append(dt)
        new_dxs.append(dx)
        starts.append(series.session_starts[k])
    out = EventSeries.from_sessions(new_dts, new_dxs, starts, series.stationarized)
    out.meta = dict(series.meta)
    out.meta["surrogate"] = kind.value
    return out
