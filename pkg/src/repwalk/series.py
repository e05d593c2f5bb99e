"""Event series container and its CSV interchange format.

An event is a (timestamp, increment) pair; waiting times are the gaps back to
the previous event, with the session start serving as the reference for the
first event of each session.  The on-disk format is a two-column CSV with one
``# session start=<t>`` comment line opening each session block; it
round-trips losslessly (full float precision).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_HEADER = "timestamp_seconds,increment"


@dataclass
class EventSeries:
    """Ordered events grouped into sessions.

    Attributes
    ----------
    times : ndarray
        Event timestamps in seconds, strictly increasing within a session.
    increments : ndarray
        Per-event increment (log-return role), same length as `times`.
    session_starts : ndarray
        Reference time per session; the first event's waiting time is
        measured from it.
    session_bounds : list of (lo, hi)
        Half-open index ranges delimiting the sessions.
    stationarized : bool
        Set once waiting times have been divided by a seasonal profile.
    """

    times: np.ndarray
    increments: np.ndarray
    session_starts: np.ndarray
    session_bounds: list[tuple[int, int]]
    stationarized: bool = False
    meta: dict = field(default_factory=dict)
    # exact per-event waiting times when the series was built from them;
    # avoids cumsum/diff rounding so surrogates preserve multisets exactly
    _waiting: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.increments = np.asarray(self.increments, dtype=np.float64)
        self.session_starts = np.asarray(self.session_starts, dtype=np.float64)
        if self._waiting is not None:
            self._waiting = np.asarray(self._waiting, dtype=np.float64)
            if self._waiting.shape != self.times.shape:
                raise ValueError("waiting times must match event count")
        if self.times.shape != self.increments.shape:
            raise ValueError("times and increments must have equal length")
        if len(self.session_starts) != len(self.session_bounds):
            raise ValueError("one start time required per session")
        for k, (lo, hi) in enumerate(self.session_bounds):
            if hi <= lo:
                raise ValueError(f"session {k} is empty")
            seg = self.times[lo:hi]
            if seg[0] <= self.session_starts[k]:
                raise ValueError(
                    f"session {k}: first event not after the session start"
                )
            if np.any(np.diff(seg) <= 0):
                raise ValueError(f"session {k}: times not strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def n_sessions(self) -> int:
        return len(self.session_bounds)

    def waiting_times(self) -> np.ndarray:
        """Per-event waiting time; first event of a session counts from the
        session start."""
        if self._waiting is not None:
            return self._waiting.copy()
        dt = np.empty_like(self.times)
        for k, (lo, hi) in enumerate(self.session_bounds):
            dt[lo:hi] = np.diff(self.times[lo:hi], prepend=self.session_starts[k])
        return dt

    def session_values(self, values: np.ndarray) -> list[np.ndarray]:
        """Split a per-event array into per-session views."""
        return [values[lo:hi] for lo, hi in self.session_bounds]

    def copy(self) -> "EventSeries":
        return EventSeries(
            self.times.copy(),
            self.increments.copy(),
            self.session_starts.copy(),
            list(self.session_bounds),
            self.stationarized,
            dict(self.meta),
            None if self._waiting is None else self._waiting.copy(),
        )

    @classmethod
    def from_sessions(
        cls,
        session_dts: list[np.ndarray],
        session_dxs: list[np.ndarray],
        session_starts=None,
        stationarized: bool = False,
    ) -> "EventSeries":
        """Build a series from per-session waiting times and increments."""
        if len(session_dts) != len(session_dxs):
            raise ValueError("sessions of waiting times and increments differ")
        if session_starts is None:
            session_starts = np.zeros(len(session_dts))
        times, bounds, waits = [], [], []
        pos = 0
        for start, dts in zip(session_starts, session_dts):
            dts = np.asarray(dts, dtype=np.float64)
            t = start + np.cumsum(dts)
            times.append(t)
            waits.append(dts)
            bounds.append((pos, pos + len(t)))
            pos += len(t)
        return cls(
            np.concatenate(times) if times else np.empty(0),
            np.concatenate([np.asarray(x, dtype=np.float64) for x in session_dxs])
            if session_dxs
            else np.empty(0),
            np.asarray(session_starts, dtype=np.float64),
            bounds,
            stationarized,
            _waiting=np.concatenate(waits) if waits else np.empty(0),
        )


def write_event_csv(series: EventSeries, path) -> None:
    with open(path, "w") as fh:
        fh.write(_HEADER + "\n")
        if series.stationarized:
            fh.write("# stationarized\n")
        for k, (lo, hi) in enumerate(series.session_bounds):
            fh.write(f"# session start={series.session_starts[k]:.17g}\n")
            t = series.times[lo:hi]
            x = series.increments[lo:hi]
            fh.write(
                "".join(f"{ti:.17g},{xi:.17g}\n" for ti, xi in zip(t, x))
            )


def read_event_csv(path) -> EventSeries:
    times: list[float] = []
    incs: list[float] = []
    starts: list[float] = []
    bounds: list[tuple[int, int]] = []
    stationarized = False
    open_lo: int | None = None

    def close_session(hi):
        nonlocal open_lo
        if open_lo is not None:
            if hi == open_lo:
                # empty session block: drop marker and its start
                starts.pop()
            else:
                bounds.append((open_lo, hi))
            open_lo = None

    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("session"):
                    close_session(len(times))
                    rest = body[len("session"):].strip()
                    if not rest.startswith("start="):
                        raise ValueError(
                            f"{path}:{lineno}: session marker must carry "
                            "'start=<seconds>'"
                        )
                    starts.append(float(rest[len("start="):]))
                    open_lo = len(times)
                elif body == "stationarized":
                    stationarized = True
                continue
            if line == _HEADER:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two columns")
            if open_lo is None:
                raise ValueError(
                    f"{path}:{lineno}: event row before any '# session' marker"
                )
            times.append(float(parts[0]))
            incs.append(float(parts[1]))
    close_session(len(times))
    if not times:
        raise ValueError(f"{path}: no events")
    return EventSeries(
        np.asarray(times), np.asarray(incs), np.asarray(starts), bounds, stationarized
    )
