import numpy as np
import pytest

from repwalk import EventSeries, read_event_csv, write_event_csv


def make_series():
    return EventSeries.from_sessions(
        [np.array([0.5, 1.0, 0.25]), np.array([2.0, 0.125])],
        [np.array([0.1, -0.2, 0.3]), np.array([-0.4, 0.5])],
        session_starts=[0.0, 100.0],
    )


class TestEventSeries:
    def test_waiting_times_round(self):
        s = make_series()
        assert np.allclose(s.waiting_times(), [0.5, 1.0, 0.25, 2.0, 0.125])
        assert s.n_sessions == 2
        assert len(s) == 5

    def test_invariants(self):
        with pytest.raises(ValueError):
            EventSeries(
                np.array([1.0, 0.5]),
                np.array([0.0, 0.0]),
                np.array([0.0]),
                [(0, 2)],
            )
        with pytest.raises(ValueError):
            EventSeries(
                np.array([1.0]),
                np.array([0.0, 0.0]),
                np.array([0.0]),
                [(0, 2)],
            )

    def test_session_values(self):
        s = make_series()
        parts = s.session_values(s.increments)
        assert len(parts) == 2 and len(parts[0]) == 3


class TestCsvRoundTrip:
    def test_lossless(self, tmp_path):
        s = make_series()
        # awkward floats to stress formatting
        s.times[0] = 0.1 + 0.2
        path = tmp_path / "events.csv"
        write_event_csv(s, path)
        back = read_event_csv(path)
        assert np.array_equal(back.times, s.times)
        assert np.array_equal(back.increments, s.increments)
        assert np.array_equal(back.session_starts, s.session_starts)
        assert back.session_bounds == s.session_bounds
        assert back.stationarized == s.stationarized

    def test_stationarized_flag_round_trip(self, tmp_path):
        s = make_series()
        s.stationarized = True
        path = tmp_path / "ev.csv"
        write_event_csv(s, path)
        assert read_event_csv(path).stationarized

    def test_marker_requires_start(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# session\n1.0,0.1\n")
        with pytest.raises(ValueError, match="start="):
            read_event_csv(path)

    def test_row_before_marker(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,0.1\n")
        with pytest.raises(ValueError, match="session"):
            read_event_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValueError, match="no events"):
            read_event_csv(path)
