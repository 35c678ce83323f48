"""Sync engine: timeline mapping, gaps, resampling, windowing."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_session
from proctorlab.model import EEGSample, KeyEvent, StreamDescriptor
from proctorlab.protocol import ClockEstimate
from proctorlab.sync import (
    SyncError,
    detect_gaps,
    resample_angles,
    resample_uniform,
    sync_session,
    to_session_time,
    window_session,
)

MICROS = 1_000_000
EEG = StreamDescriptor("eeg", "eeg_band", 1.0)


def eeg_at(*seconds):
    return [EEGSample(int(s * MICROS), (1.0,) * 5, 50.0, 50.0) for s in seconds]


class TestToSessionTime:
    def test_identity(self):
        assert to_session_time(1234, ClockEstimate(0, 0)) == (1234, False)

    def test_offset_from_probe_example(self):
        assert to_session_time(100, ClockEstimate(46, 8)) == (146, False)

    def test_clamped_to_zero_with_flag(self):
        assert to_session_time(100, ClockEstimate(-500, 0)) == (0, True)

    def test_drift_term(self):
        # 100 ppm over 1e6 us beyond the anchor adds 100 us
        t, clamped = to_session_time(1_000_000, ClockEstimate(0, 0),
                                     drift_ppm=100.0, raw_anchor=0)
        assert (t, clamped) == (1_000_100, False)

    @given(raws=st.lists(st.integers(-10**9, 10**9), min_size=2, max_size=50),
           offset=st.integers(-10**6, 10**6),
           drift=st.floats(-500.0, 500.0))
    @settings(max_examples=100)
    def test_monotone_in_raw(self, raws, offset, drift):
        est = ClockEstimate(offset, 0)
        raws = sorted(raws)
        mapped = [to_session_time(r, est, drift)[0] for r in raws]
        assert all(a <= b for a, b in zip(mapped, mapped[1:]))


class TestDetectGaps:
    def test_nominal_spacing_has_no_gaps(self):
        assert detect_gaps(eeg_at(0, 1, 2, 3), EEG) == []

    def test_gap_longer_than_k_periods(self):
        gaps = detect_gaps(eeg_at(0, 1, 5), EEG, k=3.0)
        assert len(gaps) == 1
        assert (gaps[0].start, gaps[0].end) == (1 * MICROS, 5 * MICROS)

    def test_empty_stream(self):
        assert detect_gaps([], EEG) == []

    def test_event_stream_refused(self):
        kb = StreamDescriptor("kb", "keyboard", 12.0)
        with pytest.raises(SyncError, match="activity-based"):
            detect_gaps([KeyEvent(0, "a", "press")], kb)

    def test_missing_rate_refused(self):
        unrated = StreamDescriptor("pose", "head_pose", None)
        with pytest.raises(SyncError, match="nominal rate"):
            detect_gaps(eeg_at(0, 1), unrated)


class TestResample:
    def test_midpoint_of_line(self):
        values, extra = resample_uniform([0, MICROS], [0.0, 100.0],
                                         500_000, 2.0, 1)
        assert values[0] == pytest.approx(50.0)
        assert not extra[0]

    def test_grid_point_at_node(self):
        values, _ = resample_uniform([0, MICROS], [0.0, 100.0], 0, 1.0, 2)
        assert values[1] == 100.0

    def test_three_point_linear(self):
        values, _ = resample_uniform([0, 2 * MICROS], [0.0, 4.0], 0, 1.0, 3)
        assert values.tolist() == [0.0, 2.0, 4.0]

    def test_constant_series_conserved(self):
        rng = np.random.default_rng(0)
        times = np.sort(rng.choice(np.arange(1, 10**6), 20, replace=False))
        values, _ = resample_uniform(times, [7.25] * 20, 0, 13.0, 40)
        assert np.all(values == 7.25)

    @given(a=st.floats(-10, 10), b=st.floats(-100, 100))
    @settings(max_examples=50)
    def test_exact_on_affine_inputs(self, a, b):
        times = [0, 250_000, 600_000, MICROS]
        values = [a * (t / MICROS) + b for t in times]
        out, extra = resample_uniform(times, values, 0, 7.0, 8)
        grid = np.arange(8) / 7.0
        expected = a * grid + b
        inside = ~extra
        assert np.allclose(out[inside], expected[inside], rtol=1e-12, atol=1e-9)

    def test_outside_support_flagged_and_clamped(self):
        values, extra = resample_uniform([MICROS, 2 * MICROS], [10.0, 20.0],
                                         0, 1.0, 4)
        assert values.tolist() == [10.0, 10.0, 20.0, 20.0]
        assert extra.tolist() == [True, False, False, True]

    def test_fewer_than_two_points_is_error(self):
        with pytest.raises(SyncError, match="at least 2"):
            resample_uniform([0], [1.0], 0, 1.0, 2)

    def test_angles_take_shortest_arc(self):
        values, _ = resample_angles([0, MICROS], [170.0, -170.0],
                                    500_000, 2.0, 1)
        assert values[0] == pytest.approx(180.0) or \
            values[0] == pytest.approx(-180.0)


class TestWindowing:
    def test_ten_second_session_two_windows(self):
        session = make_session(eeg=eeg_at(*range(10)))
        windows = window_session(session, 5.0, 5.0)
        assert [(w.start, w.end) for w in windows] == [
            (0, 5 * MICROS), (5 * MICROS, 10 * MICROS)]

    def test_half_window_hop_positions(self):
        session = make_session(eeg=eeg_at(*range(10)))
        windows = window_session(session, 5.0, 2.5)
        assert [w.start for w in windows] == [0, 2_500_000, 5_000_000,
                                              7_500_000]

    def test_boundary_event_lands_in_later_window(self):
        events = [KeyEvent(5 * MICROS, "a", "press"),
                  KeyEvent(5 * MICROS + 1000, "a", "release"),
                  KeyEvent(9 * MICROS, "b", "press"),
                  KeyEvent(9 * MICROS + 1000, "b", "release")]
        session = make_session(key_events=events)
        w1, w2 = window_session(session, 5.0, 5.0)
        assert w1.events["kb"] == ()
        assert len(w2.events["kb"]) == 4

    def test_partition_when_hop_equals_window(self):
        rng = np.random.default_rng(3)
        ts = np.sort(rng.integers(0, 30 * MICROS, 101))
        events = []
        for i, t in enumerate(ts):
            events.append(KeyEvent(int(t), f"k{i}", "press"))
            events.append(KeyEvent(int(t) + 1, f"k{i}", "release"))
        events.sort(key=lambda e: e.ts)
        session = make_session(key_events=events)
        windows = window_session(session, 4.0, 4.0)
        counted = sum(len(w.events["kb"]) for w in windows)
        assert counted == len(events)

    def test_resampled_series_length_matches_rate(self):
        session = make_session(eeg=eeg_at(*range(20)))
        windows = window_session(session, 10.0, 10.0)
        assert len(windows[0].series["eeg"].channels["attention"]) == 10

    def test_window_over_gap_is_degraded(self):
        session = make_session(eeg=eeg_at(0, 1, 2, 9, 10, 11))
        windows = window_session(session, 5.0, 5.0)
        assert "eeg" in windows[0].degraded_streams
        assert "eeg" in windows[1].degraded_streams

    def test_rejects_nonpositive_window(self):
        with pytest.raises(SyncError):
            window_session(make_session(), 0.0, 1.0)


class TestSyncSession:
    def test_offsets_applied_and_zeroed(self):
        desc = StreamDescriptor("kb", "keyboard", 12.0,
                                clock_offset_micros=1000)
        session = make_session(key_events=[KeyEvent(0, "a", "press"),
                                           KeyEvent(50, "a", "release")],
                               synchronized=False)
        manifest = session.manifest
        streams = tuple(desc if d.stream_id == "kb" else d
                        for d in manifest.streams)
        import dataclasses
        session = type(session)(dataclasses.replace(manifest, streams=streams),
                                session.samples)
        synced, gaps = sync_session(session)
        assert synced.manifest.synchronized
        assert [e.ts for e in synced.stream("kb")] == [1000, 1050]
        kb_desc = [d for d in synced.manifest.streams
                   if d.stream_id == "kb"][0]
        assert kb_desc.clock_offset_micros == 0

    def test_sync_is_idempotent(self):
        session = make_session(eeg=eeg_at(0, 1, 2), synchronized=False)
        once, _ = sync_session(session)
        twice, _ = sync_session(once)
        assert once.samples == twice.samples
