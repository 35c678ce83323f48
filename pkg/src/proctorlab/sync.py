"""Session-timeline mapping, gap detection and multi-rate window alignment.

Analysis windows are half-open ``[start, end)``: an event at exactly the
boundary belongs to the later window, so nothing is double counted when the
hop equals the window. Continuous streams are linearly resampled onto each
window's grid (head-pose angles on the shortest arc around the -180/180
wrap); event streams are bucketed by timestamp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Mapping, Sequence

import numpy as np

from .model import (
    EVENT_STREAM_KINDS,
    MICROS_PER_SECOND,
    SAMPLED_STREAM_KINDS,
    DomainError,
    Session,
    StreamDescriptor,
)
from .protocol import ClockEstimate

DEFAULT_GAP_K = 3.0
DEFAULT_WINDOW_S = 10.0
DEFAULT_HOP_S = 5.0


class SyncError(DomainError):
    pass


def to_session_time(raw: int, est: ClockEstimate, drift_ppm: float = 0.0,
                    raw_anchor: int = 0) -> tuple[int, bool]:
    """Map a raw device timestamp onto the session timeline.

    ``t = raw + offset + drift_ppm * 1e-6 * (raw - raw_anchor)``, clamped to
    >= 0. Returns ``(t, clamped)``. Monotone in ``raw`` for any fixed
    estimate and drift > -1e6 ppm.
    """
    t = raw + est.offset_micros
    if drift_ppm:
        t += round(drift_ppm * 1e-6 * (raw - raw_anchor))
    if t < 0:
        return 0, True
    return int(t), False


def detect_gaps(samples: Sequence[Any], descriptor: StreamDescriptor,
                k: float = DEFAULT_GAP_K) -> list["Gap"]:
    """Find inter-sample intervals longer than ``k`` nominal periods.

    Only meaningful for fixed-rate streams; event streams have no nominal
    spacing, so callers get an error pointing them at the activity-based
    detection in the challenge harness.
    """
    if descriptor.kind in EVENT_STREAM_KINDS:
        raise SyncError(f"stream {descriptor.stream_id!r} is an event stream; "
                        "use activity-based gap detection in the challenge harness")
    if descriptor.nominal_rate_hz is None:
        raise SyncError(f"stream {descriptor.stream_id!r} has no nominal rate")
    threshold = k / descriptor.nominal_rate_hz * MICROS_PER_SECOND
    gaps = []
    for a, b in zip(samples, samples[1:]):
        if b.ts - a.ts > threshold:
            gaps.append(Gap(descriptor.stream_id, a.ts, b.ts))
    return gaps


@dataclass(frozen=True, slots=True)
class Gap:
    stream_id: str
    start: int
    end: int


def resample_uniform(times: Sequence[int], values: Sequence[float],
                     grid_start: int, grid_rate_hz: float,
                     grid_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Linear interpolation of ``(times, values)`` onto a uniform grid.

    Grid point j sits at ``grid_start + j / grid_rate_hz`` (micros). Points
    outside the support take the nearest endpoint value and are flagged in
    the returned boolean mask. Needs at least two strictly increasing points.
    """
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if t.size < 2:
        raise SyncError("resampling needs at least 2 points")
    if np.any(np.diff(t) <= 0):
        raise SyncError("sample times must be strictly increasing")
    step = MICROS_PER_SECOND / grid_rate_hz
    grid = grid_start + np.arange(grid_len, dtype=np.float64) * step
    out = np.interp(grid, t, v)
    extrapolated = (grid < t[0]) | (grid > t[-1])
    return out, extrapolated


def resample_angles(times: Sequence[int], degrees: Sequence[float],
                    grid_start: int, grid_rate_hz: float,
                    grid_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Like resample_uniform but interpolating angles on the shortest arc."""
    unwrapped = np.unwrap(np.asarray(degrees, dtype=np.float64), period=360.0)
    out, extrapolated = resample_uniform(times, unwrapped, grid_start,
                                         grid_rate_hz, grid_len)
    wrapped = (out + 180.0) % 360.0 - 180.0
    return wrapped, extrapolated


# Channels resampled per sampled-stream kind; angle channels wrap.
_CHANNELS: dict[str, tuple[tuple[str, bool], ...]] = {
    "eeg_band": (("attention", False), ("meditation", False)),
    "smartwatch": (("heart_rate_bpm", False),),
    "head_pose": (("pitch", True), ("roll", True), ("yaw", True)),
    "face_biometrics": (("face_size_px", False), ("auth_score", False),
                        ("face_present", False)),
}


@dataclass(frozen=True)
class ResampledSeries:
    rate_hz: float
    channels: Mapping[str, np.ndarray]
    extrapolated: np.ndarray  # grid points outside the stream's support


@dataclass(frozen=True)
class AlignedWindow:
    start: int  # session micros, inclusive
    end: int    # exclusive
    events: Mapping[str, tuple[Any, ...]]
    series: Mapping[str, ResampledSeries]
    degraded_streams: frozenset[str]  # streams whose gaps overlap this window


def _channel_arrays(kind: str, samples: Sequence[Any]
                    ) -> dict[str, tuple[np.ndarray, np.ndarray, bool]]:
    """Per channel: (times, values, is_angle), None-valued samples dropped."""
    out = {}
    for name, is_angle in _CHANNELS[kind]:
        ts, vs = [], []
        for s in samples:
            v = getattr(s, name)
            if v is None:
                continue
            ts.append(s.ts)
            vs.append(float(v))
        out[name] = (np.asarray(ts, dtype=np.float64),
                     np.asarray(vs, dtype=np.float64), is_angle)
    return out


def window_session(session: Session, window_s: float = DEFAULT_WINDOW_S,
                   hop_s: float = DEFAULT_HOP_S, gap_k: float = DEFAULT_GAP_K,
                   ) -> list[AlignedWindow]:
    """Tile ``[0, session_end]`` with half-open windows at hop intervals.

    Event streams are bucketed; sampled streams are resampled at their
    nominal rate onto each window's grid. Windows overlapping a detected gap
    carry the affected stream ids in ``degraded_streams``.
    """
    if window_s <= 0 or hop_s <= 0:
        raise SyncError("window_s and hop_s must be positive")
    end = session.end_micros()
    window_us = round(window_s * MICROS_PER_SECOND)
    hop_us = round(hop_s * MICROS_PER_SECOND)
    starts = list(range(0, max(end, 1), hop_us))

    manifest = session.manifest
    event_streams: dict[str, np.ndarray] = {}
    sampled: dict[str, tuple[StreamDescriptor, Sequence[Any], dict]] = {}
    gaps_by_stream: dict[str, list[Gap]] = {}
    for d in manifest.streams:
        if d.payload != "inline_samples":
            continue
        samples = session.stream(d.stream_id)
        if d.kind in EVENT_STREAM_KINDS:
            event_streams[d.stream_id] = np.asarray([s.ts for s in samples],
                                                    dtype=np.int64)
        elif d.kind in SAMPLED_STREAM_KINDS:
            sampled[d.stream_id] = (d, samples, _channel_arrays(d.kind, samples))
            if d.nominal_rate_hz is not None and len(samples) >= 2:
                gaps_by_stream[d.stream_id] = detect_gaps(samples, d, gap_k)

    windows = []
    for start in starts:
        w_end = start + window_us
        events = {}
        for sid, ts_arr in event_streams.items():
            lo = int(np.searchsorted(ts_arr, start, side="left"))
            hi = int(np.searchsorted(ts_arr, w_end, side="left"))
            events[sid] = tuple(session.stream(sid)[lo:hi])
        series = {}
        for sid, (d, samples, chans) in sampled.items():
            rate = d.nominal_rate_hz
            if rate is None:
                continue
            grid_len = round((w_end - start) / MICROS_PER_SECOND * rate)
            channels: dict[str, np.ndarray] = {}
            extrapolated = np.zeros(grid_len, dtype=bool)
            usable = False
            for name, (ts_arr, v_arr, is_angle) in chans.items():
                if ts_arr.size < 2:
                    continue
                fn = resample_angles if is_angle else resample_uniform
                channels[name], extra = fn(ts_arr, v_arr, start, rate, grid_len)
                extrapolated |= extra
                usable = True
            if usable:
                series[sid] = ResampledSeries(rate, channels, extrapolated)
        degraded = frozenset(
            sid for sid, gaps in gaps_by_stream.items()
            if any(g.start < w_end and start < g.end for g in gaps))
        windows.append(AlignedWindow(start, w_end, events, series, degraded))
    return windows


def sync_session(session: Session, gap_k: float = DEFAULT_GAP_K
                 ) -> tuple[Session, list[Gap]]:
    """Apply each stream's clock mapping, then scan fixed-rate gaps.

    Every inline stream's timestamps are mapped with that descriptor's
    (offset, drift); descriptors are zeroed afterwards so the mapping is
    idempotent, and the manifest is marked synchronized. Returns the mapped
    session and all detected gaps.
    """
    manifest = session.manifest
    new_samples: dict[str, tuple[Any, ...]] = {}
    new_streams = []
    gaps: list[Gap] = []
    for d in manifest.streams:
        if d.payload != "inline_samples":
            new_streams.append(d)
            continue
        est = ClockEstimate(d.clock_offset_micros, 0)
        mapped = []
        for s in session.stream(d.stream_id):
            t, _clamped = to_session_time(s.ts, est, d.clock_drift_ppm)
            mapped.append(replace(s, ts=t))
        mapped.sort(key=lambda s: s.ts)  # mapping is monotone; sort is a guard
        new_samples[d.stream_id] = tuple(mapped)
        new_d = replace(d, clock_offset_micros=0, clock_drift_ppm=0.0)
        new_streams.append(new_d)
        if (d.kind in SAMPLED_STREAM_KINDS and d.nominal_rate_hz is not None
                and len(mapped) >= 2):
            gaps.extend(detect_gaps(mapped, new_d, gap_k))
    new_manifest = replace(manifest, streams=tuple(new_streams),
                           synchronized=True)
    return Session(new_manifest, new_samples), gaps


def nominal_period_us(rate_hz: float) -> int:
    return math.ceil(MICROS_PER_SECOND / rate_hz)
