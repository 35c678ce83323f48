"""Behavioral feature extraction: keystroke dynamics, mouse dynamics,
fixed-text typing templates, and physiological aggregates.

Timing definitions (all in milliseconds):

* hold time      — release minus press of one key;
* PP latency     — press-to-press interval of consecutive keys;
* RP latency     — next press minus current release; negative under rollover
                   typing (next key pressed before the previous is released)
                   and deliberately kept that way.

Every extractor is pure and depends only on timestamp differences, never on
absolute time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .model import DomainError, EEGSample, KeyEvent, MouseEvent, WearableSample

BACKSPACE = "Backspace"
DEFAULT_IDLE_THRESHOLD_MS = 2000.0
DEFAULT_BLINK_THRESHOLD = 50.0
MERGE_DISTANCE_PX = 2.0  # pointer jitter suppression for curvature
_MS = 1000.0  # micros per millisecond


class FeatureError(DomainError):
    pass


# ---------------------------------------------------------------------------
# Keystroke dynamics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KeystrokeFeatures:
    hold_times: tuple[tuple[str, float], ...]  # (key_code, ms), press order
    digraph_pp: tuple[tuple[tuple[str, str], float], ...]
    digraph_rp: tuple[tuple[tuple[str, str], float], ...]
    keys_per_second: float
    backspace_rate: float
    skipped_events: int = 0  # releases without a press, zero-length holds


def keystroke_features(events: Sequence[KeyEvent]) -> KeystrokeFeatures:
    """Extract hold times and digraph latencies from a time-ordered stream.

    Presses and releases of one key are paired first-in-first-out; presses
    still open at stream end produce no hold entry. A release without a
    preceding press is skipped and counted in ``skipped_events``.
    """
    presses: list[tuple[str, int, int]] = []  # (key, press_ts, slot)
    release_ts: dict[int, int] = {}           # slot -> release_ts
    open_by_key: dict[str, list[int]] = {}
    skipped = 0
    for ev in events:
        if ev.action == "press":
            slot = len(presses)
            presses.append((ev.key_code, ev.ts, slot))
            open_by_key.setdefault(ev.key_code, []).append(slot)
        elif ev.action == "release":
            queue = open_by_key.get(ev.key_code)
            if not queue:
                skipped += 1
                continue
            release_ts[queue.pop(0)] = ev.ts

    holds = []
    for key, t_press, slot in presses:
        t_rel = release_ts.get(slot)
        if t_rel is None:
            continue
        if t_rel <= t_press:
            skipped += 1
            continue
        holds.append((key, (t_rel - t_press) / _MS))

    pp, rp = [], []
    for (k1, t1, slot1), (k2, t2, _slot2) in zip(presses, presses[1:]):
        pp.append(((k1, k2), (t2 - t1) / _MS))
        t_rel = release_ts.get(slot1)
        if t_rel is not None:
            rp.append(((k1, k2), (t2 - t_rel) / _MS))

    n_press = len(presses)
    span_s = (events[-1].ts - events[0].ts) / 1e6 if events else 0.0
    kps = n_press / span_s if span_s > 0 else 0.0
    bs_rate = (sum(1 for k, _t, _s in presses if k == BACKSPACE) / n_press
               if n_press else 0.0)
    return KeystrokeFeatures(tuple(holds), tuple(pp), tuple(rp), kps, bs_rate,
                             skipped)


# ---------------------------------------------------------------------------
# Mouse dynamics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MouseFeatures:
    velocities: tuple[tuple[int, float], ...]     # (ts, px/s)
    accelerations: tuple[tuple[int, float], ...]  # (ts, px/s^2)
    path_length: float
    mean_curvature: float  # radians per px over the jitter-merged path
    click_durations: tuple[float, ...]  # ms, press order
    wheel_events: int
    idle_fraction: float
    dropped_events: int = 0  # zero-dt points, unmatched releases


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def mouse_features(events: Sequence[MouseEvent],
                   idle_threshold_ms: float = DEFAULT_IDLE_THRESHOLD_MS,
                   ) -> MouseFeatures:
    """Kinematics over move/drag points plus click and idle statistics.

    Velocity is Euclidean distance over elapsed time between consecutive
    pointer positions; a later point with zero elapsed time is dropped.
    Curvature is total absolute heading change divided by arc length after
    merging points closer than 2 px. Gaps between consecutive events longer
    than the idle threshold accumulate into ``idle_fraction``.
    """
    dropped = 0
    points: list[tuple[int, int, int]] = []  # (ts, x, y), moves and drags
    for ev in events:
        if ev.kind in ("move", "drag"):
            if points and ev.ts == points[-1][0]:
                dropped += 1
                continue
            points.append((ev.ts, ev.x, ev.y))

    velocities: list[tuple[int, float]] = []
    path_length = 0.0
    for (t1, x1, y1), (t2, x2, y2) in zip(points, points[1:]):
        dist = math.hypot(x2 - x1, y2 - y1)
        path_length += dist
        velocities.append((t2, dist / ((t2 - t1) / 1e6)))

    accelerations: list[tuple[int, float]] = []
    for (t1, v1), (t2, v2) in zip(velocities, velocities[1:]):
        accelerations.append((t2, (v2 - v1) / ((t2 - t1) / 1e6)))

    merged = []
    for t, x, y in points:
        if not merged or math.hypot(x - merged[-1][1], y - merged[-1][2]) \
                >= MERGE_DISTANCE_PX:
            merged.append((t, x, y))
    headings = [math.atan2(y2 - y1, x2 - x1)
                for (_t1, x1, y1), (_t2, x2, y2) in zip(merged, merged[1:])]
    turn = sum(abs(_wrap_angle(h2 - h1)) for h1, h2 in zip(headings, headings[1:]))
    arc = sum(math.hypot(x2 - x1, y2 - y1)
              for (_t1, x1, y1), (_t2, x2, y2) in zip(merged, merged[1:]))
    mean_curvature = turn / arc if arc > 0 else 0.0

    open_press: dict[str, list[int]] = {}
    clicks: list[float] = []
    for ev in events:
        if ev.kind == "press":
            open_press.setdefault(ev.button, []).append(ev.ts)
        elif ev.kind == "release":
            queue = open_press.get(ev.button)
            if not queue:
                dropped += 1
                continue
            clicks.append((ev.ts - queue.pop(0)) / _MS)

    wheel = sum(1 for ev in events if ev.kind == "wheel")

    idle_us = 0
    for e1, e2 in zip(events, events[1:]):
        if (e2.ts - e1.ts) / _MS > idle_threshold_ms:
            idle_us += e2.ts - e1.ts
    span_us = events[-1].ts - events[0].ts if len(events) > 1 else 0
    idle_fraction = idle_us / span_us if span_us > 0 else 0.0

    return MouseFeatures(tuple(velocities), tuple(accelerations), path_length,
                         mean_curvature, tuple(clicks), wheel, idle_fraction,
                         dropped)


# ---------------------------------------------------------------------------
# Fixed-text templates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedTextTemplate:
    """Digraph timing vector aligned position-by-position to a reference text.

    ``digraph_ms[i]`` is the press-to-press latency between reference
    characters i and i+1; ``mask[i]`` is False where either character could
    not be matched to a typed key, and such entries are excluded from
    distances.
    """
    reference_text: str
    digraph_ms: tuple[float | None, ...]  # length == len(reference_text) - 1
    mask: tuple[bool, ...]
    corrections: int  # backspace presses observed while typing
    match_rate: float


_ALIGN_LOOKAHEAD = 4  # max typed insertions skipped between two matches


def fixed_text_template(events: Sequence[KeyEvent], reference_text: str,
                        min_match: float = 0.5) -> FixedTextTemplate:
    """Align one field's typing to its reference text, greedily left to right.

    The typed buffer is first replayed through an editor model (printable
    keys append, backspace deletes), so corrections resolve to the final
    character and its press time. Entries matching fewer than ``min_match``
    of the reference positions are unusable for verification and rejected.
    """
    if not reference_text:
        raise FeatureError("reference text is empty")
    buffer: list[tuple[str, int]] = []  # (char, press_ts) after corrections
    corrections = 0
    for ev in events:
        if ev.action != "press":
            continue
        if ev.key_code == BACKSPACE:
            corrections += 1
            if buffer:
                buffer.pop()
        elif len(ev.key_code) == 1:
            buffer.append((ev.key_code, ev.ts))

    ref = reference_text.casefold()
    press_at: dict[int, int] = {}  # reference index -> press ts
    j = 0
    for i, ch in enumerate(ref):
        window = buffer[j:j + _ALIGN_LOOKAHEAD]
        for off, (typed, ts) in enumerate(window):
            if typed.casefold() == ch:
                press_at[i] = ts
                j += off + 1
                break

    match_rate = len(press_at) / len(reference_text)
    if match_rate < min_match:
        raise FeatureError(
            f"only {match_rate:.0%} of the reference matched; entry unusable")

    digraphs: list[float | None] = []
    mask: list[bool] = []
    for i in range(len(reference_text) - 1):
        if i in press_at and i + 1 in press_at:
            digraphs.append((press_at[i + 1] - press_at[i]) / _MS)
            mask.append(True)
        else:
            digraphs.append(None)
            mask.append(False)
    return FixedTextTemplate(reference_text, tuple(digraphs), tuple(mask),
                             corrections, match_rate)


# ---------------------------------------------------------------------------
# Physiological aggregates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhysioAggregate:
    """Window means of the mental-state and pulse channels.

    Fields are None when the window holds no contributing samples — an
    absent measurement is reported as absent, never as a fabricated zero.
    """
    mean_attention: float | None
    mean_meditation: float | None
    band_power_means: tuple[float, ...] | None
    blink_count: int | None
    mean_hr_bpm: float | None
    std_hr_bpm: float | None
    n_eeg: int = 0
    n_hr: int = 0


def physio_aggregate(eeg: Sequence[EEGSample], wear: Sequence[WearableSample],
                     window: tuple[int, int],
                     blink_threshold: float = DEFAULT_BLINK_THRESHOLD,
                     ) -> PhysioAggregate:
    """Aggregate EEG and wearable samples falling in ``[start, end)``."""
    start, end = window
    in_eeg = [s for s in eeg if start <= s.ts < end]
    hr = [s.heart_rate_bpm for s in wear
          if start <= s.ts < end and s.heart_rate_bpm is not None]

    mean_att = mean_med = band_means = blinks = None
    if in_eeg:
        n = len(in_eeg)
        mean_att = sum(s.attention for s in in_eeg) / n
        mean_med = sum(s.meditation for s in in_eeg) / n
        band_means = tuple(sum(s.band_power[b] for s in in_eeg) / n
                           for b in range(len(in_eeg[0].band_power)))
        blinks = sum(1 for s in in_eeg
                     if s.blink_strength is not None
                     and s.blink_strength > blink_threshold)

    mean_hr = std_hr = None
    if hr:
        mean_hr = sum(hr) / len(hr)
        std_hr = math.sqrt(sum((v - mean_hr) ** 2 for v in hr) / len(hr))

    return PhysioAggregate(mean_att, mean_med, band_means, blinks,
                           mean_hr, std_hr, n_eeg=len(in_eeg), n_hr=len(hr))
