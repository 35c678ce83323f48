"""Parameterized synthetic users and sessions with ground-truth labels.

Stands in for human capture data at desk scale: every stream is drawn from a
per-user behavior profile at the rig's nominal rates (mouse capped at 895 Hz
during movement, EEG at 1 Hz, smartwatch at 200 Hz), and injected anomaly
intervals both perturb the streams (input gaps, attention drops, head-pose
deviation, face absence) and emit the matching ground-truth labels.

Everything is deterministic in (profile, plans, seed): re-running a cohort
with the same arguments reproduces it byte for byte.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Sequence

import numpy as np

from .model import (
    AnomalyLabel,
    ContextSnapshot,
    Demographics,
    DomainError,
    EEGSample,
    FaceSample,
    HeadPoseSample,
    KeyEvent,
    MouseEvent,
    Session,
    SessionManifest,
    StreamDescriptor,
    TaskRecord,
    WearableSample,
    anonymize_session,
)

MICROS = 1_000_000

# Nominal rig rates (Hz). Keyboard's 12 Hz is descriptor metadata only: keys
# are stored as the events arrive.
KEYBOARD_NOMINAL_HZ = 12.0
MOUSE_RATE_HZ = 895.0
EEG_RATE_HZ = 1.0
WATCH_RATE_HZ = 200.0
POSE_RATE_HZ = 30.0
FACE_RATE_HZ = 30.0

MOUSE_STEP_US = math.ceil(MICROS / MOUSE_RATE_HZ)  # >= 1/895 s between samples

ENROLLMENT_TEXT = "the quick brown fox jumps over the lazy dog"

# Anomaly kinds that silence keyboard/mouse input while active.
INPUT_GAP_KINDS = frozenset({"phone_use", "absence"})

ATTENTION_DROP_DEFAULT = 30.0

_WORDS = (
    "remote sensor stream window answer question focus student task signal "
    "keyboard pointer screen session time series pattern model simple test "
    "lecture review practice sample device clock watch camera level result"
).split()

_PROFILE_SALT = 101
_SESSION_SALT = 202
N_DIGRAPH_CLASSES = 8


class SynthError(DomainError):
    pass


def digraph_class(key_a: str, key_b: str) -> int:
    """Stable bucket for a key pair; profiles hold one PP mean per bucket."""
    return zlib.crc32(f"{key_a}|{key_b}".encode()) % N_DIGRAPH_CLASSES


@dataclass(frozen=True)
class SeparationConfig:
    """Controls how far apart distinct users' hold-time means are placed.

    With k > 0, means are stratified on a grid of spacing k * sd inside the
    physical range, so seeds in distinct strata are at least k standard
    deviations apart. k = 0 draws means uniformly with no constraint.
    """
    k: float = 0.0
    hold_sd_ms: float = 4.0
    hold_base_ms: float = 60.0
    hold_max_ms: float = 350.0

    def n_strata(self) -> int:
        spacing = self.k * self.hold_sd_ms
        return int((self.hold_max_ms - self.hold_base_ms) / spacing) + 1


@dataclass(frozen=True)
class UserBehaviorProfile:
    seed: int
    mean_hold_ms: float
    sd_hold_ms: float
    digraph_pp_means_ms: tuple[float, ...]  # one per digraph class
    sd_pp_ms: float
    mouse_speed_px_s: float
    sd_mouse_speed: float
    baseline_attention: float  # [0, 100]
    sd_attention: float
    baseline_meditation: float
    baseline_hr_bpm: float
    sd_hr_bpm: float
    error_rate: float  # [0, 1], probability of a mistyped (then fixed) char


def generate_profile(seed: int,
                     separation: SeparationConfig = SeparationConfig(),
                     ) -> UserBehaviorProfile:
    """Deterministic per-seed behavior profile within physical ranges."""
    rng = np.random.default_rng(np.random.SeedSequence([_PROFILE_SALT, seed]))
    if separation.k > 0:
        stratum = seed % separation.n_strata()
        mean_hold = (separation.hold_base_ms
                     + stratum * separation.k * separation.hold_sd_ms)
    else:
        mean_hold = float(rng.uniform(separation.hold_base_ms,
                                      separation.hold_max_ms))
    return UserBehaviorProfile(
        seed=seed,
        mean_hold_ms=float(mean_hold),
        sd_hold_ms=separation.hold_sd_ms,
        digraph_pp_means_ms=tuple(
            float(v) for v in rng.uniform(170.0, 330.0, N_DIGRAPH_CLASSES)),
        sd_pp_ms=18.0,
        mouse_speed_px_s=float(rng.uniform(350.0, 900.0)),
        sd_mouse_speed=60.0,
        baseline_attention=float(rng.uniform(45.0, 80.0)),
        sd_attention=7.0,
        baseline_meditation=float(rng.uniform(35.0, 70.0)),
        baseline_hr_bpm=float(rng.uniform(55.0, 95.0)),
        sd_hr_bpm=2.5,
        error_rate=float(rng.uniform(0.01, 0.06)),
    )


@dataclass(frozen=True)
class TaskPlanItem:
    group: str  # enrollment | writing | multiple_choice
    duration_s: float


@dataclass(frozen=True)
class AnomalyEvent:
    kind: str
    start_s: float
    duration_s: float

    @property
    def end_s(self) -> float:
        return self.start_s + self.duration_s


def default_task_plan() -> tuple[TaskPlanItem, ...]:
    """Eight tasks in the three capture groups."""
    return (
        TaskPlanItem("enrollment", 40.0),
        TaskPlanItem("writing", 45.0),
        TaskPlanItem("writing", 45.0),
        TaskPlanItem("writing", 45.0),
        TaskPlanItem("writing", 45.0),
        TaskPlanItem("multiple_choice", 15.0),
        TaskPlanItem("multiple_choice", 15.0),
        TaskPlanItem("multiple_choice", 15.0),
    )


def default_anomaly_plan(task_plan: Sequence[TaskPlanItem],
                         gap_s: float = 30.0) -> tuple[AnomalyEvent, ...]:
    """One phone-use and one absence interval inside two writing tasks.

    Each interval is clamped to fit its task with margins, so shortened
    plans still get in-task anomalies (or fewer, when a task is too short).
    """
    starts = np.cumsum([0.0] + [t.duration_s for t in task_plan])
    writing = [i for i, t in enumerate(task_plan) if t.group == "writing"]
    if not writing:
        raise SynthError("default anomaly plan needs a writing task")
    picks = [writing[0]]
    if len(writing) > 1:
        picks.append(writing[min(2, len(writing) - 1)])
    kinds = ("phone_use", "absence")
    events = []
    for kind, i in zip(kinds, picks):
        duration = task_plan[i].duration_s
        lead = min(7.0, duration * 0.15)
        gap = min(gap_s, duration - lead - 3.0)
        if gap <= 2.0:
            continue
        events.append(AnomalyEvent(kind, float(starts[i]) + lead, gap))
    if not events:
        raise SynthError("writing tasks too short for any anomaly interval")
    return tuple(events)


# ---------------------------------------------------------------------------
# Stream synthesis
# ---------------------------------------------------------------------------

def _in_any(t_us: int, intervals: Sequence[tuple[int, int]]) -> bool:
    return any(a <= t_us < b for a, b in intervals)


def _skip_gaps(t_us: int, gaps: Sequence[tuple[int, int]], rng) -> int:
    for a, b in gaps:
        if a <= t_us < b:
            return b + int(rng.uniform(150_000, 400_000))
    return t_us


def _typing_events(rng, profile: UserBehaviorProfile, text: str,
                   t_start_us: int, t_end_us: int,
                   gaps: Sequence[tuple[int, int]],
                   fill: bool) -> list[KeyEvent]:
    """Type ``text`` (repeating words when ``fill``) between the bounds.

    Presses advance by per-digraph-class PP draws; each press gets a release
    after a hold draw, so rollover (release after the next press) happens
    naturally whenever hold exceeds PP. Input-gap intervals are skipped.
    """
    emitted: list[tuple[int, int, KeyEvent]] = []
    seq = 0

    def emit(ts: int, key: str, action: str) -> None:
        nonlocal seq
        emitted.append((ts, seq, KeyEvent(ts, key, action)))
        seq += 1

    def press_and_release(ts: int, key: str) -> None:
        hold = float(np.clip(rng.normal(profile.mean_hold_ms, profile.sd_hold_ms),
                             15.0, 450.0))
        emit(ts, key, "press")
        emit(ts + int(hold * 1000), key, "release")

    t = t_start_us + int(rng.uniform(1_200_000, 1_800_000))
    margin = 800_000  # stop typing this long before the task ends
    prev_key = " "

    def next_press_time(t_now: int, key: str) -> int:
        pp_mean = profile.digraph_pp_means_ms[digraph_class(prev_key, key)]
        pp = float(np.clip(rng.normal(pp_mean, profile.sd_pp_ms), 40.0, 1500.0))
        return _skip_gaps(t_now + int(pp * 1000), gaps, rng)

    source = list(text)
    idx = 0
    while True:
        if idx >= len(source):
            if not fill:
                break
            source = list(rng.choice(_WORDS)) + [" "]
            idx = 0
        ch = source[idx]
        t = next_press_time(t, ch)
        if t > t_end_us - margin:
            break
        if ch == "\n":
            ch = " "
        if ch != " " and rng.uniform() < profile.error_rate:
            wrong = chr(ord("a") + rng.integers(0, 26))
            press_and_release(t, wrong)
            t_bs = next_press_time(t, "Backspace")
            if t_bs > t_end_us - margin:
                break
            press_and_release(t_bs, "Backspace")
            prev_key = "Backspace"
            t = next_press_time(t_bs, ch)
            if t > t_end_us - margin:
                break
        press_and_release(t, ch)
        prev_key = ch
        idx += 1
        if ch == " " and rng.uniform() < 0.15:
            t += int(rng.uniform(300, 1800) * 1000)  # think between words
            t = _skip_gaps(t, gaps, rng)

    emitted.sort(key=lambda item: (item[0], item[1]))
    return [ev for _ts, _seq, ev in emitted]


def _min_jerk(p0: tuple[float, float], p1: tuple[float, float],
              t0_us: int, duration_us: int) -> tuple[np.ndarray, np.ndarray,
                                                     np.ndarray]:
    """Minimum-jerk trajectory sampled at the mouse rate cap."""
    n = max(2, duration_us // MOUSE_STEP_US)
    ts = t0_us + np.arange(n, dtype=np.int64) * MOUSE_STEP_US
    tau = np.linspace(0.0, 1.0, n)
    shape = 10 * tau**3 - 15 * tau**4 + 6 * tau**5
    xs = p0[0] + (p1[0] - p0[0]) * shape
    ys = p0[1] + (p1[1] - p0[1]) * shape
    return ts, xs, ys


def _mouse_task_events(rng, profile: UserBehaviorProfile, t_start_us: int,
                       t_end_us: int, screen: tuple[int, int],
                       pos: list[float], n_targets: int,
                       gaps: Sequence[tuple[int, int]]) -> list[MouseEvent]:
    """Point-to-point movements with clicks and occasional wheel spins."""
    w, h = screen
    events: list[MouseEvent] = []
    t = t_start_us + int(rng.uniform(400_000, 900_000))
    for _ in range(n_targets):
        t = _skip_gaps(t, gaps, rng)
        target = (float(rng.uniform(0.1 * w, 0.9 * w)),
                  float(rng.uniform(0.1 * h, 0.9 * h)))
        dist = math.hypot(target[0] - pos[0], target[1] - pos[1])
        speed = max(80.0, float(rng.normal(profile.mouse_speed_px_s,
                                           profile.sd_mouse_speed)))
        duration_us = int((dist / speed + 0.12) * MICROS)
        if t + duration_us > t_end_us - 500_000:
            break
        ts, xs, ys = _min_jerk((pos[0], pos[1]), target, t, duration_us)
        for tt, x, y in zip(ts.tolist(), xs.tolist(), ys.tolist()):
            events.append(MouseEvent(tt, "move",
                                     int(np.clip(round(x), 0, w - 1)),
                                     int(np.clip(round(y), 0, h - 1))))
        pos[0], pos[1] = target
        t = int(ts[-1]) + int(rng.uniform(80, 220) * 1000)
        click_len = int(np.clip(rng.normal(90.0, 18.0), 30.0, 300.0) * 1000)
        x_i = int(np.clip(round(pos[0]), 0, w - 1))
        y_i = int(np.clip(round(pos[1]), 0, h - 1))
        events.append(MouseEvent(t, "press", x_i, y_i, button="left"))
        events.append(MouseEvent(t + click_len, "release", x_i, y_i,
                                 button="left"))
        t += click_len + int(rng.uniform(500_000, 2_500_000))
        if rng.uniform() < 0.3:
            for k in range(int(rng.integers(1, 4))):
                events.append(MouseEvent(t + k * 60_000, "wheel", x_i, y_i,
                                         wheel_delta=int(rng.choice((-2, -1, 1, 2)))))
            t += 400_000
    return events


def _sinusoid(n: int, rate_hz: float, amplitude: float, period_s: float,
              phase: float) -> np.ndarray:
    t = np.arange(n) / rate_hz
    return amplitude * np.sin(2 * math.pi * t / period_s + phase)


def _mask_for(ts: np.ndarray, intervals: Sequence[tuple[int, int]]) -> np.ndarray:
    mask = np.zeros(len(ts), dtype=bool)
    for a, b in intervals:
        mask |= (ts >= a) & (ts < b)
    return mask


def _eeg_stream(rng, profile, duration_us: int,
                anomaly_us: Sequence[tuple[int, int]],
                attention_drop: float) -> list[EEGSample]:
    ts = np.arange(500_000, duration_us, MICROS, dtype=np.int64)
    n = len(ts)
    att = (profile.baseline_attention
           + _sinusoid(n, EEG_RATE_HZ, 6.0, 120.0, float(rng.uniform(0, 6)))
           + rng.normal(0.0, profile.sd_attention, n))
    att[_mask_for(ts, anomaly_us)] -= attention_drop
    att = np.round(np.clip(att, 0.0, 100.0), 2)
    med = np.round(np.clip(
        profile.baseline_meditation
        + _sinusoid(n, EEG_RATE_HZ, 5.0, 150.0, float(rng.uniform(0, 6)))
        + rng.normal(0.0, 6.0, n), 0.0, 100.0), 2)
    band_mu = np.array([2.5, 2.2, 2.0, 1.8, 1.5])
    bands = np.round(rng.lognormal(band_mu, 0.25, size=(n, 5)), 4)
    blink_mask = rng.uniform(size=n) < 0.08
    blink_vals = np.round(rng.uniform(20.0, 140.0, n), 2)
    return [
        EEGSample(int(t), tuple(bp), float(a), float(m),
                  float(bv) if bm else None)
        for t, bp, a, m, bm, bv in zip(
            ts.tolist(), bands.tolist(), att.tolist(), med.tolist(),
            blink_mask.tolist(), blink_vals.tolist())
    ]


def _watch_stream(rng, profile, duration_us: int) -> list[WearableSample]:
    step = MICROS // int(WATCH_RATE_HZ)
    ts = np.arange(0, duration_us, step, dtype=np.int64)
    n = len(ts)
    seconds = max(2, math.ceil(duration_us / MICROS) + 1)
    anchors = np.clip(profile.baseline_hr_bpm
                      + np.cumsum(rng.normal(0.0, 0.4, seconds)), 42.0, 178.0)
    hr = np.interp(ts / MICROS, np.arange(seconds), anchors)
    hr = np.round(np.clip(hr + rng.normal(0.0, 0.25, n), 40.0, 180.0), 3)
    accel = np.round(rng.normal((0.0, 0.0, 9.81), 0.05, (n, 3)), 5)
    gyro = np.round(rng.normal(0.0, 0.02, (n, 3)), 5)
    mag = np.round(rng.normal((20.0, 0.0, 40.0), 0.3, (n, 3)), 5)
    return [
        WearableSample(int(t), float(h), tuple(a), tuple(g), tuple(m))
        for t, h, a, g, m in zip(ts.tolist(), hr.tolist(), accel.tolist(),
                                 gyro.tolist(), mag.tolist())
    ]


def _pose_stream(rng, profile, duration_us: int,
                 deviation_us: Sequence[tuple[int, int]]) -> list[HeadPoseSample]:
    step = MICROS // int(POSE_RATE_HZ)
    ts = np.arange(0, duration_us, step, dtype=np.int64)
    n = len(ts)
    yaw = (_sinusoid(n, POSE_RATE_HZ, 8.0, 90.0, float(rng.uniform(0, 6)))
           + rng.normal(0.0, 2.0, n))
    for a, b in deviation_us:
        mask = (ts >= a) & (ts < b)
        side = 1.0 if rng.uniform() < 0.5 else -1.0
        yaw[mask] = side * (55.0 + rng.normal(0.0, 3.0, int(mask.sum())))
    pitch = _sinusoid(n, POSE_RATE_HZ, 5.0, 70.0, float(rng.uniform(0, 6))) \
        + rng.normal(0.0, 1.5, n) - 8.0
    roll = rng.normal(0.0, 1.0, n)
    yaw = np.round(np.clip(yaw, -180.0, 180.0), 3)
    pitch = np.round(np.clip(pitch, -180.0, 180.0), 3)
    roll = np.round(np.clip(roll, -180.0, 180.0), 3)
    return [HeadPoseSample(int(t), float(p), float(r), float(y))
            for t, p, r, y in zip(ts.tolist(), pitch.tolist(), roll.tolist(),
                                  yaw.tolist())]


def _face_stream(rng, duration_us: int,
                 absent_us: Sequence[tuple[int, int]]) -> list[FaceSample]:
    step = MICROS // int(FACE_RATE_HZ)
    ts = np.arange(0, duration_us, step, dtype=np.int64)
    n = len(ts)
    present = ~_mask_for(ts, absent_us)
    size = np.round(np.clip(rng.normal(175.0, 8.0, n), 0.0, None), 2)
    score = np.round(np.clip(rng.normal(0.93, 0.02, n), 0.0, 1.0), 4)
    return [
        FaceSample(int(t), float(s) if p else 0.0, float(a) if p else 0.0,
                   bool(p))
        for t, s, a, p in zip(ts.tolist(), size.tolist(), score.tolist(),
                              present.tolist())
    ]


# ---------------------------------------------------------------------------
# Session and cohort assembly
# ---------------------------------------------------------------------------

_SCREEN = (1920, 1080)
_WALL_CLOCK_BASE = datetime(2024, 3, 1, 9, 0, 0)


def _make_context(rng, seed: int, tasks: Sequence[TaskRecord],
                  identity: str, duration_s: float) -> ContextSnapshot:
    mac = ":".join(f"{b:02x}" for b in rng.integers(0, 256, 6))
    start = _WALL_CLOCK_BASE + timedelta(minutes=int(seed) * 17 % 600)
    answers = []
    for t in tasks:
        if t.group == "enrollment":
            answers.append((t.task_id, f"name: {identity}"))
        elif t.group == "writing":
            answers.append((t.task_id, " ".join(
                rng.choice(_WORDS, 8).tolist())))
        else:
            answers.append((t.task_id, rng.choice(("a", "b", "c", "d"))))
    return ContextSnapshot(
        computer_name=f"desk-{seed:03d}",
        private_ip=f"10.0.{seed % 250}.{(seed * 7) % 250 + 1}",
        public_ip=f"185.12.{seed % 250}.{(seed * 13) % 250 + 1}",
        mac=mac, os="Windows 10", architecture="x86_64",
        keyboard_language="en-US",
        screen_w=_SCREEN[0], screen_h=_SCREEN[1],
        free_memory=int(rng.integers(2, 6)) * 2**30,
        main_memory=16 * 2**30,
        start_time=start.isoformat(),
        finish_time=(start + timedelta(seconds=duration_s)).isoformat(),
        per_task_time=tuple((t.task_id, t.duration) for t in tasks),
        answers=tuple(answers),
    )


def generate_session(profile: UserBehaviorProfile,
                     task_plan: Sequence[TaskPlanItem] | None = None,
                     anomaly_plan: Sequence[AnomalyEvent] = (),
                     seed: int = 0,
                     attention_drop: float = ATTENTION_DROP_DEFAULT,
                     ) -> Session:
    """One full raw session for a profile.

    The returned session is *not* anonymized (it carries a synthetic
    identity) and not synchronized: each stream's timestamps sit on its own
    simulated device clock, with the true offset recorded in the descriptor
    so the sync stage can map them back.
    """
    plan = tuple(task_plan) if task_plan is not None else default_task_plan()
    if any(t.group not in ("enrollment", "writing", "multiple_choice")
           for t in plan):
        raise SynthError("task plan may only use the three capture groups")
    events_sorted = sorted(anomaly_plan, key=lambda a: a.start_s)
    for a, b in zip(events_sorted, events_sorted[1:]):
        if b.start_s < a.end_s:
            raise SynthError(f"overlapping anomaly intervals at {b.start_s}s")

    rng = np.random.default_rng(
        np.random.SeedSequence([_SESSION_SALT, profile.seed, seed]))
    duration_s = sum(t.duration_s for t in plan)
    duration_us = int(duration_s * MICROS)

    anomalies_us = [(int(a.start_s * MICROS), int(a.end_s * MICROS))
                    for a in events_sorted]
    gap_us = [(int(a.start_s * MICROS), int(a.end_s * MICROS))
              for a in events_sorted if a.kind in INPUT_GAP_KINDS]
    deviation_us = [(int(a.start_s * MICROS), int(a.end_s * MICROS))
                    for a in events_sorted if a.kind == "resource_use"]
    absent_us = [(int(a.start_s * MICROS), int(a.end_s * MICROS))
                 for a in events_sorted if a.kind == "absence"]

    tasks: list[TaskRecord] = []
    key_events: list[KeyEvent] = []
    mouse_events: list[MouseEvent] = []
    pos = [float(_SCREEN[0] // 2), float(_SCREEN[1] // 2)]
    t_cursor = 0
    for i, item in enumerate(plan):
        t0, t1 = t_cursor, t_cursor + int(item.duration_s * MICROS)
        task_id = f"task-{i + 1:02d}-{item.group}"
        if item.group == "enrollment":
            key_events.extend(_typing_events(rng, profile, ENROLLMENT_TEXT,
                                             t0, t1, gap_us, fill=False))
            mouse_events.extend(_mouse_task_events(rng, profile, t0, t1,
                                                   _SCREEN, pos, 2, gap_us))
            accuracy = 1.0
        elif item.group == "writing":
            key_events.extend(_typing_events(rng, profile, "", t0, t1,
                                             gap_us, fill=True))
            accuracy = round(float(rng.uniform(0.6, 1.0)), 2)
        else:
            mouse_events.extend(_mouse_task_events(rng, profile, t0, t1,
                                                   _SCREEN, pos, 4, gap_us))
            p_ok = float(np.clip(0.95 - 3.0 * profile.error_rate
                                 + rng.normal(0.0, 0.08), 0.2, 1.0))
            accuracy = float(rng.binomial(4, p_ok)) / 4.0
        tasks.append(TaskRecord(task_id, item.group, t0, t1, accuracy,
                                (t1 - t0) / MICROS))
        t_cursor = t1

    key_events.sort(key=lambda e: e.ts)
    mouse_events.sort(key=lambda e: e.ts)

    streams_data = {
        "keyboard": key_events,
        "mouse": mouse_events,
        "eeg_band": _eeg_stream(rng, profile, duration_us, anomalies_us,
                                attention_drop),
        "smartwatch": _watch_stream(rng, profile, duration_us),
        "head_pose": _pose_stream(rng, profile, duration_us, deviation_us),
        "face_biometrics": _face_stream(rng, duration_us, absent_us),
    }
    rates = {"keyboard": KEYBOARD_NOMINAL_HZ, "mouse": MOUSE_RATE_HZ,
             "eeg_band": EEG_RATE_HZ, "smartwatch": WATCH_RATE_HZ,
             "head_pose": POSE_RATE_HZ, "face_biometrics": FACE_RATE_HZ}

    descriptors = []
    samples: dict[str, tuple] = {}
    for kind, data in streams_data.items():
        sid = kind.replace("_", "-")
        offset = int(rng.integers(-100_000, 100_001))
        descriptors.append(StreamDescriptor(
            stream_id=sid, kind=kind, nominal_rate_hz=rates[kind],
            clock_offset_micros=offset))
        # shift onto the simulated device clock; sync adds the offset back
        samples[sid] = tuple(
            type(s)(**{**_fields_of(s), "ts": s.ts - offset}) for s in data)

    identity = f"participant-{profile.seed:03d}"
    labels = tuple(AnomalyLabel(int(a.start_s * MICROS),
                                int(a.end_s * MICROS), a.kind)
                   for a in events_sorted)
    manifest = SessionManifest(
        session_id=f"sess-{profile.seed:03d}-{seed:04d}",
        user_id=None,
        demographics=Demographics(
            age=int(rng.integers(18, 46)),
            gender=str(rng.choice(("female", "male"))),
            handedness=str(rng.choice(("right", "right", "right", "left")))),
        context=_make_context(rng, profile.seed, tasks, identity, duration_s),
        streams=tuple(descriptors),
        tasks=tuple(tasks),
        anomaly_labels=labels,
        cheater_flag=bool(labels),
        identity=identity,
    )
    return Session(manifest, samples)


def _fields_of(sample) -> dict:
    return {f: getattr(sample, f) for f in sample.__dataclass_fields__}


def generate_cohort(n_users: int = 20, n_cheaters: int = 10, seed: int = 0,
                    task_plan: Sequence[TaskPlanItem] | None = None,
                    separation: SeparationConfig = SeparationConfig(k=3.0),
                    ) -> list[Session]:
    """Anonymized sessions for ``n_users``, the first ``n_cheaters`` of which
    carry injected anomalies and ground-truth labels."""
    if n_cheaters > n_users:
        raise SynthError("n_cheaters cannot exceed n_users")
    plan = tuple(task_plan) if task_plan is not None else default_task_plan()
    identity_map = {f"participant-{u:03d}": u for u in range(1, n_users + 1)}
    sessions = []
    for i in range(n_users):
        profile = generate_profile(i + 1, separation)
        anomaly_plan = default_anomaly_plan(plan) if i < n_cheaters else ()
        session = generate_session(profile, plan, anomaly_plan, seed=seed)
        sessions.append(anonymize_session(session, identity_map))
    return sessions
