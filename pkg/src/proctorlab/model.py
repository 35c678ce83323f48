"""Domain model for monitored evaluation sessions.

A session bundles everything one examinee produced on one desk setup:
a manifest (who, when, with which sensors, which tasks, which ground-truth
anomaly labels) plus the inline sample streams keyed by stream id.

Timestamps are integer microseconds throughout. Before synchronization a
sample's ``ts`` is on the sending device's own clock ("raw time"); after
synchronization it is on the unified session timeline whose origin is the
session start ("session time", always >= 0). ``SessionManifest.synchronized``
records which state a session is in.

All types are immutable values; validation never mutates and never raises
for content problems — violations are collected into a report.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping

MICROS_PER_SECOND = 1_000_000

# Stream taxonomy. Media kinds reference opaque external files (video/audio
# payloads are never decoded here); event kinds carry discrete event records;
# sampled kinds carry fixed-rate numeric samples.
MEDIA_STREAM_KINDS = frozenset({
    "front_camera", "side_camera", "cenital_camera", "nir_camera",
    "depth_camera", "desktop_capture", "microphone",
})
EVENT_STREAM_KINDS = frozenset({"keyboard", "mouse", "context_probe"})
SAMPLED_STREAM_KINDS = frozenset({
    "eeg_band", "smartwatch", "head_pose", "face_biometrics",
})
STREAM_KINDS = MEDIA_STREAM_KINDS | EVENT_STREAM_KINDS | SAMPLED_STREAM_KINDS

KEY_ACTIONS = frozenset({"press", "release"})
MOUSE_KINDS = frozenset({"move", "press", "release", "wheel", "drag"})
MOUSE_BUTTONS = frozenset({"left", "right", "middle", "none"})
TASK_GROUPS = frozenset({"enrollment", "writing", "multiple_choice"})
ANOMALY_KINDS = frozenset({"phone_use", "resource_use", "absence", "other"})
GENDERS = frozenset({"female", "male", "other", "undisclosed"})
HANDEDNESS = frozenset({"left", "right"})

# Band labels are configuration, not hard-coded science: stored positionally
# in each sample, named in the manifest.
DEFAULT_EEG_BAND_LABELS = ("delta", "theta", "alpha", "beta", "gamma")
N_EEG_BANDS = 5

_MAC_RE = re.compile(r"^[0-9A-Fa-f]{2}(:[0-9A-Fa-f]{2}){5}$")


class DomainError(Exception):
    """Base class for all domain-level failures in this package."""


class AnonymizationError(DomainError):
    """Identity missing from the identity map, or manifest not anonymizable."""


# ---------------------------------------------------------------------------
# Sample types (one dataclass per Table-style sensor record)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class KeyEvent:
    """One key press or release. ``key_code`` is a layout-neutral name."""
    ts: int
    key_code: str
    action: str  # press | release


@dataclass(frozen=True, slots=True)
class MouseEvent:
    """One pointer event: move, press/release, drag or wheel spin."""
    ts: int
    kind: str  # move | press | release | wheel | drag
    x: int
    y: int
    button: str = "none"  # left | right | middle | none
    wheel_delta: int = 0  # signed detents, nonzero iff kind == wheel


@dataclass(frozen=True, slots=True)
class EEGSample:
    """Headset output: five band powers plus 0-100 mental-state indices."""
    ts: int
    band_power: tuple[float, ...]  # exactly 5 entries, device units, >= 0
    attention: float  # [0, 100]
    meditation: float  # [0, 100]
    blink_strength: float | None = None  # >= 0 when a blink was detected


@dataclass(frozen=True, slots=True)
class WearableSample:
    """Smartwatch record: optical pulse plus inertial sensor triplets."""
    ts: int
    heart_rate_bpm: float | None
    accel: tuple[float, float, float]  # m/s^2
    gyro: tuple[float, float, float]   # rad/s
    mag: tuple[float, float, float]    # microtesla


@dataclass(frozen=True, slots=True)
class HeadPoseSample:
    """Precomputed head orientation in degrees, each angle in [-180, 180]."""
    ts: int
    pitch: float
    roll: float
    yaw: float


@dataclass(frozen=True, slots=True)
class FaceSample:
    """Precomputed face-detector output for one frame."""
    ts: int
    face_size_px: float
    auth_score: float  # [0, 1], meaningful only when face_present
    face_present: bool


@dataclass(frozen=True, slots=True)
class Demographics:
    age: int
    gender: str
    handedness: str  # left | right


@dataclass(frozen=True, slots=True)
class ContextSnapshot:
    """Computer and test metadata captured by the context probe."""
    computer_name: str
    private_ip: str
    public_ip: str
    mac: str
    os: str
    architecture: str
    keyboard_language: str
    screen_w: int
    screen_h: int
    free_memory: int  # bytes
    main_memory: int  # bytes
    start_time: str   # wall clock, ISO 8601
    finish_time: str
    per_task_time: tuple[tuple[str, float], ...] = ()  # (task_id, seconds)
    answers: tuple[tuple[str, str], ...] = ()          # (task_id, answer text)


@dataclass(frozen=True, slots=True)
class StreamDescriptor:
    stream_id: str
    kind: str
    nominal_rate_hz: float | None = None  # None for pure event streams
    payload: str = "inline_samples"       # inline_samples | external_file
    clock_offset_micros: int = 0          # session = raw + offset (+ drift term)
    clock_drift_ppm: float = 0.0
    media_ref: str | None = None          # relative path, external_file only


@dataclass(frozen=True, slots=True)
class TaskRecord:
    task_id: str
    group: str  # enrollment | writing | multiple_choice
    start: int  # session time, micros
    end: int
    accuracy: float   # fraction of correct responses, [0, 1]
    duration: float   # seconds, == (end - start) / 1e6


@dataclass(frozen=True, slots=True)
class AnomalyLabel:
    """Ground-truth interval during which a non-allowed activity occurred."""
    start: int
    end: int
    kind: str  # phone_use | resource_use | absence | other


@dataclass(frozen=True, slots=True)
class SessionManifest:
    session_id: str
    user_id: int | None
    demographics: Demographics | None
    context: ContextSnapshot | None
    streams: tuple[StreamDescriptor, ...]
    tasks: tuple[TaskRecord, ...] = ()
    anomaly_labels: tuple[AnomalyLabel, ...] = ()
    cheater_flag: bool = False
    identity: str | None = None  # real identity; removed by anonymize()
    eeg_band_labels: tuple[str, ...] = DEFAULT_EEG_BAND_LABELS
    synchronized: bool = False


@dataclass(frozen=True)
class Session:
    """A manifest plus its inline sample streams.

    ``samples`` maps stream_id -> time-ordered tuple of sample objects for
    every inline-payload descriptor (possibly empty). Media streams have no
    entry; their payload stays an opaque file reference. Treat the mapping
    as immutable.
    """
    manifest: SessionManifest
    samples: Mapping[str, tuple[Any, ...]] = field(default_factory=dict)

    def stream(self, stream_id: str) -> tuple[Any, ...]:
        return self.samples.get(stream_id, ())

    def streams_of_kind(self, kind: str) -> list[StreamDescriptor]:
        return [d for d in self.manifest.streams if d.kind == kind]

    def events_of_kind(self, kind: str) -> tuple[Any, ...]:
        """Concatenated samples of every stream of ``kind`` (manifest order)."""
        out: list[Any] = []
        for d in self.streams_of_kind(kind):
            out.extend(self.samples.get(d.stream_id, ()))
        return tuple(out)

    def end_micros(self) -> int:
        """Last known instant: max of sample timestamps and task ends."""
        end = 0
        for samples in self.samples.values():
            if samples:
                end = max(end, samples[-1].ts)
        for task in self.manifest.tasks:
            end = max(end, task.end)
        return end


SAMPLE_TYPE_BY_KIND: dict[str, type] = {
    "keyboard": KeyEvent,
    "mouse": MouseEvent,
    "eeg_band": EEGSample,
    "smartwatch": WearableSample,
    "head_pose": HeadPoseSample,
    "face_biometrics": FaceSample,
}


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Violation:
    path: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def messages(self) -> list[str]:
        return [f"{v.path}: {v.message}" for v in self.violations]


class _Collector:
    def __init__(self) -> None:
        self.items: list[Violation] = []

    def add(self, path: str, message: str) -> None:
        self.items.append(Violation(path, message))

    def check(self, cond: bool, path: str, message: str) -> None:
        if not cond:
            self.add(path, message)

    def report(self) -> ValidationReport:
        return ValidationReport(tuple(self.items))


def _validate_demographics(d: Demographics, path: str, col: _Collector) -> None:
    col.check(d.age > 0, f"{path}.age", "age must be > 0")
    col.check(d.gender in GENDERS, f"{path}.gender", f"unknown gender {d.gender!r}")
    col.check(d.handedness in HANDEDNESS, f"{path}.handedness",
              "handedness must be 'left' or 'right'")


def _validate_context(c: ContextSnapshot, path: str, col: _Collector) -> None:
    col.check(c.finish_time >= c.start_time, f"{path}.finish_time",
              "finish_time before start_time")
    col.check(c.free_memory <= c.main_memory, f"{path}.free_memory",
              "free_memory exceeds main_memory")
    col.check(bool(_MAC_RE.match(c.mac)), f"{path}.mac",
              f"malformed MAC address {c.mac!r}")
    col.check(c.screen_w > 0 and c.screen_h > 0, f"{path}.screen",
              "screen resolution must be positive")


def _validate_descriptor(d: StreamDescriptor, path: str, col: _Collector) -> None:
    col.check(d.kind in STREAM_KINDS, f"{path}.kind", f"unknown stream kind {d.kind!r}")
    if d.nominal_rate_hz is not None:
        col.check(d.nominal_rate_hz > 0, f"{path}.nominal_rate_hz",
                  "nominal_rate_hz must be > 0 when present")
    col.check(d.payload in ("inline_samples", "external_file"), f"{path}.payload",
              f"unknown payload {d.payload!r}")
    if d.kind in MEDIA_STREAM_KINDS:
        col.check(d.payload == "external_file", f"{path}.payload",
                  "media streams must use external_file payload")
        col.check(d.media_ref is not None, f"{path}.media_ref",
                  "media streams must carry a file reference")
    else:
        col.check(d.payload == "inline_samples", f"{path}.payload",
                  "non-media streams must use inline_samples payload")


def _validate_task(t: TaskRecord, path: str, col: _Collector) -> None:
    col.check(t.group in TASK_GROUPS, f"{path}.group", f"unknown task group {t.group!r}")
    col.check(t.end > t.start, f"{path}.end", "task end must be after start")
    expected = (t.end - t.start) / MICROS_PER_SECOND
    col.check(abs(t.duration - expected) <= 1e-9 * max(1.0, abs(expected)),
              f"{path}.duration", "duration does not equal end - start")
    col.check(0.0 <= t.accuracy <= 1.0, f"{path}.accuracy", "accuracy out of [0,1]")


def _validate_key_stream(samples: tuple[Any, ...], path: str, col: _Collector) -> None:
    down: dict[str, int] = {}
    for i, ev in enumerate(samples):
        p = f"{path}[{i}]"
        col.check(ev.action in KEY_ACTIONS, p, f"unknown key action {ev.action!r}")
        if ev.action == "press":
            down[ev.key_code] = down.get(ev.key_code, 0) + 1
        elif ev.action == "release":
            if down.get(ev.key_code, 0) <= 0:
                col.add(p, f"release of {ev.key_code!r} without preceding press")
            else:
                down[ev.key_code] -= 1


def _validate_mouse_stream(samples: tuple[Any, ...], path: str,
                           context: ContextSnapshot | None, col: _Collector) -> None:
    down: dict[str, int] = {}
    for i, ev in enumerate(samples):
        p = f"{path}[{i}]"
        col.check(ev.kind in MOUSE_KINDS, p, f"unknown mouse kind {ev.kind!r}")
        col.check(ev.button in MOUSE_BUTTONS, p, f"unknown button {ev.button!r}")
        if context is not None:
            col.check(0 <= ev.x < context.screen_w and 0 <= ev.y < context.screen_h,
                      p, f"coordinates ({ev.x},{ev.y}) outside screen")
        col.check((ev.wheel_delta != 0) == (ev.kind == "wheel"), p,
                  "wheel_delta must be nonzero iff kind is wheel")
        col.check((ev.button != "none") == (ev.kind in ("press", "release", "drag")),
                  p, "button must be set iff kind is press/release/drag")
        if ev.kind == "press":
            down[ev.button] = down.get(ev.button, 0) + 1
        elif ev.kind == "release":
            if down.get(ev.button, 0) <= 0:
                col.add(p, f"release of button {ev.button!r} without preceding press")
            else:
                down[ev.button] -= 1


def _validate_samples(kind: str, samples: tuple[Any, ...], path: str,
                      context: ContextSnapshot | None, synchronized: bool,
                      col: _Collector) -> None:
    expected_type = SAMPLE_TYPE_BY_KIND.get(kind)
    last_ts: int | None = None
    for i, s in enumerate(samples):
        p = f"{path}[{i}]"
        if expected_type is not None and not isinstance(s, expected_type):
            col.add(p, f"expected {expected_type.__name__}, got {type(s).__name__}")
            continue
        if last_ts is not None and s.ts < last_ts:
            col.add(p, "timestamps must be non-decreasing within a stream")
        last_ts = s.ts
        if synchronized:
            col.check(s.ts >= 0, p, "synchronized sample before session epoch")
        if kind == "eeg_band":
            col.check(len(s.band_power) == N_EEG_BANDS, p,
                      f"band_power must have exactly {N_EEG_BANDS} entries")
            col.check(all(b >= 0 for b in s.band_power), p, "band power must be >= 0")
            col.check(0.0 <= s.attention <= 100.0, p, "attention out of [0,100]")
            col.check(0.0 <= s.meditation <= 100.0, p, "meditation out of [0,100]")
            if s.blink_strength is not None:
                col.check(s.blink_strength >= 0, p, "blink_strength must be >= 0")
        elif kind == "smartwatch":
            if s.heart_rate_bpm is not None:
                col.check(20.0 < s.heart_rate_bpm < 250.0, p,
                          "heart_rate_bpm out of (20, 250)")
        elif kind == "head_pose":
            for name in ("pitch", "roll", "yaw"):
                col.check(-180.0 <= getattr(s, name) <= 180.0, p,
                          f"{name} out of [-180, 180]")
        elif kind == "face_biometrics":
            col.check(s.face_size_px >= 0, p, "face_size_px must be >= 0")
            col.check(0.0 <= s.auth_score <= 1.0, p, "auth_score out of [0,1]")
    if kind == "keyboard":
        _validate_key_stream(samples, path, col)
    elif kind == "mouse":
        _validate_mouse_stream(samples, path, context, col)


def validate_manifest(manifest: SessionManifest) -> ValidationReport:
    """Check every manifest-level invariant; returns an empty report iff clean.

    Pure: same manifest, same report. Violations are entries, never raises.
    """
    col = _Collector()
    if manifest.demographics is not None:
        _validate_demographics(manifest.demographics, "demographics", col)
    if manifest.context is not None:
        _validate_context(manifest.context, "context", col)

    seen_ids: set[str] = set()
    for i, d in enumerate(manifest.streams):
        path = f"streams[{i}]({d.stream_id})"
        if d.stream_id in seen_ids:
            col.add(path, f"duplicate stream_id {d.stream_id!r}")
        seen_ids.add(d.stream_id)
        _validate_descriptor(d, path, col)

    for i, t in enumerate(manifest.tasks):
        _validate_task(t, f"tasks[{i}]({t.task_id})", col)
    ordered = sorted(manifest.tasks, key=lambda t: (t.start, t.end))
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            col.add(f"tasks({b.task_id})",
                    f"overlapping tasks: {b.task_id} starts before {a.task_id} ends")

    for i, lab in enumerate(manifest.anomaly_labels):
        path = f"anomaly_labels[{i}]"
        col.check(lab.kind in ANOMALY_KINDS, path, f"unknown anomaly kind {lab.kind!r}")
        col.check(lab.end > lab.start, path, "label end must be after start")

    col.check(manifest.cheater_flag == bool(manifest.anomaly_labels), "cheater_flag",
              "cheater_flag must be true iff anomaly labels are present")
    col.check(len(manifest.eeg_band_labels) == N_EEG_BANDS, "eeg_band_labels",
              f"exactly {N_EEG_BANDS} band labels required")
    return col.report()


def validate_session(session: Session) -> ValidationReport:
    """Full check: manifest invariants plus every per-sample invariant.

    Covers sample ranges, per-stream timestamp ordering, press/release
    pairing for keys and mouse buttons, mouse-on-screen bounds, and
    label/sample agreement with session bounds.
    """
    col = _Collector()
    manifest = session.manifest
    col.items.extend(validate_manifest(manifest).violations)

    inline_ids = {d.stream_id: d for d in manifest.streams
                  if d.payload == "inline_samples"}
    for sid in session.samples:
        if sid not in inline_ids:
            col.add(f"samples({sid})", "samples for a stream the manifest does not "
                                       "declare as inline")
    for sid, d in inline_ids.items():
        _validate_samples(d.kind, session.stream(sid), f"samples({sid})",
                          manifest.context, manifest.synchronized, col)

    end = session.end_micros()
    for i, lab in enumerate(manifest.anomaly_labels):
        col.check(0 <= lab.start and lab.end <= end, f"anomaly_labels[{i}]",
                  "label interval outside session bounds")
    return col.report()


# ---------------------------------------------------------------------------
# Anonymization
# ---------------------------------------------------------------------------

def anonymize(manifest: SessionManifest,
              identity_map: Mapping[str, int]) -> SessionManifest:
    """Replace the real identity with its stable numeric id.

    The map must already contain the identity (same identity -> same id across
    sessions is the caller's contract); enrollment-task answer texts are
    redacted as well since that's where the typed personal data lives.
    Already-anonymized manifests pass through unchanged.
    """
    if manifest.identity is None:
        if manifest.user_id is None:
            raise AnonymizationError(
                f"session {manifest.session_id}: no identity and no user_id")
        return manifest
    if manifest.identity not in identity_map:
        raise AnonymizationError(
            f"identity {manifest.identity!r} missing from identity map; extend the map")
    user_id = identity_map[manifest.identity]
    context = manifest.context
    if context is not None and context.answers:
        enrollment_ids = {t.task_id for t in manifest.tasks if t.group == "enrollment"}
        answers = tuple((tid, "[redacted]" if tid in enrollment_ids else text)
                        for tid, text in context.answers)
        context = replace(context, answers=answers)
    return replace(manifest, user_id=user_id, identity=None, context=context)


def anonymize_session(session: Session,
                      identity_map: Mapping[str, int]) -> Session:
    return Session(anonymize(session.manifest, identity_map), session.samples)


# ---------------------------------------------------------------------------
# Plain-dict serialization (used by the wire protocol and the on-disk store)
# ---------------------------------------------------------------------------

def sample_to_dict(sample: Any) -> dict[str, Any]:
    d: dict[str, Any] = {}
    for f in fields(sample):
        v = getattr(sample, f.name)
        d[f.name] = list(v) if isinstance(v, tuple) else v
    return d


_TUPLE_FIELDS = {"band_power", "accel", "gyro", "mag"}


def sample_from_dict(kind: str, data: Mapping[str, Any]) -> Any:
    cls = SAMPLE_TYPE_BY_KIND.get(kind)
    if cls is None:
        raise DomainError(f"stream kind {kind!r} carries no inline samples")
    kwargs = {k: tuple(v) if k in _TUPLE_FIELDS and v is not None else v
              for k, v in data.items()}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise DomainError(f"bad {cls.__name__} record: {exc}") from None


def _context_to_dict(c: ContextSnapshot) -> dict[str, Any]:
    return {
        "computer_name": c.computer_name, "private_ip": c.private_ip,
        "public_ip": c.public_ip, "mac": c.mac, "os": c.os,
        "architecture": c.architecture, "keyboard_language": c.keyboard_language,
        "screen_w": c.screen_w, "screen_h": c.screen_h,
        "free_memory": c.free_memory, "main_memory": c.main_memory,
        "start_time": c.start_time, "finish_time": c.finish_time,
        "per_task_time": [[tid, secs] for tid, secs in c.per_task_time],
        "answers": [[tid, text] for tid, text in c.answers],
    }


def _context_from_dict(d: Mapping[str, Any]) -> ContextSnapshot:
    return ContextSnapshot(
        computer_name=d["computer_name"], private_ip=d["private_ip"],
        public_ip=d["public_ip"], mac=d["mac"], os=d["os"],
        architecture=d["architecture"], keyboard_language=d["keyboard_language"],
        screen_w=d["screen_w"], screen_h=d["screen_h"],
        free_memory=d["free_memory"], main_memory=d["main_memory"],
        start_time=d["start_time"], finish_time=d["finish_time"],
        per_task_time=tuple((tid, secs) for tid, secs in d.get("per_task_time", [])),
        answers=tuple((tid, text) for tid, text in d.get("answers", [])),
    )


def descriptor_to_dict(d: StreamDescriptor) -> dict[str, Any]:
    return {
        "stream_id": d.stream_id, "kind": d.kind,
        "nominal_rate_hz": d.nominal_rate_hz, "payload": d.payload,
        "clock_offset_micros": d.clock_offset_micros,
        "clock_drift_ppm": d.clock_drift_ppm, "media_ref": d.media_ref,
    }


def descriptor_from_dict(d: Mapping[str, Any]) -> StreamDescriptor:
    return StreamDescriptor(
        stream_id=d["stream_id"], kind=d["kind"],
        nominal_rate_hz=d.get("nominal_rate_hz"),
        payload=d.get("payload", "inline_samples"),
        clock_offset_micros=d.get("clock_offset_micros", 0),
        clock_drift_ppm=d.get("clock_drift_ppm", 0.0),
        media_ref=d.get("media_ref"),
    )


def manifest_to_dict(m: SessionManifest) -> dict[str, Any]:
    return {
        "session_id": m.session_id,
        "user_id": m.user_id,
        "identity": m.identity,
        "demographics": None if m.demographics is None else {
            "age": m.demographics.age, "gender": m.demographics.gender,
            "handedness": m.demographics.handedness,
        },
        "context": None if m.context is None else _context_to_dict(m.context),
        "streams": [descriptor_to_dict(d) for d in m.streams],
        "tasks": [{
            "task_id": t.task_id, "group": t.group, "start": t.start,
            "end": t.end, "accuracy": t.accuracy, "duration": t.duration,
        } for t in m.tasks],
        "anomaly_labels": [{"start": a.start, "end": a.end, "kind": a.kind}
                           for a in m.anomaly_labels],
        "cheater_flag": m.cheater_flag,
        "eeg_band_labels": list(m.eeg_band_labels),
        "synchronized": m.synchronized,
    }


def manifest_from_dict(d: Mapping[str, Any]) -> SessionManifest:
    demo = d.get("demographics")
    ctx = d.get("context")
    return SessionManifest(
        session_id=d["session_id"],
        user_id=d.get("user_id"),
        demographics=None if demo is None else Demographics(
            age=demo["age"], gender=demo["gender"], handedness=demo["handedness"]),
        context=None if ctx is None else _context_from_dict(ctx),
        streams=tuple(descriptor_from_dict(s) for s in d["streams"]),
        tasks=tuple(TaskRecord(
            task_id=t["task_id"], group=t["group"], start=t["start"],
            end=t["end"], accuracy=t["accuracy"], duration=t["duration"],
        ) for t in d.get("tasks", [])),
        anomaly_labels=tuple(AnomalyLabel(
            start=a["start"], end=a["end"], kind=a["kind"],
        ) for a in d.get("anomaly_labels", [])),
        cheater_flag=d.get("cheater_flag", False),
        identity=d.get("identity"),
        eeg_band_labels=tuple(d.get("eeg_band_labels", DEFAULT_EEG_BAND_LABELS)),
        synchronized=d.get("synchronized", False),
    )
