"""The five monitoring challenges: dataset builders, rule/floor baselines,
and their evaluation protocols.

Challenge targets and inputs (webcam video itself is out of scope; the
precomputed head-pose and face-biometrics streams stand in for the
camera-derived features):

1. attention      — predict the 0-100 attention index per window from
                    keyboard/mouse/head-pose behavior.
2. anomaly        — flag intervals of non-allowed activity; ground truth is
                    the labeled cheating periods.
3. performance    — predict per-task accuracy from behavior during the task.
4. authentication — verify user identity from keystroke dynamics; enroll on
                    the fixed-text enrollment task, probe with each writing
                    task (leave-one-task-out), everyone else is an impostor.
5. pulse          — predict the smartwatch heart rate per window from the
                    camera-derived placeholder series.

The shipped baselines are deliberately floors: rule detectors, scaled
nearest-template verification, and constant regressors evaluated
leave-one-session-out. Contributed models plug in through the same
datasets and must beat them.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .features import (
    FixedTextTemplate,
    KeystrokeFeatures,
    keystroke_features,
    mouse_features,
    physio_aggregate,
)
from .metrics import (
    IntervalMatch,
    MetricError,
    ScoreSet,
    compute_eer,
    interval_f1,
)
from .model import DomainError, Session, TaskRecord
from .sync import window_session

MICROS = 1_000_000


class ChallengeError(DomainError):
    pass


@dataclass(frozen=True)
class ChallengeSpec:
    id: int
    name: str
    target_stream: str
    input_kinds_basic: frozenset[str]
    input_kinds_advanced: frozenset[str]


_CAMERA_DERIVED = frozenset({"head_pose", "face_biometrics"})
_BEHAVIOR = frozenset({"keyboard", "mouse"})

CHALLENGES: dict[int, ChallengeSpec] = {
    1: ChallengeSpec(1, "attention", "eeg_band",
                     _BEHAVIOR | frozenset({"head_pose"}),
                     _BEHAVIOR | _CAMERA_DERIVED),
    2: ChallengeSpec(2, "anomaly", "anomaly_labels",
                     _BEHAVIOR | _CAMERA_DERIVED,
                     _BEHAVIOR | _CAMERA_DERIVED),
    3: ChallengeSpec(3, "performance", "task_records",
                     _BEHAVIOR | _CAMERA_DERIVED,
                     _BEHAVIOR | _CAMERA_DERIVED
                     | frozenset({"smartwatch", "eeg_band"})),
    4: ChallengeSpec(4, "authentication", "identity",
                     _BEHAVIOR,
                     _BEHAVIOR | frozenset({"smartwatch", "eeg_band"})),
    5: ChallengeSpec(5, "pulse", "smartwatch",
                     frozenset({"face_biometrics"}),
                     frozenset({"face_biometrics"})),
}


@dataclass(frozen=True)
class WindowingConfig:
    window_s: float = 10.0
    hop_s: float = 5.0


@dataclass(frozen=True)
class ChallengeRow:
    session_id: str
    user_id: int | None
    key: str  # window span or task id
    features: dict[str, float]
    target: Any
    payload: Any = None  # rich per-row object (keystroke features for C4)


@dataclass(frozen=True)
class ChallengeDataset:
    challenge: ChallengeSpec
    rows: tuple[ChallengeRow, ...]
    skipped: tuple[tuple[str, str], ...] = ()  # (session_id, reason)


# ---------------------------------------------------------------------------
# Per-window and per-task feature vectors
# ---------------------------------------------------------------------------

def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _kb_features(events: Sequence) -> dict[str, float]:
    kf = keystroke_features(events)
    return {
        "kb.n_events": float(len(events)),
        "kb.keys_per_second": kf.keys_per_second,
        "kb.mean_hold_ms": _mean([h for _k, h in kf.hold_times]),
        "kb.mean_pp_ms": _mean([v for _d, v in kf.digraph_pp]),
        "kb.backspace_rate": kf.backspace_rate,
    }


def _ms_features(events: Sequence) -> dict[str, float]:
    mf = mouse_features(events)
    speeds = [v for _t, v in mf.velocities]
    return {
        "ms.n_events": float(len(events)),
        "ms.mean_velocity": _mean(speeds),
        "ms.max_velocity": max(speeds) if speeds else 0.0,
        "ms.path_length": mf.path_length,
        "ms.mean_curvature": mf.mean_curvature,
        "ms.n_clicks": float(len(mf.click_durations)),
        "ms.mean_click_ms": _mean(mf.click_durations),
        "ms.n_wheel": float(mf.wheel_events),
        "ms.idle_fraction": mf.idle_fraction,
    }


def _pose_features(samples: Sequence) -> dict[str, float]:
    if not samples:
        return {"hp.mean_abs_yaw": 0.0, "hp.std_yaw": 0.0, "hp.mean_pitch": 0.0}
    yaw = np.array([s.yaw for s in samples])
    pitch = np.array([s.pitch for s in samples])
    return {
        "hp.mean_abs_yaw": float(np.mean(np.abs(yaw))),
        "hp.std_yaw": float(np.std(yaw)),
        "hp.mean_pitch": float(np.mean(pitch)),
    }


def _face_features(samples: Sequence) -> dict[str, float]:
    if not samples:
        return {"fb.present_fraction": 0.0, "fb.mean_face_size": 0.0,
                "fb.mean_auth_score": 0.0}
    present = [s for s in samples if s.face_present]
    return {
        "fb.present_fraction": len(present) / len(samples),
        "fb.mean_face_size": _mean([s.face_size_px for s in present]),
        "fb.mean_auth_score": _mean([s.auth_score for s in present]),
    }


class _StreamIndex:
    """Bisectable view over one session's streams, by kind."""

    def __init__(self, session: Session):
        self.session = session
        self._by_kind: dict[str, tuple[list[int], tuple]] = {}
        for kind in ("keyboard", "mouse", "eeg_band", "smartwatch",
                     "head_pose", "face_biometrics"):
            samples = session.events_of_kind(kind)
            self._by_kind[kind] = ([s.ts for s in samples], samples)

    def has(self, kind: str) -> bool:
        return bool(self._by_kind[kind][1])

    def slice(self, kind: str, start: int, end: int) -> tuple:
        ts, samples = self._by_kind[kind]
        lo = bisect.bisect_left(ts, start)
        hi = bisect.bisect_left(ts, end)
        return samples[lo:hi]


def _interval_features(idx: _StreamIndex, start: int, end: int,
                       kinds: frozenset[str],
                       advanced_physio: bool) -> dict[str, float]:
    feats: dict[str, float] = {}
    if "keyboard" in kinds:
        feats.update(_kb_features(idx.slice("keyboard", start, end)))
    if "mouse" in kinds:
        feats.update(_ms_features(idx.slice("mouse", start, end)))
    if "head_pose" in kinds:
        feats.update(_pose_features(idx.slice("head_pose", start, end)))
    if "face_biometrics" in kinds:
        feats.update(_face_features(idx.slice("face_biometrics", start, end)))
    if advanced_physio:
        agg = physio_aggregate(idx.slice("eeg_band", start, end),
                               idx.slice("smartwatch", start, end),
                               (start, end))
        feats.update({
            "ph.mean_attention": agg.mean_attention if agg.mean_attention
            is not None else 0.0,
            "ph.mean_meditation": agg.mean_meditation if agg.mean_meditation
            is not None else 0.0,
            "ph.mean_hr_bpm": agg.mean_hr_bpm if agg.mean_hr_bpm is not None
            else 0.0,
            "ph.std_hr_bpm": agg.std_hr_bpm if agg.std_hr_bpm is not None
            else 0.0,
            "ph.blink_count": float(agg.blink_count or 0),
        })
    return feats


def _overlaps_label(session: Session, start: int, end: int) -> bool:
    return any(lab.start < end and start < lab.end
               for lab in session.manifest.anomaly_labels)


def build_challenge_dataset(sessions: Iterable[Session],
                            spec: ChallengeSpec | int,
                            windowing: WindowingConfig = WindowingConfig(),
                            advanced: bool = False) -> ChallengeDataset:
    """Realize one challenge as (input features, target) rows.

    Challenges 1, 2 and 5 produce one row per analysis window; 3 and 4
    produce one row per task. Sessions that are not synchronized or miss a
    required stream are skipped and listed in ``skipped``.
    """
    if isinstance(spec, int):
        spec = CHALLENGES[spec]
    kinds = spec.input_kinds_advanced if advanced else spec.input_kinds_basic
    rows: list[ChallengeRow] = []
    skipped: list[tuple[str, str]] = []
    for session in sessions:
        m = session.manifest
        if not m.synchronized:
            skipped.append((m.session_id, "session not synchronized"))
            continue
        idx = _StreamIndex(session)
        # each inner group needs at least one non-empty member
        required = {1: [("eeg_band",), ("keyboard", "mouse")],
                    2: [("keyboard", "mouse")],
                    3: [("keyboard", "mouse")],
                    4: [("keyboard",)],
                    5: [("smartwatch",), ("face_biometrics",)]}[spec.id]
        missing = [group for group in required
                   if not any(idx.has(k) for k in group)]
        if missing:
            names = "; ".join(" or ".join(g) for g in missing)
            skipped.append((m.session_id, f"missing stream(s): {names}"))
            continue
        if spec.id in (1, 2, 5):
            rows.extend(_window_rows(session, idx, spec, kinds, windowing,
                                     advanced))
        elif spec.id == 3:
            rows.extend(_task_rows(session, idx, kinds, advanced))
        else:
            rows.extend(_auth_rows(session, idx))
    return ChallengeDataset(spec, tuple(rows), tuple(skipped))


def _window_rows(session: Session, idx: _StreamIndex, spec: ChallengeSpec,
                 kinds: frozenset[str], windowing: WindowingConfig,
                 advanced: bool) -> list[ChallengeRow]:
    m = session.manifest
    rows = []
    for w in window_session(session, windowing.window_s, windowing.hop_s):
        if spec.id == 1:
            eeg = idx.slice("eeg_band", w.start, w.end)
            if not eeg:
                continue
            target: Any = _mean([s.attention for s in eeg])
        elif spec.id == 2:
            target = _overlaps_label(session, w.start, w.end)
        else:
            hr = [s.heart_rate_bpm for s in
                  idx.slice("smartwatch", w.start, w.end)
                  if s.heart_rate_bpm is not None]
            if not hr:
                continue
            target = _mean(hr)
        feats = _interval_features(idx, w.start, w.end, kinds, advanced)
        rows.append(ChallengeRow(m.session_id, m.user_id,
                                 f"w{w.start}-{w.end}", feats, target))
    return rows


def _task_rows(session: Session, idx: _StreamIndex, kinds: frozenset[str],
               advanced: bool) -> list[ChallengeRow]:
    m = session.manifest
    return [
        ChallengeRow(m.session_id, m.user_id, t.task_id,
                     _interval_features(idx, t.start, t.end, kinds, advanced),
                     t.accuracy)
        for t in m.tasks
    ]


def _auth_rows(session: Session, idx: _StreamIndex) -> list[ChallengeRow]:
    m = session.manifest
    rows = []
    for t in m.tasks:
        if t.group == "multiple_choice":
            continue
        events = idx.slice("keyboard", t.start, t.end)
        if not events:
            continue
        kf = keystroke_features(events)
        rows.append(ChallengeRow(
            m.session_id, m.user_id, t.task_id,
            {"role": 0.0 if t.group == "enrollment" else 1.0},
            m.user_id, payload=(t.group, kf)))
    return rows


# ---------------------------------------------------------------------------
# Keystroke verification
# ---------------------------------------------------------------------------

MIN_OVERLAP = 5


def _profile_stats(kf: KeystrokeFeatures) -> tuple[dict, dict, float, float]:
    holds: dict[str, list[float]] = {}
    for key, ms in kf.hold_times:
        holds.setdefault(key, []).append(ms)
    pps: dict[tuple[str, str], list[float]] = {}
    for pair, ms in kf.digraph_pp:
        pps.setdefault(pair, []).append(ms)
    all_holds = [ms for _k, ms in kf.hold_times]
    all_pps = [ms for _p, ms in kf.digraph_pp]
    pooled_hold = float(np.std(all_holds)) if len(all_holds) > 1 else 1.0
    pooled_pp = float(np.std(all_pps)) if len(all_pps) > 1 else 1.0
    hold_stats = {k: (float(np.mean(v)), float(np.std(v)), len(v))
                  for k, v in holds.items()}
    pp_stats = {p: (float(np.mean(v)), float(np.std(v)), len(v))
                for p, v in pps.items()}
    return hold_stats, pp_stats, max(pooled_hold, 1.0), max(pooled_pp, 1.0)


def verify_keystroke(enrolled: KeystrokeFeatures | FixedTextTemplate,
                     probe: KeystrokeFeatures | FixedTextTemplate,
                     min_overlap: int = MIN_OVERLAP) -> float:
    """Similarity score in [0, 1]: ``1 / (1 + d)`` where ``d`` is the mean
    per-dimension absolute deviation scaled by the enrollment dispersion.

    Shared dimensions are the hold/digraph entries present on both sides
    (for feature profiles) or the positions unmasked in both templates (for
    same-reference fixed-text templates). Fewer than ``min_overlap`` shared
    dimensions is an error: the comparison would be meaningless.
    """
    if isinstance(enrolled, FixedTextTemplate) and \
            isinstance(probe, FixedTextTemplate):
        if enrolled.reference_text != probe.reference_text:
            raise ChallengeError("templates are for different reference texts")
        shared = [i for i, (a, b) in enumerate(zip(enrolled.mask, probe.mask))
                  if a and b]
        if len(shared) < min_overlap:
            raise MetricError(f"insufficient overlap: {len(shared)} shared "
                              f"dimensions, need {min_overlap}")
        e_vals = [enrolled.digraph_ms[i] for i in shared]
        dispersion = max(float(np.std(e_vals)), 1.0)
        d = _mean([abs(enrolled.digraph_ms[i] - probe.digraph_ms[i])
                   / dispersion for i in shared])
        return 1.0 / (1.0 + d)

    if isinstance(enrolled, KeystrokeFeatures) and \
            isinstance(probe, KeystrokeFeatures):
        e_hold, e_pp, pooled_hold, pooled_pp = _profile_stats(enrolled)
        p_hold, p_pp, _ph, _pp2 = _profile_stats(probe)
        deviations = []
        for key in sorted(set(e_hold) & set(p_hold)):
            mean_e, std_e, n = e_hold[key]
            s = std_e if (n >= 2 and std_e >= 1.0) else pooled_hold
            deviations.append(abs(mean_e - p_hold[key][0]) / s)
        for pair in sorted(set(e_pp) & set(p_pp)):
            mean_e, std_e, n = e_pp[pair]
            s = std_e if (n >= 2 and std_e >= 1.0) else pooled_pp
            deviations.append(abs(mean_e - p_pp[pair][0]) / s)
        if len(deviations) < min_overlap:
            raise MetricError(f"insufficient overlap: {len(deviations)} shared "
                              f"dimensions, need {min_overlap}")
        return 1.0 / (1.0 + _mean(deviations))

    raise ChallengeError("enrolled and probe must be the same feature type")


def authentication_scores(sessions: Sequence[Session],
                          min_overlap: int = MIN_OVERLAP) -> ScoreSet:
    """Leave-one-task-out verification scores over a cohort.

    Enrollment task -> template; each writing task -> probe. Genuine pairs
    share the user id; every other user's enrollment is an impostor match.
    """
    dataset = build_challenge_dataset(sessions, 4)
    enrollments: dict[int, KeystrokeFeatures] = {}
    probes: list[tuple[int, KeystrokeFeatures]] = []
    for row in dataset.rows:
        group, kf = row.payload
        if group == "enrollment":
            enrollments[row.user_id] = kf
        else:
            probes.append((row.user_id, kf))
    if not enrollments or not probes:
        raise ChallengeError("cohort has no usable enrollment/probe tasks")
    genuine, impostor = [], []
    for user_id, probe_kf in probes:
        for enroll_id, enroll_kf in enrollments.items():
            try:
                score = verify_keystroke(enroll_kf, probe_kf, min_overlap)
            except MetricError:
                continue
            (genuine if enroll_id == user_id else impostor).append(score)
    return ScoreSet(tuple(genuine), tuple(impostor), higher_is_genuine=True)


# ---------------------------------------------------------------------------
# Rule-based anomaly detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnomalyRuleConfig:
    inactivity_s: float = 10.0  # no key/mouse input during a writing task
    yaw_deg: float = 35.0       # sustained looking away
    sustain_s: float = 3.0
    merge: bool = True


@dataclass(frozen=True)
class DetectionInterval:
    start: int
    end: int
    rule: str
    confidence: float = 1.0


@dataclass(frozen=True)
class AnomalyScan:
    detections: tuple[DetectionInterval, ...]
    disabled_rules: tuple[str, ...] = ()


def _inactivity_detections(idx: _StreamIndex, tasks: Sequence[TaskRecord],
                           threshold_s: float) -> list[DetectionInterval]:
    out = []
    threshold_us = threshold_s * MICROS
    for task in tasks:
        if task.group != "writing":
            continue
        ts = sorted([e.ts for e in idx.slice("keyboard", task.start, task.end)]
                    + [e.ts for e in idx.slice("mouse", task.start, task.end)])
        points = [task.start] + ts + [task.end]
        for a, b in zip(points, points[1:]):
            if b - a > threshold_us:
                out.append(DetectionInterval(
                    a, b, "inactivity",
                    min(1.0, (b - a) / (2 * threshold_us))))
    return out


def _sustained_runs(samples: Sequence, flag, sustain_s: float, rule: str
                    ) -> list[DetectionInterval]:
    out = []
    sustain_us = sustain_s * MICROS
    run_start: int | None = None
    run_end: int | None = None
    for s in samples:
        if flag(s):
            if run_start is None:
                run_start = s.ts
            run_end = s.ts
        elif run_start is not None:
            if run_end - run_start > sustain_us:
                out.append(DetectionInterval(
                    run_start, run_end, rule,
                    min(1.0, (run_end - run_start) / (2 * sustain_us))))
            run_start = run_end = None
    if run_start is not None and run_end - run_start > sustain_us:
        out.append(DetectionInterval(
            run_start, run_end, rule,
            min(1.0, (run_end - run_start) / (2 * sustain_us))))
    return out


def _merge_detections(dets: list[DetectionInterval]) -> list[DetectionInterval]:
    if not dets:
        return []
    dets = sorted(dets, key=lambda d: (d.start, d.end))
    merged = [dets[0]]
    for d in dets[1:]:
        last = merged[-1]
        if d.start <= last.end:
            rules = sorted(set(last.rule.split("+")) | set(d.rule.split("+")))
            merged[-1] = DetectionInterval(last.start, max(last.end, d.end),
                                           "+".join(rules),
                                           max(last.confidence, d.confidence))
        else:
            merged.append(d)
    return merged


def detect_anomalies(session: Session,
                     config: AnomalyRuleConfig = AnomalyRuleConfig()
                     ) -> AnomalyScan:
    """Union of the rule detectors; overlapping detections are merged.

    Rules whose stream is absent are disabled and reported, never guessed.
    Output is deterministic in (session, config).
    """
    idx = _StreamIndex(session)
    detections: list[DetectionInterval] = []
    disabled: list[str] = []

    if idx.has("keyboard") or idx.has("mouse"):
        detections.extend(_inactivity_detections(
            idx, session.manifest.tasks, config.inactivity_s))
    else:
        disabled.append("inactivity (no keyboard or mouse stream)")

    pose = session.events_of_kind("head_pose")
    if pose:
        detections.extend(_sustained_runs(
            pose, lambda s: abs(s.yaw) > config.yaw_deg, config.sustain_s,
            "head_pose_deviation"))
    else:
        disabled.append("head_pose_deviation (no head_pose stream)")

    face = session.events_of_kind("face_biometrics")
    if face:
        detections.extend(_sustained_runs(
            face, lambda s: not s.face_present, config.sustain_s,
            "face_absence"))
    else:
        disabled.append("face_absence (no face_biometrics stream)")

    if config.merge:
        detections = _merge_detections(detections)
    else:
        detections.sort(key=lambda d: (d.start, d.end))
    return AnomalyScan(tuple(detections), tuple(disabled))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalResult:
    challenge_id: int
    name: str
    metric: str  # eer | mae | interval_f1 | accuracy
    value: float
    per_session: dict[str, float] = field(default_factory=dict)
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"challenge_id": self.challenge_id, "name": self.name,
                "metric": self.metric, "value": self.value,
                "per_session": self.per_session, "details": self.details}


def _loso_constant_mae(dataset: ChallengeDataset) -> EvalResult:
    """Leave-one-session-out constant baseline scored with MAE."""
    spec = dataset.challenge
    by_session: dict[str, list[float]] = {}
    for row in dataset.rows:
        by_session.setdefault(row.session_id, []).append(float(row.target))
    if not by_session:
        raise ChallengeError(f"challenge {spec.id}: no usable rows "
                             f"(skipped: {dataset.skipped})")
    per_session: dict[str, float] = {}
    abs_errors: list[float] = []
    all_targets = [t for ts in by_session.values() for t in ts]
    for sid, targets in by_session.items():
        others = [t for other, ts in by_session.items() if other != sid
                  for t in ts]
        prediction = float(np.mean(others)) if others else float(np.mean(targets))
        errs = [abs(t - prediction) for t in targets]
        per_session[sid] = float(np.mean(errs))
        abs_errors.extend(errs)
    return EvalResult(
        spec.id, spec.name, "mae", float(np.mean(abs_errors)), per_session,
        details={"baseline": "constant (leave-one-session-out mean)",
                 "n_rows": len(abs_errors),
                 "target_mean": float(np.mean(all_targets)),
                 "skipped": list(dataset.skipped)})


def _anomaly_eval(sessions: Sequence[Session], config: AnomalyRuleConfig,
                  iou_min: float) -> EvalResult:
    per_session: dict[str, float] = {}
    details: dict[str, Any] = {"per_session": {}}
    matched = n_pred = n_truth = 0
    for session in sessions:
        m = session.manifest
        scan = detect_anomalies(session, config)
        pred = [(d.start, d.end) for d in scan.detections]
        truth = [(lab.start, lab.end) for lab in m.anomaly_labels]
        res: IntervalMatch = interval_f1(pred, truth, iou_min)
        per_session[m.session_id] = res.f1
        matched += res.n_matched
        n_pred += len(pred)
        n_truth += len(truth)
        details["per_session"][m.session_id] = {
            "precision": res.precision, "recall": res.recall, "f1": res.f1,
            "n_detections": len(pred), "n_labels": len(truth),
            "disabled_rules": list(scan.disabled_rules)}
    precision = matched / n_pred if n_pred else 1.0
    recall = matched / n_truth if n_truth else 1.0
    f1 = 0.0 if precision + recall == 0 else \
        2 * precision * recall / (precision + recall)
    details.update({"precision": precision, "recall": recall,
                    "n_matched": matched, "n_pred": n_pred,
                    "n_truth": n_truth, "iou_min": iou_min})
    return EvalResult(2, "anomaly", "interval_f1", f1, per_session, details)


def run_challenge(sessions: Sequence[Session], challenge_id: int,
                  windowing: WindowingConfig = WindowingConfig(),
                  anomaly_config: AnomalyRuleConfig = AnomalyRuleConfig(),
                  iou_min: float = 0.3, advanced: bool = False) -> EvalResult:
    """Evaluate the shipped floor baseline for one challenge on a cohort."""
    if challenge_id not in CHALLENGES:
        raise ChallengeError(f"unknown challenge {challenge_id}; pick 1-5")
    if challenge_id == 2:
        synced = [s for s in sessions if s.manifest.synchronized]
        if not synced:
            raise ChallengeError("challenge 2 needs synchronized sessions")
        return _anomaly_eval(synced, anomaly_config, iou_min)
    if challenge_id == 4:
        scores = authentication_scores(sessions)
        eer, threshold = compute_eer(scores)
        genuine_by_session: dict[str, float] = {}
        return EvalResult(
            4, "authentication", "eer", eer, genuine_by_session,
            details={"threshold": threshold,
                     "n_genuine": len(scores.genuine),
                     "n_impostor": len(scores.impostor)})
    dataset = build_challenge_dataset(sessions, challenge_id, windowing,
                                      advanced)
    return _loso_constant_mae(dataset)
