"""Synthetic generator: determinism, separation, fidelity, rate conformance."""

import numpy as np
import pytest

from conftest import SHORT_PLAN
from proctorlab.features import keystroke_features
from proctorlab.model import validate_session
from proctorlab.synth import (
    AnomalyEvent,
    SeparationConfig,
    SynthError,
    TaskPlanItem,
    default_anomaly_plan,
    default_task_plan,
    generate_cohort,
    generate_profile,
    generate_session,
)

MICROS = 1_000_000


class TestProfiles:
    def test_same_seed_identical_profiles(self):
        assert generate_profile(9) == generate_profile(9)

    def test_separation_at_least_k_sigma(self):
        sep = SeparationConfig(k=3.0)
        profiles = [generate_profile(seed, sep) for seed in range(1, 21)]
        holds = [p.mean_hold_ms for p in profiles]
        sds = {p.sd_hold_ms for p in profiles}
        assert sds == {sep.hold_sd_ms}
        for i in range(len(holds)):
            for j in range(i + 1, len(holds)):
                assert abs(holds[i] - holds[j]) >= 3.0 * sep.hold_sd_ms - 1e-9

    def test_k_zero_draws_unconstrained(self):
        profiles = [generate_profile(s, SeparationConfig(k=0.0))
                    for s in range(1, 6)]
        holds = [p.mean_hold_ms for p in profiles]
        assert len(set(holds)) == len(holds)  # continuous draws, no grid

    def test_means_within_physical_ranges(self):
        for seed in range(1, 30):
            p = generate_profile(seed, SeparationConfig(k=3.0))
            assert 40.0 <= p.mean_hold_ms <= 400.0
            assert 40.0 <= p.baseline_hr_bpm <= 180.0
            assert 0.0 <= p.baseline_attention <= 100.0
            assert 0.0 <= p.error_rate <= 1.0


class TestSessions:
    def test_default_plan_has_three_groups_and_eight_tasks(self):
        session = generate_session(generate_profile(2), seed=1)
        groups = [t.group for t in session.manifest.tasks]
        assert len(groups) == 8
        assert set(groups) == {"enrollment", "writing", "multiple_choice"}

    def test_anomaly_plan_produces_matching_label(self):
        plan = SHORT_PLAN
        anomalies = (AnomalyEvent("phone_use", 14.0, 10.0),)
        session = generate_session(generate_profile(2), plan, anomalies,
                                   seed=1)
        assert len(session.manifest.anomaly_labels) == 1
        label = session.manifest.anomaly_labels[0]
        assert (label.start, label.end) == (14 * MICROS, 24 * MICROS)
        assert session.manifest.cheater_flag

    def test_no_anomalies_no_flag(self):
        session = generate_session(generate_profile(2), SHORT_PLAN, seed=1)
        assert session.manifest.anomaly_labels == ()
        assert not session.manifest.cheater_flag

    def test_eeg_sample_count_tracks_duration(self):
        plan = (TaskPlanItem("enrollment", 20.0), TaskPlanItem("writing", 40.0))
        session = generate_session(generate_profile(3), plan, seed=2)
        eeg = session.events_of_kind("eeg_band")
        assert abs(len(eeg) - 60) <= 1

    def test_deterministic_in_inputs(self):
        p = generate_profile(4)
        a = generate_session(p, SHORT_PLAN, seed=9)
        b = generate_session(p, SHORT_PLAN, seed=9)
        assert a == b

    def test_different_seed_different_session(self):
        p = generate_profile(4)
        assert generate_session(p, SHORT_PLAN, seed=1) != \
            generate_session(p, SHORT_PLAN, seed=2)

    def test_validates_cleanly(self):
        plan = default_task_plan()
        session = generate_session(generate_profile(5), plan,
                                   default_anomaly_plan(plan), seed=3)
        assert validate_session(session).ok

    def test_timestamps_strictly_increasing_per_sampled_stream(self):
        session = generate_session(generate_profile(6), SHORT_PLAN, seed=4)
        for d in session.manifest.streams:
            if d.kind in ("eeg_band", "smartwatch", "head_pose",
                          "face_biometrics"):
                ts = [s.ts for s in session.stream(d.stream_id)]
                assert all(a < b for a, b in zip(ts, ts[1:])), d.kind

    def test_overlapping_anomalies_rejected(self):
        bad = (AnomalyEvent("phone_use", 14.0, 10.0),
               AnomalyEvent("absence", 20.0, 10.0))
        with pytest.raises(SynthError, match="overlapping"):
            generate_session(generate_profile(2), SHORT_PLAN, bad)

    def test_mean_hold_within_three_standard_errors(self):
        plan = (TaskPlanItem("writing", 60.0),) * 4
        profile = generate_profile(8)
        session = generate_session(profile, plan, seed=5)
        feats = keystroke_features(session.events_of_kind("keyboard"))
        holds = [ms for _k, ms in feats.hold_times]
        assert len(holds) >= 500
        se = profile.sd_hold_ms / np.sqrt(len(holds))
        assert abs(np.mean(holds) - profile.mean_hold_ms) <= 3 * se

    def test_input_gap_silences_keyboard_and_mouse(self):
        plan = default_task_plan()
        anomalies = default_anomaly_plan(plan)
        session = generate_session(generate_profile(9), plan, anomalies,
                                   seed=6)
        for label in session.manifest.anomaly_labels:
            lo = label.start + 500_000  # generator resumes shortly after end
            hi = label.end - 500_000
            offsets = {d.stream_id: d.clock_offset_micros
                       for d in session.manifest.streams}
            for kind in ("keyboard", "mouse"):
                for d in session.streams_of_kind(kind):
                    inside = [s for s in session.stream(d.stream_id)
                              if lo <= s.ts + offsets[d.stream_id] < hi]
                    assert inside == []


class TestCohort:
    def test_counts_and_flags(self):
        sessions = generate_cohort(6, 2, seed=1, task_plan=SHORT_PLAN)
        assert len(sessions) == 6
        flagged = [s for s in sessions if s.manifest.cheater_flag]
        assert len(flagged) == 2
        assert all(s.manifest.cheater_flag == bool(s.manifest.anomaly_labels)
                   for s in sessions)

    def test_zero_cheaters(self):
        sessions = generate_cohort(3, 0, seed=1, task_plan=SHORT_PLAN)
        assert all(not s.manifest.anomaly_labels for s in sessions)

    def test_cheaters_cannot_exceed_users(self):
        with pytest.raises(SynthError):
            generate_cohort(2, 3, task_plan=SHORT_PLAN)

    def test_fixed_seed_reproduces_cohort_exactly(self):
        a = generate_cohort(3, 1, seed=5, task_plan=SHORT_PLAN)
        b = generate_cohort(3, 1, seed=5, task_plan=SHORT_PLAN)
        assert a == b

    def test_cohort_is_anonymized(self):
        for s in generate_cohort(3, 1, seed=2, task_plan=SHORT_PLAN):
            assert s.manifest.identity is None
            assert s.manifest.user_id is not None


class TestRateConformance:
    def test_descriptor_rates_match_rig_table(self):
        session = generate_session(generate_profile(1), SHORT_PLAN, seed=1)
        rates = {d.kind: d.nominal_rate_hz for d in session.manifest.streams}
        assert rates["mouse"] == 895.0
        assert rates["eeg_band"] == 1.0
        assert rates["smartwatch"] == 200.0
        assert rates["keyboard"] == 12.0

    def test_mouse_spacing_respects_rate_cap(self):
        session = generate_session(generate_profile(1), SHORT_PLAN, seed=1)
        ts = [e.ts for e in session.events_of_kind("mouse")]
        deltas = [b - a for a, b in zip(ts, ts[1:])]
        assert min(deltas) >= MICROS / 895.0

    def test_smartwatch_exact_200hz_grid(self):
        session = generate_session(generate_profile(1), SHORT_PLAN, seed=1)
        ts = [s.ts for s in session.events_of_kind("smartwatch")]
        assert all(b - a == 5000 for a, b in zip(ts, ts[1:]))
