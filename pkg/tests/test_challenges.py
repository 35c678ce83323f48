"""Challenge harness: datasets, verification, rule detection, evaluation."""

import dataclasses

import pytest

from conftest import MICROS, label, make_session, writing_task
from proctorlab.challenges import (
    CHALLENGES,
    AnomalyRuleConfig,
    ChallengeError,
    authentication_scores,
    build_challenge_dataset,
    detect_anomalies,
    run_challenge,
    verify_keystroke,
)
from proctorlab.features import keystroke_features, fixed_text_template
from proctorlab.metrics import MetricError
from proctorlab.model import (
    FaceSample,
    HeadPoseSample,
    KeyEvent,
    MouseEvent,
    TaskRecord,
)


def typing_events(start_s, end_s, pp_ms=250, hold_ms=90, keys="abcdefgh"):
    """Continuous typing covering [start_s, end_s)."""
    events = []
    t = int(start_s * MICROS)
    end = int(end_s * MICROS)
    i = 0
    while t + hold_ms * 1000 < end:
        code = keys[i % len(keys)]
        events.append(KeyEvent(t, code, "press"))
        events.append(KeyEvent(t + hold_ms * 1000, code, "release"))
        t += pp_ms * 1000
        i += 1
    return sorted(events, key=lambda e: e.ts)


class TestChallengeSpecs:
    def test_registry_matches_target_input_pairs(self):
        assert CHALLENGES[1].target_stream == "eeg_band"
        assert {"keyboard", "mouse"} <= CHALLENGES[1].input_kinds_basic
        assert CHALLENGES[2].target_stream == "anomaly_labels"
        assert CHALLENGES[3].target_stream == "task_records"
        assert CHALLENGES[4].target_stream == "identity"
        assert {"smartwatch", "eeg_band"} <= CHALLENGES[4].input_kinds_advanced
        assert CHALLENGES[5].target_stream == "smartwatch"


class TestDatasets:
    def test_windows_overlapping_label_are_positive(self):
        events = typing_events(0, 200)
        session = make_session(
            key_events=events,
            tasks=[writing_task(0, 200)],
            labels=[label(100, 130)],
        )
        ds = build_challenge_dataset([session], 2)
        positives = [r for r in ds.rows if r.target]
        spans = [(int(r.key[1:].split("-")[0]), int(r.key.split("-")[1]))
                 for r in positives]
        assert positives, "windows over [100,130]s must be labeled true"
        for start, end in spans:
            assert start < 130 * MICROS and 100 * MICROS < end

    def test_eight_tasks_give_eight_examples(self, short_cohort_synced):
        one = [short_cohort_synced[0]]
        ds = build_challenge_dataset(one, 3)
        assert len(ds.rows) == len(one[0].manifest.tasks)

    def test_twenty_users_give_twenty_identities(self):
        # label set size equals cohort size for the authentication challenge
        from conftest import SHORT_PLAN
        from proctorlab.sync import sync_session
        from proctorlab.synth import generate_cohort
        cohort = [sync_session(s)[0]
                  for s in generate_cohort(20, 0, seed=21,
                                           task_plan=SHORT_PLAN)]
        ds = build_challenge_dataset(cohort, 4)
        assert {r.target for r in ds.rows} == set(range(1, 21))

    def test_unsynchronized_session_skipped_with_reason(self):
        session = make_session(synchronized=False)
        ds = build_challenge_dataset([session], 1)
        assert ds.rows == ()
        assert ds.skipped[0][1] == "session not synchronized"

    def test_missing_stream_skipped_with_reason(self, short_cohort_synced):
        s = short_cohort_synced[0]
        stripped = type(s)(s.manifest, {**s.samples, "eeg-band": ()})
        ds = build_challenge_dataset([stripped], 1)
        assert ds.rows == ()
        assert "missing stream" in ds.skipped[0][1]


class TestVerifyKeystroke:
    def test_identical_probe_gets_full_score(self):
        events = typing_events(0, 30)
        kf = keystroke_features(events)
        assert verify_keystroke(kf, kf) == 1.0

    def test_single_dimension_at_one_dispersion_scores_half(self):
        def typed(text, pp):
            events = []
            t = 0
            for ch in text:
                events.append(KeyEvent(t, ch, "press"))
                events.append(KeyEvent(t + 50_000, ch, "release"))
                t += pp * 1000
            return sorted(events, key=lambda e: e.ts)

        # same reference text typed twice; every digraph latency differs by
        # exactly the enrollment dispersion -> distance 1 -> score 0.5
        enroll = fixed_text_template(typed("abcab", 200), "abcab")
        probe_events = []
        t = 0
        latencies = [200, 200, 200, 200]
        for ch, lat in zip("abcab", latencies + [0]):
            probe_events.append(KeyEvent(t, ch, "press"))
            probe_events.append(KeyEvent(t + 50_000, ch, "release"))
            t += lat * 1000
        probe = fixed_text_template(sorted(probe_events, key=lambda e: e.ts),
                                    "abcab")
        # constant enrollment vector: dispersion floors at 1 ms; shift one
        # probe latency by exactly 1 ms on a single shared dimension
        one_dim_enroll = dataclasses.replace(
            enroll, digraph_ms=(200.0, None, None, None),
            mask=(True, False, False, False))
        one_dim_probe = dataclasses.replace(
            probe, digraph_ms=(201.0, None, None, None),
            mask=(True, False, False, False))
        score = verify_keystroke(one_dim_enroll, one_dim_probe, min_overlap=1)
        assert score == pytest.approx(0.5)

    def test_disjoint_key_sets_rejected(self):
        a = keystroke_features(typing_events(0, 20, keys="abcd"))
        b = keystroke_features(typing_events(0, 20, keys="wxyz"))
        with pytest.raises(MetricError, match="insufficient overlap"):
            verify_keystroke(a, b)

    def test_mismatched_types_rejected(self):
        kf = keystroke_features(typing_events(0, 20))
        tpl = fixed_text_template(typing_events(0, 10, keys="maria"), "maria")
        with pytest.raises(ChallengeError):
            verify_keystroke(kf, tpl)

    def test_template_reference_must_match(self):
        t1 = fixed_text_template(typing_events(0, 10, keys="maria"), "maria")
        t2 = fixed_text_template(typing_events(0, 10, keys="pedro"), "pedro")
        with pytest.raises(ChallengeError, match="different reference"):
            verify_keystroke(t1, t2)

    def test_genuine_scores_dominate_impostors(self, short_cohort_synced):
        scores = authentication_scores(short_cohort_synced)
        assert scores.genuine and scores.impostor
        import numpy as np
        assert np.mean(scores.genuine) > np.mean(scores.impostor)


class TestDetectAnomalies:
    def test_injected_gap_detected(self):
        # typing except a silent stretch [60, 90] inside one writing task
        events = [e for e in typing_events(0, 180)
                  if not (60 * MICROS <= e.ts < 90 * MICROS)]
        session = make_session(key_events=events,
                               tasks=[writing_task(0, 180)])
        scan = detect_anomalies(session,
                                AnomalyRuleConfig(inactivity_s=10.0))
        assert len(scan.detections) == 1
        d = scan.detections[0]
        assert d.rule == "inactivity"
        assert d.start <= 60 * MICROS < 90 * MICROS <= d.end + MICROS

    def test_fully_active_session_yields_nothing(self):
        session = make_session(key_events=typing_events(0, 60),
                               tasks=[writing_task(0, 60)])
        assert detect_anomalies(session).detections == ()

    def test_overlapping_detections_merged(self):
        # inactivity [10,20]s and yaw deviation [15,30]s merge into [10,30]s
        events = (typing_events(0, 10) + typing_events(20, 40))
        pose = [HeadPoseSample(int(t * MICROS), 0.0, 0.0,
                               60.0 if 15 <= t < 30 else 0.0)
                for t in [i * 0.2 for i in range(200)]]
        session = make_session(key_events=events, pose=pose,
                               tasks=[writing_task(0, 40)])
        scan = detect_anomalies(session, AnomalyRuleConfig(
            inactivity_s=8.0, yaw_deg=35.0, sustain_s=3.0))
        assert len(scan.detections) == 1
        d = scan.detections[0]
        assert set(d.rule.split("+")) == {"inactivity", "head_pose_deviation"}
        assert d.start <= 10 * MICROS and d.end >= 29 * MICROS

    def test_face_absence_rule(self):
        face = [FaceSample(int(t * MICROS), 180.0 if t < 20 or t >= 40 else 0.0,
                           0.9 if t < 20 or t >= 40 else 0.0,
                           t < 20 or t >= 40)
                for t in [i * 0.5 for i in range(120)]]
        session = make_session(face=face)
        scan = detect_anomalies(session)
        assert any(d.rule == "face_absence" for d in scan.detections)

    def test_absent_streams_disable_rules_with_note(self):
        session = make_session()
        bare = type(session)(
            dataclasses.replace(session.manifest,
                                streams=session.manifest.streams[:1]),
            {"kb": ()})
        scan = detect_anomalies(bare)
        assert any("head_pose" in note for note in scan.disabled_rules)
        assert any("face" in note for note in scan.disabled_rules)

    def test_deterministic(self, short_cohort_synced):
        s = short_cohort_synced[0]
        assert detect_anomalies(s) == detect_anomalies(s)

    def test_inactivity_only_inside_writing_tasks(self):
        # a silent multiple-choice task must not fire the inactivity rule
        mc = TaskRecord("t-mc", "multiple_choice", 0, 60 * MICROS, 1.0, 60.0)
        session = make_session(
            mouse_events=[MouseEvent(0, "move", 5, 5),
                          MouseEvent(59 * MICROS, "move", 6, 6)],
            tasks=[mc])
        assert detect_anomalies(session).detections == ()


class TestRunChallenge:
    def test_anomaly_f1_and_authentication_eer(self, short_cohort_synced):
        r2 = run_challenge(short_cohort_synced, 2)
        assert r2.metric == "interval_f1"
        assert 0.0 <= r2.value <= 1.0
        r4 = run_challenge(short_cohort_synced, 4)
        assert r4.metric == "eer"
        assert 0.0 <= r4.value <= 0.5

    def test_regression_challenges_return_mae(self, short_cohort_synced):
        for cid in (1, 3, 5):
            r = run_challenge(short_cohort_synced, cid)
            assert r.metric == "mae"
            assert r.value >= 0.0
            assert r.per_session

    def test_unknown_challenge_rejected(self, short_cohort_synced):
        with pytest.raises(ChallengeError):
            run_challenge(short_cohort_synced, 6)
