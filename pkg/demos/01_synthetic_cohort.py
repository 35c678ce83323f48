#!/usr/bin/env python3
"""Generate a small synthetic cohort and inspect what a session contains.

Walks through: behavior profiles, a single session with an injected
anomaly, validation, and the on-disk store round trip.
"""

import tempfile
from pathlib import Path

from proctorlab.model import validate_session
from proctorlab.store import load_session, save_session
from proctorlab.synth import (
    AnomalyEvent,
    SeparationConfig,
    TaskPlanItem,
    generate_cohort,
    generate_profile,
    generate_session,
)

# Two users with well-separated typing physiology (k = 3 strata).
for seed in (1, 2):
    p = generate_profile(seed, SeparationConfig(k=3.0))
    print(f"user {seed}: hold {p.mean_hold_ms:.0f}±{p.sd_hold_ms:.0f} ms, "
          f"mouse {p.mouse_speed_px_s:.0f} px/s, "
          f"attention baseline {p.baseline_attention:.0f}, "
          f"heart rate {p.baseline_hr_bpm:.0f} bpm")

# One session: short plan, one phone-use interval inside the writing task.
plan = (TaskPlanItem("enrollment", 15.0),
        TaskPlanItem("writing", 40.0),
        TaskPlanItem("multiple_choice", 10.0))
session = generate_session(generate_profile(1), plan,
                           (AnomalyEvent("phone_use", 25.0, 15.0),), seed=4)

print(f"\nsession {session.manifest.session_id}:")
for d in session.manifest.streams:
    n = len(session.stream(d.stream_id))
    rate = f"{d.nominal_rate_hz:g} Hz" if d.nominal_rate_hz else "events"
    print(f"  {d.stream_id:<16} {d.kind:<16} {rate:<8} {n:>6} samples "
          f"(device clock offset {d.clock_offset_micros/1000:+.0f} ms)")
print(f"  tasks: {[t.group for t in session.manifest.tasks]}")
print(f"  anomaly labels: {[(l.kind, l.start/1e6, l.end/1e6) for l in session.manifest.anomaly_labels]}")

report = validate_session(session)
print(f"  validation: {'clean' if report.ok else report.messages()[:3]}")

# Round trip through the documented directory layout.
with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp) / "session"
    save_session(session, root)
    print(f"\nsaved -> {sorted(p.name for p in root.iterdir())}")
    assert load_session(root) == session
    print("load(save(session)) == session: field-exact round trip")

# A labeled cohort: first 2 of 5 users carry injected anomalies.
cohort = generate_cohort(n_users=5, n_cheaters=2, seed=7, task_plan=plan)
flags = [s.manifest.cheater_flag for s in cohort]
print(f"\ncohort of {len(cohort)}: cheater flags {flags}")
print(f"user ids (anonymized): {[s.manifest.user_id for s in cohort]}")
