#!/usr/bin/env python3
"""The behavioral feature families, extracted from one synthetic session.

Keystroke dynamics (hold/PP/RP latencies), mouse kinematics, a fixed-text
typing template from the enrollment form, and windowed physiological
aggregates.
"""

import numpy as np

from proctorlab.features import (
    fixed_text_template,
    keystroke_features,
    mouse_features,
    physio_aggregate,
)
from proctorlab.sync import sync_session
from proctorlab.synth import ENROLLMENT_TEXT, generate_profile, generate_session

session, _gaps = sync_session(generate_session(generate_profile(6), seed=9))
manifest = session.manifest

# --- keystroke dynamics over the whole session --------------------------
keys = session.events_of_kind("keyboard")
kf = keystroke_features(keys)
holds = [ms for _k, ms in kf.hold_times]
pps = [ms for _d, ms in kf.digraph_pp]
rollover = sum(1 for _d, ms in kf.digraph_rp if ms < 0)
print(f"keystroke: {len(keys)} events, {len(holds)} holds "
      f"(mean {np.mean(holds):.0f} ms), {len(pps)} PP latencies "
      f"(mean {np.mean(pps):.0f} ms), {rollover} rollover digraphs, "
      f"{kf.keys_per_second:.1f} keys/s, "
      f"backspace rate {kf.backspace_rate:.2%}")

# --- mouse kinematics ----------------------------------------------------
mouse = session.events_of_kind("mouse")
mf = mouse_features(mouse)
speeds = [v for _t, v in mf.velocities]
print(f"mouse: {len(mouse)} events, path {mf.path_length:,.0f} px, "
      f"peak speed {max(speeds):,.0f} px/s, "
      f"{len(mf.click_durations)} clicks "
      f"(mean {np.mean(mf.click_durations):.0f} ms), "
      f"curvature {mf.mean_curvature:.4f} rad/px, "
      f"idle {mf.idle_fraction:.0%}")

# --- fixed-text template from the enrollment task ------------------------
enrollment = next(t for t in manifest.tasks if t.group == "enrollment")
entry = [e for e in keys if enrollment.start <= e.ts < enrollment.end]
template = fixed_text_template(entry, ENROLLMENT_TEXT)
matched = sum(template.mask)
print(f"fixed text: matched {matched}/{len(template.mask)} digraph "
      f"positions of {ENROLLMENT_TEXT!r}, "
      f"{template.corrections} corrections, "
      f"match rate {template.match_rate:.0%}")

# --- physiological aggregates per writing task ---------------------------
eeg = session.events_of_kind("eeg_band")
wear = session.events_of_kind("smartwatch")
print("\nper-task physiology:")
for task in manifest.tasks:
    agg = physio_aggregate(eeg, wear, (task.start, task.end))
    print(f"  {task.task_id:<26} attention {agg.mean_attention:5.1f}  "
          f"meditation {agg.mean_meditation:5.1f}  "
          f"hr {agg.mean_hr_bpm:6.1f}±{agg.std_hr_bpm:.2f} bpm  "
          f"blinks {agg.blink_count}")
