#!/usr/bin/env python3
"""From raw device clocks to aligned analysis windows.

Shows the timeline mapping (per-stream offsets zeroed after sync), gap
detection on fixed-rate streams, and multi-rate alignment: event bucketing
for keyboard/mouse, linear resampling for the physiological channels.
"""

from proctorlab.sync import resample_uniform, sync_session, window_session
from proctorlab.synth import TaskPlanItem, generate_profile, generate_session

plan = (TaskPlanItem("enrollment", 15.0), TaskPlanItem("writing", 30.0),
        TaskPlanItem("multiple_choice", 15.0))
raw = generate_session(generate_profile(3), plan, seed=2)

print("raw per-stream clock offsets (us):")
for d in raw.manifest.streams:
    print(f"  {d.stream_id:<16} {d.clock_offset_micros:+8d}")

synced, gaps = sync_session(raw)
print(f"\nafter sync: synchronized={synced.manifest.synchronized}, "
      f"all offsets zeroed, {len(gaps)} gap(s) found")

windows = window_session(synced, window_s=10.0, hop_s=5.0)
print(f"{len(windows)} half-open windows of 10 s at 5 s hops:\n")
header = f"{'window':>14}  {'keys':>4} {'mouse':>6}  {'attention mean':>14}"
print(header)
for w in windows[:8]:
    span = f"[{w.start/1e6:5.1f},{w.end/1e6:5.1f})"
    n_keys = len(w.events.get("keyboard", ()))
    n_mouse = len(w.events.get("mouse", ()))
    att = ""
    series = w.series.get("eeg-band")
    if series is not None:
        att = f"{float(series.channels['attention'].mean()):14.1f}"
    print(f"{span:>14}  {n_keys:>4} {n_mouse:>6}  {att:>14}")

# Resampling directly: linear interpolation with extrapolation flags.
times = [0, 1_000_000, 2_000_000]          # micros
values = [0.0, 100.0, 50.0]
out, extrapolated = resample_uniform(times, values, grid_start=-500_000,
                                     grid_rate_hz=2.0, grid_len=7)
print("\nresample_uniform on a 3-point series, grid 2 Hz from -0.5 s:")
for k, (v, flag) in enumerate(zip(out, extrapolated)):
    t = -0.5 + k / 2.0
    marker = "  (extrapolated: clamped to nearest endpoint)" if flag else ""
    print(f"  t={t:+4.1f}s -> {v:6.1f}{marker}")
