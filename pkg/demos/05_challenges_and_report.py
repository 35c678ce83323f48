#!/usr/bin/env python3
"""Run the five monitoring challenges on a small cohort and print a
cheater's anomaly report.

Baselines are deliberately floors: constant regressors for the
prediction challenges, scaled nearest-template keystroke verification for
authentication, and rule detectors for anomalous behavior.
"""

from proctorlab.challenges import CHALLENGES, detect_anomalies, run_challenge
from proctorlab.report import generate_report
from proctorlab.sync import sync_session
from proctorlab.synth import TaskPlanItem, generate_cohort

plan = (TaskPlanItem("enrollment", 20.0),
        TaskPlanItem("writing", 45.0), TaskPlanItem("writing", 45.0),
        TaskPlanItem("writing", 45.0),
        TaskPlanItem("multiple_choice", 12.0),
        TaskPlanItem("multiple_choice", 12.0))
cohort = [sync_session(s)[0]
          for s in generate_cohort(8, 3, seed=5, task_plan=plan)]
print(f"cohort: {len(cohort)} users, "
      f"{sum(s.manifest.cheater_flag for s in cohort)} with injected "
      "anomalies\n")

for cid, spec in CHALLENGES.items():
    result = run_challenge(cohort, cid)
    extra = ""
    if cid == 2:
        extra = (f"  (precision {result.details['precision']:.2f}, "
                 f"recall {result.details['recall']:.2f})")
    if cid == 4:
        extra = (f"  ({result.details['n_genuine']} genuine vs "
                 f"{result.details['n_impostor']} impostor scores)")
    print(f"challenge {cid} {spec.name:<15} {result.metric:>11} = "
          f"{result.value:.4f}{extra}")

cheater = next(s for s in cohort if s.manifest.cheater_flag)
scan = detect_anomalies(cheater)
doc = generate_report(cheater, scan)
print("\n" + "=" * 60)
print(doc.text)
