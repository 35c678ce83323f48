"""Session report: what happened during the evaluation, and when.

The report pairs a human-readable text document with a JSON sidecar that
parses back to the exact detection set, so review tooling can consume either.
Generation is deterministic: same session + detections, same bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .challenges import AnomalyScan, DetectionInterval
from .metrics import interval_f1
from .model import Session
from .sync import Gap

MICROS = 1_000_000


@dataclass(frozen=True)
class ReportDoc:
    text: str
    sidecar: dict[str, Any]


def _fmt_s(us: int) -> str:
    return f"{us / MICROS:.2f}s"


def generate_report(session: Session, scan: AnomalyScan,
                    gaps: Sequence[Gap] = (),
                    eval_context: Mapping[str, Any] | None = None,
                    iou_min: float = 0.3) -> ReportDoc:
    """Render the final per-session report.

    Includes session metadata, the task timeline, every detection with its
    triggering rule and interval, stream gaps, and — when ground-truth labels
    exist — precision/recall/F1 of the detections against them.
    """
    m = session.manifest
    lines: list[str] = []
    lines.append(f"Session report: {m.session_id}")
    lines.append("=" * (16 + len(m.session_id)))
    lines.append(f"user_id: {m.user_id if m.user_id is not None else 'unknown'}")
    if m.demographics is not None:
        d = m.demographics
        lines.append(f"demographics: age {d.age}, {d.gender}, {d.handedness}-handed")
    lines.append(f"synchronized: {'yes' if m.synchronized else 'no'}")
    lines.append(f"streams: {len(m.streams)}  "
                 f"({', '.join(s.kind for s in m.streams)})")
    lines.append(f"session length: {_fmt_s(session.end_micros())}")
    lines.append("")

    lines.append("Task timeline")
    lines.append("-------------")
    for t in m.tasks:
        lines.append(f"  {_fmt_s(t.start):>9} - {_fmt_s(t.end):>9}  "
                     f"{t.group:<15} {t.task_id}  "
                     f"accuracy {t.accuracy:.2f}  ({t.duration:.0f}s)")
    if not m.tasks:
        lines.append("  (no task records)")
    lines.append("")

    lines.append("Detections")
    lines.append("----------")
    if scan.detections:
        for d in scan.detections:
            dur = (d.end - d.start) / MICROS
            lines.append(f"  {_fmt_s(d.start):>9} - {_fmt_s(d.end):>9}  "
                         f"rule {d.rule}  duration {dur:.1f}s  "
                         f"confidence {d.confidence:.2f}")
    else:
        lines.append("  zero detections: nothing suspicious flagged")
    for rule in scan.disabled_rules:
        lines.append(f"  [rule disabled] {rule}")
    lines.append("")

    if gaps:
        lines.append("Stream gaps")
        lines.append("-----------")
        for g in gaps:
            lines.append(f"  {g.stream_id}: {_fmt_s(g.start)} - {_fmt_s(g.end)}")
        lines.append("")

    metrics_block: dict[str, Any] | None = None
    if m.anomaly_labels:
        res = interval_f1([(d.start, d.end) for d in scan.detections],
                          [(lab.start, lab.end) for lab in m.anomaly_labels],
                          iou_min)
        metrics_block = {"precision": res.precision, "recall": res.recall,
                         "f1": res.f1, "n_matched": res.n_matched,
                         "n_labels": len(m.anomaly_labels),
                         "iou_min": iou_min}
        lines.append("Against ground-truth labels")
        lines.append("---------------------------")
        lines.append(f"  labels: {len(m.anomaly_labels)}  "
                     f"matched: {res.n_matched}")
        lines.append(f"  precision {res.precision:.3f}  recall {res.recall:.3f}"
                     f"  f1 {res.f1:.3f}  (IoU >= {iou_min})")
        lines.append("")

    if eval_context:
        lines.append("Evaluation context")
        lines.append("------------------")
        for key in sorted(eval_context):
            lines.append(f"  {key}: {eval_context[key]}")
        lines.append("")

    sidecar: dict[str, Any] = {
        "session_id": m.session_id,
        "user_id": m.user_id,
        "synchronized": m.synchronized,
        "detections": [{"start": d.start, "end": d.end, "rule": d.rule,
                        "confidence": d.confidence}
                       for d in scan.detections],
        "disabled_rules": list(scan.disabled_rules),
        "gaps": [{"stream_id": g.stream_id, "start": g.start, "end": g.end}
                 for g in gaps],
        "tasks": [{"task_id": t.task_id, "group": t.group, "start": t.start,
                   "end": t.end, "accuracy": t.accuracy} for t in m.tasks],
        "metrics": metrics_block,
    }
    if eval_context:
        sidecar["eval_context"] = dict(eval_context)
    return ReportDoc("\n".join(lines) + "\n", sidecar)


def detections_from_sidecar(sidecar: Mapping[str, Any]
                            ) -> tuple[DetectionInterval, ...]:
    """Rebuild the detection set from a report sidecar."""
    return tuple(DetectionInterval(d["start"], d["end"], d["rule"],
                                   d["confidence"])
                 for d in sidecar["detections"])


def dump_sidecar(sidecar: Mapping[str, Any]) -> str:
    return json.dumps(sidecar, sort_keys=True, indent=2) + "\n"
