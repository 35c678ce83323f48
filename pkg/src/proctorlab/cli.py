"""Command-line entry point.

Subcommands cover the whole pipeline on stored sessions::

    proctorlab synth    --users 20 --cheaters 10 --seed 7 --out data/raw
    proctorlab sync     --data data/raw --out data/synced
    proctorlab extract  --data data/synced --out data/features
    proctorlab evaluate --challenge 4 --data data/synced --out data/results
    proctorlab report   --data data/synced --out data/reports
    proctorlab validate data/synced/<session>
    proctorlab serve    --host 127.0.0.1 --tcp-port 9401 --ws-port 9402 --out data/live

Exit codes: 0 success, 1 domain error, 2 usage error. Defaults may come
from a JSON config file (``--config``); explicit flags always win.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

from . import challenges as ch
from . import synth
from .metrics import det_points
from .model import DomainError, Session, validate_session
from .report import dump_sidecar, generate_report
from .store import StoreError, export_dataset, find_sessions, load_session, \
    save_session
from .sync import detect_gaps, sync_session
from .model import SAMPLED_STREAM_KINDS

_CONFIG_KEYS = ("window_s", "hop_s", "gap_k", "iou_min", "inactivity_s",
                "yaw_deg", "sustain_s")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    unknown = set(cfg) - set(_CONFIG_KEYS)
    if unknown:
        raise DomainError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return cfg


def _setting(args, cfg: dict, key: str, default: float) -> float:
    value = getattr(args, key, None)
    if value is not None:
        return value
    return cfg.get(key, default)


def _load_all(data_dir: str) -> list[Session]:
    roots = find_sessions(data_dir)
    if not roots:
        raise DomainError(f"no session directories under {data_dir}")
    return [load_session(r) for r in roots]


def _ensure_synced(sessions: list[Session]) -> list[Session]:
    out = []
    n_mapped = 0
    for s in sessions:
        if s.manifest.synchronized:
            out.append(s)
        else:
            out.append(sync_session(s)[0])
            n_mapped += 1
    if n_mapped:
        print(f"note: {n_mapped} session(s) were raw; clock mapping applied "
              "in memory")
    return out


def _windowing(args, cfg) -> ch.WindowingConfig:
    return ch.WindowingConfig(_setting(args, cfg, "window_s", 10.0),
                              _setting(args, cfg, "hop_s", 5.0))


def _anomaly_config(args, cfg) -> ch.AnomalyRuleConfig:
    return ch.AnomalyRuleConfig(
        inactivity_s=_setting(args, cfg, "inactivity_s", 10.0),
        yaw_deg=_setting(args, cfg, "yaw_deg", 35.0),
        sustain_s=_setting(args, cfg, "sustain_s", 3.0))


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_synth(args, cfg) -> int:
    plan = synth.default_task_plan()
    if args.short:
        plan = tuple(synth.TaskPlanItem(t.group, max(8.0, t.duration_s / 4))
                     for t in plan)
    sessions = synth.generate_cohort(args.users, args.cheaters, args.seed,
                                     task_plan=plan)
    out = Path(args.out)
    for s in sessions:
        save_session(s, out / s.manifest.session_id)
    print(f"wrote {len(sessions)} session(s) to {out} "
          f"({args.cheaters} with anomaly labels)")
    return 0


def _cmd_sync(args, cfg) -> int:
    gap_k = _setting(args, cfg, "gap_k", 3.0)
    out = Path(args.out)
    total_gaps = 0
    for root in find_sessions(args.data):
        session = load_session(root)
        synced, gaps = sync_session(session, gap_k)
        save_session(synced, out / root.name)
        total_gaps += len(gaps)
        print(f"{root.name}: mapped {sum(len(v) for v in synced.samples.values())} "
              f"samples, {len(gaps)} gap(s)")
    print(f"synchronized sessions written to {out}; {total_gaps} gap(s) total")
    return 0


def _cmd_extract(args, cfg) -> int:
    windowing = _windowing(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sessions = _ensure_synced(_load_all(args.data))
    all_kinds = frozenset({"keyboard", "mouse", "head_pose",
                           "face_biometrics"})
    for s in sessions:
        idx = ch._StreamIndex(s)
        windows = []
        from .sync import window_session
        for w in window_session(s, windowing.window_s, windowing.hop_s):
            feats = ch._interval_features(idx, w.start, w.end, all_kinds,
                                          advanced_physio=True)
            windows.append({"start": w.start, "end": w.end,
                            "degraded_streams": sorted(w.degraded_streams),
                            "features": feats})
        tasks = [{"task_id": t.task_id, "group": t.group,
                  "features": ch._interval_features(idx, t.start, t.end,
                                                    all_kinds, True)}
                 for t in s.manifest.tasks]
        doc = {"session_id": s.manifest.session_id,
               "user_id": s.manifest.user_id,
               "window_s": windowing.window_s, "hop_s": windowing.hop_s,
               "windows": windows, "tasks": tasks}
        path = out / f"{s.manifest.session_id}.features.json"
        path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n",
                        encoding="utf-8")
        print(f"{s.manifest.session_id}: {len(windows)} windows, "
              f"{len(tasks)} tasks -> {path.name}")
    return 0


def _cmd_evaluate(args, cfg) -> int:
    sessions = _ensure_synced(_load_all(args.data))
    result = ch.run_challenge(
        sessions, args.challenge, windowing=_windowing(args, cfg),
        anomaly_config=_anomaly_config(args, cfg),
        iou_min=_setting(args, cfg, "iou_min", 0.3),
        advanced=args.advanced)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"eval_challenge{args.challenge}.json"
    path.write_text(json.dumps(result.to_dict(), sort_keys=True, indent=2)
                    + "\n", encoding="utf-8")
    if args.challenge == 4:
        scores = ch.authentication_scores(sessions)
        det = det_points(scores)
        csv_path = out / "det_challenge4.csv"
        lines = ["threshold,far,frr"] + [f"{t!r},{fa!r},{fr!r}"
                                         for t, fa, fr in det]
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"DET curve ({len(det)} points) -> {csv_path}")
    print(f"challenge {args.challenge} ({result.name}): "
          f"{result.metric} = {result.value:.4f} -> {path}")
    return 0


def _cmd_report(args, cfg) -> int:
    sessions = _ensure_synced(_load_all(args.data))
    anomaly_config = _anomaly_config(args, cfg)
    gap_k = _setting(args, cfg, "gap_k", 3.0)
    iou_min = _setting(args, cfg, "iou_min", 0.3)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for s in sessions:
        scan = ch.detect_anomalies(s, anomaly_config)
        gaps = []
        for d in s.manifest.streams:
            if d.kind in SAMPLED_STREAM_KINDS and d.nominal_rate_hz \
                    and len(s.stream(d.stream_id)) >= 2:
                gaps.extend(detect_gaps(s.stream(d.stream_id), d, gap_k))
        doc = generate_report(s, scan, gaps, iou_min=iou_min)
        sid = s.manifest.session_id
        (out / f"{sid}.report.txt").write_text(doc.text, encoding="utf-8")
        (out / f"{sid}.report.json").write_text(dump_sidecar(doc.sidecar),
                                                encoding="utf-8")
        print(f"{sid}: {len(scan.detections)} detection(s) -> "
              f"{sid}.report.txt")
    return 0


def _cmd_validate(args, cfg) -> int:
    try:
        session = load_session(args.path)
    except StoreError as exc:
        print(f"INVALID: {exc}", file=sys.stderr)
        return 1
    report = validate_session(session)
    if not report.ok:
        for line in report.messages():
            print(f"violation: {line}", file=sys.stderr)
        return 1
    print(f"OK: {session.manifest.session_id} "
          f"({sum(len(v) for v in session.samples.values())} samples)")
    return 0


def _cmd_export(args, cfg) -> int:
    sessions = _load_all(args.data)
    index = export_dataset(sessions, args.out)
    print(f"exported {len(sessions)} session(s) -> {index}")
    return 0


def _cmd_serve(args, cfg) -> int:
    from .gateway import Gateway, GatewayConfig

    config = GatewayConfig(session_id=args.session_id, host=args.host,
                           tcp_port=args.tcp_port, ws_port=args.ws_port,
                           out_dir=args.out)

    async def run() -> None:
        gw = Gateway(config)
        await gw.start()
        print(f"gateway listening: tcp={args.tcp_port} ws={args.ws_port} "
              "(Ctrl-C to stop and store the session)")
        stop = asyncio.Event()
        try:
            await stop.wait()
        except asyncio.CancelledError:
            pass
        finally:
            session = await gw.stop()
            print(f"stored session {session.manifest.session_id!r} with "
                  f"{sum(len(v) for v in session.samples.values())} samples")

    try:
        asyncio.run(run())
    except KeyboardInterrupt:
        pass
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proctorlab",
        description="behavioral monitoring toolkit for remote evaluation "
                    "sessions")
    parser.add_argument("--config", help="JSON config file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--users", type=int, default=20)
    p.add_argument("--cheaters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--short", action="store_true",
                   help="quarter-length tasks (fast smoke runs)")
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("sync", help="apply clock mapping and gap detection")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gap-k", dest="gap_k", type=float)
    p.set_defaults(fn=_cmd_sync)

    p = sub.add_parser("extract", help="write per-window/per-task features")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", dest="window_s", type=float)
    p.add_argument("--hop", dest="hop_s", type=float)
    p.set_defaults(fn=_cmd_extract)

    p = sub.add_parser("evaluate", help="run a challenge baseline")
    p.add_argument("--challenge", type=int, required=True, choices=range(1, 6))
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--advanced", action="store_true",
                   help="use the advanced input set")
    p.add_argument("--window", dest="window_s", type=float)
    p.add_argument("--hop", dest="hop_s", type=float)
    p.add_argument("--iou-min", dest="iou_min", type=float)
    p.add_argument("--inactivity-s", dest="inactivity_s", type=float)
    p.add_argument("--yaw-deg", dest="yaw_deg", type=float)
    p.add_argument("--sustain-s", dest="sustain_s", type=float)
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("report", help="emit per-session anomaly reports")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iou-min", dest="iou_min", type=float)
    p.add_argument("--inactivity-s", dest="inactivity_s", type=float)
    p.add_argument("--yaw-deg", dest="yaw_deg", type=float)
    p.add_argument("--sustain-s", dest="sustain_s", type=float)
    p.add_argument("--gap-k", dest="gap_k", type=float)
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("validate", help="check a stored session directory")
    p.add_argument("path")
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("export", help="bundle anonymized sessions per user")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_export)

    p = sub.add_parser("serve", help="run the live ingest gateway")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--tcp-port", dest="tcp_port", type=int, default=9401)
    p.add_argument("--ws-port", dest="ws_port", type=int, default=9402)
    p.add_argument("--session-id", dest="session_id", default="live-session")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return args.fn(args, cfg)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
