"""On-disk session layout with integrity checking and dataset export.

Layout of one session directory::

    <root>/
      manifest.json            # session metadata (schema: docs/manifest.schema.json)
      events.<stream_id>.ndjson    # event streams, one JSON object per line
      samples.<stream_id>.csv      # fixed-rate streams, header + comma rows
      media/                   # opaque MP4/WAV payloads, when present
      checksums.txt            # "<sha256>  <relative path>" per file, sorted

Serialization is deterministic: UTF-8, LF line endings, sorted JSON keys and
shortest round-trip decimal for every float, so saving the same session
twice produces byte-identical files. Saves are atomic (temp dir + rename)
and refuse to overwrite; loads verify every checksum before parsing.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import jsonschema

from .model import (
    EEGSample,
    FaceSample,
    HeadPoseSample,
    EVENT_STREAM_KINDS,
    DomainError,
    Session,
    WearableSample,
    manifest_from_dict,
    manifest_to_dict,
    sample_from_dict,
    sample_to_dict,
    validate_session,
)

FORMAT_NAME = "proctorlab-session"
FORMAT_VERSION = 1
_SAFE_ID = __import__("re").compile(r"^[A-Za-z0-9._-]+$")


class StoreError(DomainError):
    pass


class ChecksumError(StoreError):
    def __init__(self, path: str):
        super().__init__(f"checksum mismatch in {path!r}")
        self.path = path


# ---------------------------------------------------------------------------
# Value formatting (deterministic, round-trip exact)
# ---------------------------------------------------------------------------

def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _opt_float(s: str) -> float | None:
    return None if s == "" else float(s)


def _csv_header(kind: str, band_labels: Sequence[str]) -> list[str]:
    if kind == "eeg_band":
        return (["ts"] + [f"band_{lab}" for lab in band_labels]
                + ["attention", "meditation", "blink_strength"])
    if kind == "smartwatch":
        return ["ts", "heart_rate_bpm", "accel_x", "accel_y", "accel_z",
                "gyro_x", "gyro_y", "gyro_z", "mag_x", "mag_y", "mag_z"]
    if kind == "head_pose":
        return ["ts", "pitch", "roll", "yaw"]
    if kind == "face_biometrics":
        return ["ts", "face_size_px", "auth_score", "face_present"]
    raise StoreError(f"no CSV layout for stream kind {kind!r}")


def _csv_row(kind: str, s: Any) -> str:
    if kind == "eeg_band":
        cells = [str(s.ts), *(_fmt(b) for b in s.band_power),
                 _fmt(s.attention), _fmt(s.meditation), _fmt(s.blink_strength)]
    elif kind == "smartwatch":
        cells = [str(s.ts), _fmt(s.heart_rate_bpm),
                 *(_fmt(v) for v in s.accel), *(_fmt(v) for v in s.gyro),
                 *(_fmt(v) for v in s.mag)]
    elif kind == "head_pose":
        cells = [str(s.ts), _fmt(s.pitch), _fmt(s.roll), _fmt(s.yaw)]
    else:  # face_biometrics
        cells = [str(s.ts), _fmt(s.face_size_px), _fmt(s.auth_score),
                 _fmt(s.face_present)]
    return ",".join(cells)


def _csv_parse(kind: str, cells: list[str]) -> Any:
    if kind == "eeg_band":
        return EEGSample(int(cells[0]),
                         tuple(float(c) for c in cells[1:6]),
                         float(cells[6]), float(cells[7]),
                         _opt_float(cells[8]))
    if kind == "smartwatch":
        return WearableSample(int(cells[0]), _opt_float(cells[1]),
                              tuple(float(c) for c in cells[2:5]),
                              tuple(float(c) for c in cells[5:8]),
                              tuple(float(c) for c in cells[8:11]))
    if kind == "head_pose":
        return HeadPoseSample(int(cells[0]), float(cells[1]), float(cells[2]),
                              float(cells[3]))
    return FaceSample(int(cells[0]), float(cells[1]), float(cells[2]),
                      cells[3] == "true")


# ---------------------------------------------------------------------------
# Save / load
# ---------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def save_session(session: Session, root: str | Path) -> Path:
    """Write the session directory atomically; returns the manifest path.

    Refuses to touch an existing target, and a session that fails validation
    aborts before any file is created.
    """
    root = Path(root)
    if root.exists():
        raise StoreError(f"refusing to overwrite existing path {root}")
    report = validate_session(session)
    if not report.ok:
        raise StoreError("session fails validation; nothing written: "
                         + "; ".join(report.messages()[:5]))
    manifest = session.manifest
    for d in manifest.streams:
        if not _SAFE_ID.match(d.stream_id):
            raise StoreError(f"stream id {d.stream_id!r} is not filename-safe")

    root.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(dir=root.parent, prefix=f".{root.name}."))
    try:
        files: dict[str, str | bytes] = {
            "manifest.json": _dump_json({
                "format": FORMAT_NAME,
                "format_version": FORMAT_VERSION,
                "manifest": manifest_to_dict(manifest),
            })
        }
        for d in manifest.streams:
            if d.payload != "inline_samples":
                continue
            samples = session.stream(d.stream_id)
            if d.kind in EVENT_STREAM_KINDS:
                lines = [json.dumps(sample_to_dict(s), sort_keys=True,
                                    separators=(",", ":")) for s in samples]
                files[f"events.{d.stream_id}.ndjson"] = "\n".join(lines) + (
                    "\n" if lines else "")
            else:
                header = ",".join(_csv_header(d.kind, manifest.eeg_band_labels))
                rows = [_csv_row(d.kind, s) for s in samples]
                files[f"samples.{d.stream_id}.csv"] = "\n".join([header] + rows) + "\n"

        for name, content in files.items():
            data = content.encode("utf-8") if isinstance(content, str) else content
            (tmp / name).write_bytes(data)
        sums = [f"{_sha256(tmp / name)}  {name}" for name in sorted(files)]
        (tmp / "checksums.txt").write_text("\n".join(sums) + "\n",
                                           encoding="utf-8")
        os.rename(tmp, root)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return root / "manifest.json"


def load_session(root: str | Path) -> Session:
    """Read a session directory back, verifying integrity first.

    Raises ChecksumError (naming the file) on any corrupted byte, StoreError
    when a stream file named by the manifest is missing or when the manifest
    violates its schema; the returned session is fully validated.
    """
    root = Path(root)
    sums_path = root / "checksums.txt"
    if not sums_path.is_file():
        raise StoreError(f"{root} has no checksums.txt")
    listed: dict[str, str] = {}
    for line in sums_path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            digest, name = line.split("  ", 1)
            listed[name] = digest
    for name, digest in listed.items():
        path = root / name
        if not path.is_file():
            raise StoreError(f"file {name!r} listed in checksums.txt is missing")
        if _sha256(path) != digest:
            raise ChecksumError(name)

    manifest_path = root / "manifest.json"
    if "manifest.json" not in listed or not manifest_path.is_file():
        raise StoreError(f"{root} has no manifest.json")
    doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    try:
        jsonschema.validate(doc, MANIFEST_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise StoreError(f"manifest schema violation: {exc.message}") from None
    if doc.get("format_version") != FORMAT_VERSION:
        raise StoreError(f"unsupported format version {doc.get('format_version')}")
    manifest = manifest_from_dict(doc["manifest"])

    samples: dict[str, tuple[Any, ...]] = {}
    for d in manifest.streams:
        if d.payload != "inline_samples":
            continue
        if d.kind in EVENT_STREAM_KINDS:
            path = root / f"events.{d.stream_id}.ndjson"
            if not path.is_file():
                raise StoreError(f"manifest references stream {d.stream_id!r} "
                                 f"but {path.name} is missing")
            samples[d.stream_id] = tuple(
                sample_from_dict(d.kind, json.loads(line))
                for line in path.read_text(encoding="utf-8").splitlines()
                if line.strip())
        else:
            path = root / f"samples.{d.stream_id}.csv"
            if not path.is_file():
                raise StoreError(f"manifest references stream {d.stream_id!r} "
                                 f"but {path.name} is missing")
            lines = path.read_text(encoding="utf-8").splitlines()
            expected = ",".join(_csv_header(d.kind, manifest.eeg_band_labels))
            if not lines or lines[0] != expected:
                raise StoreError(f"{path.name}: unexpected header")
            samples[d.stream_id] = tuple(
                _csv_parse(d.kind, line.split(",")) for line in lines[1:])

    session = Session(manifest, samples)
    report = validate_session(session)
    if not report.ok:
        raise StoreError(f"loaded session fails validation: "
                         + "; ".join(report.messages()[:5]))
    return session


# ---------------------------------------------------------------------------
# Dataset export
# ---------------------------------------------------------------------------

def export_dataset(sessions: Iterable[Session], out_root: str | Path) -> Path:
    """Write per-user session directories plus a top-level index.

    Every session must already be anonymized (numeric user id, no identity);
    anything else is refused before any file is written.
    """
    sessions = list(sessions)
    for s in sessions:
        m = s.manifest
        if m.identity is not None or m.user_id is None:
            raise StoreError(f"session {m.session_id!r} is not anonymized; "
                             "export refused")
    out_root = Path(out_root)
    if out_root.exists():
        raise StoreError(f"refusing to overwrite existing path {out_root}")
    out_root.mkdir(parents=True)

    by_user: dict[int, list[Session]] = {}
    for s in sessions:
        by_user.setdefault(s.manifest.user_id, []).append(s)

    index: dict[str, Any] = {"format": "proctorlab-dataset", "users": []}
    for uid in sorted(by_user):
        user_dir = out_root / f"user_{uid:03d}"
        user_entry: dict[str, Any] = {"user_id": uid, "sessions": []}
        for s in sorted(by_user[uid], key=lambda s: s.manifest.session_id):
            m = s.manifest
            save_session(s, user_dir / m.session_id)
            user_entry["sessions"].append({
                "session_id": m.session_id,
                "path": f"user_{uid:03d}/{m.session_id}",
                "cheater_flag": m.cheater_flag,
                "tasks": [{"task_id": t.task_id, "group": t.group,
                           "accuracy": t.accuracy, "duration": t.duration}
                          for t in m.tasks],
            })
            if m.demographics is not None:
                user_entry["demographics"] = {
                    "age": m.demographics.age,
                    "gender": m.demographics.gender,
                    "handedness": m.demographics.handedness,
                }
        user_entry["cheater_flag"] = any(e["cheater_flag"]
                                         for e in user_entry["sessions"])
        index["users"].append(user_entry)
    index["n_users"] = len(index["users"])
    index_path = out_root / "index.json"
    index_path.write_text(_dump_json(index), encoding="utf-8")
    return index_path


def find_sessions(root: str | Path) -> list[Path]:
    """Session directories under ``root`` (itself, children, grandchildren)."""
    root = Path(root)
    if (root / "manifest.json").is_file():
        return [root]
    found = []
    for depth1 in sorted(p for p in root.iterdir() if p.is_dir()):
        if (depth1 / "manifest.json").is_file():
            found.append(depth1)
            continue
        for depth2 in sorted(p for p in depth1.iterdir() if p.is_dir()):
            if (depth2 / "manifest.json").is_file():
                found.append(depth2)
    return found


# ---------------------------------------------------------------------------
# Manifest JSON schema (also shipped as docs/manifest.schema.json)
# ---------------------------------------------------------------------------

_nullable = lambda t: {"type": [t, "null"]}  # noqa: E731

MANIFEST_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "proctorlab session document",
    "type": "object",
    "required": ["format", "format_version", "manifest"],
    "properties": {
        "format": {"const": FORMAT_NAME},
        "format_version": {"type": "integer"},
        "manifest": {
            "type": "object",
            "required": ["session_id", "streams", "tasks", "anomaly_labels",
                         "cheater_flag", "synchronized"],
            "properties": {
                "session_id": {"type": "string"},
                "user_id": _nullable("integer"),
                "identity": _nullable("string"),
                "demographics": {"type": ["object", "null"]},
                "context": {"type": ["object", "null"]},
                "streams": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["stream_id", "kind", "payload"],
                        "properties": {
                            "stream_id": {"type": "string"},
                            "kind": {"type": "string"},
                            "nominal_rate_hz": _nullable("number"),
                            "payload": {"enum": ["inline_samples",
                                                 "external_file"]},
                            "clock_offset_micros": {"type": "integer"},
                            "clock_drift_ppm": {"type": "number"},
                            "media_ref": _nullable("string"),
                        },
                    },
                },
                "tasks": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["task_id", "group", "start", "end",
                                     "accuracy", "duration"],
                        "properties": {
                            "group": {"enum": ["enrollment", "writing",
                                               "multiple_choice"]},
                            "start": {"type": "integer"},
                            "end": {"type": "integer"},
                            "accuracy": {"type": "number", "minimum": 0,
                                         "maximum": 1},
                        },
                    },
                },
                "anomaly_labels": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["start", "end", "kind"],
                        "properties": {
                            "start": {"type": "integer"},
                            "end": {"type": "integer"},
                            "kind": {"enum": ["phone_use", "resource_use",
                                              "absence", "other"]},
                        },
                    },
                },
                "cheater_flag": {"type": "boolean"},
                "eeg_band_labels": {
                    "type": "array", "items": {"type": "string"},
                    "minItems": 5, "maxItems": 5,
                },
                "synchronized": {"type": "boolean"},
            },
        },
    },
}
