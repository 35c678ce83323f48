"""Session store: round trips, determinism, integrity, export."""

import json

import pytest

from conftest import SHORT_PLAN, make_session
from proctorlab.model import EEGSample, KeyEvent
from proctorlab.store import (
    MANIFEST_SCHEMA,
    ChecksumError,
    StoreError,
    export_dataset,
    find_sessions,
    load_session,
    save_session,
)
from proctorlab.synth import generate_cohort, generate_profile, generate_session


@pytest.fixture()
def session():
    return generate_session(generate_profile(3), SHORT_PLAN, seed=1)


class TestSaveLoad:
    def test_layout_files_present(self, tmp_path, session):
        save_session(session, tmp_path / "s1")
        names = {p.name for p in (tmp_path / "s1").iterdir()}
        assert "manifest.json" in names
        assert "checksums.txt" in names
        assert "events.keyboard.ndjson" in names
        assert "samples.smartwatch.csv" in names

    def test_round_trip_equality(self, tmp_path, session):
        save_session(session, tmp_path / "s1")
        assert load_session(tmp_path / "s1") == session

    def test_repeated_save_byte_identical(self, tmp_path, session):
        save_session(session, tmp_path / "a")
        save_session(session, tmp_path / "b")
        for p in sorted((tmp_path / "a").iterdir()):
            assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()

    def test_no_silent_overwrite(self, tmp_path, session):
        save_session(session, tmp_path / "s1")
        with pytest.raises(StoreError, match="overwrite"):
            save_session(session, tmp_path / "s1")

    def test_invalid_session_writes_nothing(self, tmp_path):
        bad = make_session(eeg=[EEGSample(0, (1.0,) * 5, 150.0, 50.0)])
        with pytest.raises(StoreError, match="validation"):
            save_session(bad, tmp_path / "bad")
        assert list(tmp_path.iterdir()) == []

    def test_flipped_byte_names_the_file(self, tmp_path, session):
        save_session(session, tmp_path / "s1")
        victim = tmp_path / "s1" / "samples.eeg-band.csv"
        data = bytearray(victim.read_bytes())
        data[len(data) // 2] ^= 0x01
        victim.write_bytes(bytes(data))
        with pytest.raises(ChecksumError, match="samples.eeg-band.csv"):
            load_session(tmp_path / "s1")

    def test_missing_stream_file(self, tmp_path, session):
        save_session(session, tmp_path / "s1")
        # rewrite checksums without the keyboard file, then delete it
        root = tmp_path / "s1"
        sums = [line for line in (root / "checksums.txt").read_text().splitlines()
                if "events.keyboard.ndjson" not in line]
        (root / "checksums.txt").write_text("\n".join(sums) + "\n")
        (root / "events.keyboard.ndjson").unlink()
        with pytest.raises(StoreError, match="keyboard"):
            load_session(root)

    def test_manifest_schema_violation(self, tmp_path, session):
        save_session(session, tmp_path / "s1")
        root = tmp_path / "s1"
        doc = json.loads((root / "manifest.json").read_text())
        del doc["manifest"]["streams"]
        body = json.dumps(doc, sort_keys=True, indent=2) + "\n"
        (root / "manifest.json").write_text(body)
        import hashlib
        digest = hashlib.sha256(body.encode()).hexdigest()
        sums = []
        for line in (root / "checksums.txt").read_text().splitlines():
            if line.endswith("manifest.json"):
                sums.append(f"{digest}  manifest.json")
            else:
                sums.append(line)
        (root / "checksums.txt").write_text("\n".join(sums) + "\n")
        with pytest.raises(StoreError, match="schema"):
            load_session(root)

    def test_schema_doc_in_sync_with_code(self):
        shipped = json.loads(
            (__import__("pathlib").Path(__file__).parent.parent / "docs"
             / "manifest.schema.json").read_text())
        assert shipped == MANIFEST_SCHEMA

    def test_sample_order_preserved(self, tmp_path):
        events = [KeyEvent(10, "b", "press"), KeyEvent(15, "a", "press"),
                  KeyEvent(90, "b", "release"), KeyEvent(95, "a", "release")]
        session = make_session(key_events=events)
        save_session(session, tmp_path / "s1")
        assert load_session(tmp_path / "s1").stream("kb") == tuple(events)


class TestExport:
    def test_per_user_directories_and_index(self, tmp_path):
        sessions = generate_cohort(3, 1, seed=2, task_plan=SHORT_PLAN)
        index_path = export_dataset(sessions, tmp_path / "bundle")
        index = json.loads(index_path.read_text())
        assert index["n_users"] == 3
        dirs = {p.name for p in (tmp_path / "bundle").iterdir() if p.is_dir()}
        assert dirs == {"user_001", "user_002", "user_003"}
        user1 = index["users"][0]
        assert user1["cheater_flag"] is True  # first user is the cheater
        assert {t["group"] for s in user1["sessions"]
                for t in s["tasks"]} == {"enrollment", "writing",
                                         "multiple_choice"}
        assert "demographics" in user1

    def test_refuses_non_anonymized(self, tmp_path):
        raw = generate_session(generate_profile(1), SHORT_PLAN, seed=1)
        assert raw.manifest.identity is not None
        with pytest.raises(StoreError, match="not anonymized"):
            export_dataset([raw], tmp_path / "bundle")
        assert not (tmp_path / "bundle").exists()

    def test_empty_session_list(self, tmp_path):
        index_path = export_dataset([], tmp_path / "bundle")
        index = json.loads(index_path.read_text())
        assert index["n_users"] == 0
        assert [p.name for p in (tmp_path / "bundle").iterdir()] == \
            ["index.json"]

    def test_find_sessions_walks_export_layout(self, tmp_path):
        sessions = generate_cohort(2, 0, seed=3, task_plan=SHORT_PLAN)
        export_dataset(sessions, tmp_path / "bundle")
        found = find_sessions(tmp_path / "bundle")
        assert len(found) == 2
        assert all(load_session(p).manifest.user_id for p in found)
