import pytest

from proctorlab.model import (
    AnomalyLabel,
    ContextSnapshot,
    Demographics,
    EEGSample,
    FaceSample,
    HeadPoseSample,
    KeyEvent,
    MouseEvent,
    Session,
    SessionManifest,
    StreamDescriptor,
    TaskRecord,
    WearableSample,
)
from proctorlab.synth import TaskPlanItem, generate_cohort
from proctorlab.sync import sync_session

MICROS = 1_000_000


def make_context(**overrides):
    base = dict(
        computer_name="desk-01", private_ip="10.0.0.2", public_ip="185.1.2.3",
        mac="aa:bb:cc:dd:ee:ff", os="Windows 10", architecture="x86_64",
        keyboard_language="en-US", screen_w=1920, screen_h=1080,
        free_memory=4 * 2**30, main_memory=16 * 2**30,
        start_time="2024-03-01T09:00:00", finish_time="2024-03-01T09:05:00",
    )
    base.update(overrides)
    return ContextSnapshot(**base)


def make_session(*, key_events=(), mouse_events=(), eeg=(), wear=(),
                 pose=(), face=(), tasks=(), labels=(), synchronized=True,
                 identity=None, user_id=7, **manifest_overrides):
    """Small hand-built session; every stream descriptor is present."""
    streams = (
        StreamDescriptor("kb", "keyboard", 12.0),
        StreamDescriptor("ms", "mouse", 895.0),
        StreamDescriptor("eeg", "eeg_band", 1.0),
        StreamDescriptor("watch", "smartwatch", 200.0),
        StreamDescriptor("pose", "head_pose", 30.0),
        StreamDescriptor("face", "face_biometrics", 30.0),
    )
    manifest = SessionManifest(
        session_id="unit-session",
        user_id=user_id,
        demographics=Demographics(30, "female", "right"),
        context=make_context(),
        streams=streams,
        tasks=tuple(tasks),
        anomaly_labels=tuple(labels),
        cheater_flag=manifest_overrides.pop("cheater_flag", bool(labels)),
        identity=identity,
        synchronized=synchronized,
        **manifest_overrides,
    )
    samples = {"kb": tuple(key_events), "ms": tuple(mouse_events),
               "eeg": tuple(eeg), "watch": tuple(wear),
               "pose": tuple(pose), "face": tuple(face)}
    return Session(manifest, samples)


def sample_of_each_kind():
    return {
        "keyboard": KeyEvent(1000, "a", "press"),
        "mouse": MouseEvent(2000, "wheel", 10, 20, wheel_delta=3),
        "eeg_band": EEGSample(3000, (1.0, 2.0, 3.5, 0.25, 0.75), 55.5, 40.25,
                              17.5),
        "smartwatch": WearableSample(4000, 72.5, (0.01, -0.02, 9.81),
                                     (0.0, 0.001, -0.002), (20.5, 0.1, 40.0)),
        "head_pose": HeadPoseSample(5000, -5.25, 0.5, 12.75),
        "face_biometrics": FaceSample(6000, 182.5, 0.9375, True),
    }


def writing_task(start_s, end_s, task_id="t-writing", accuracy=0.8):
    return TaskRecord(task_id, "writing", int(start_s * MICROS),
                      int(end_s * MICROS), accuracy, end_s - start_s)


def label(start_s, end_s, kind="phone_use"):
    return AnomalyLabel(int(start_s * MICROS), int(end_s * MICROS), kind)


SHORT_PLAN = (
    TaskPlanItem("enrollment", 12.0),
    TaskPlanItem("writing", 20.0),
    TaskPlanItem("writing", 20.0),
    TaskPlanItem("multiple_choice", 8.0),
)


@pytest.fixture(scope="session")
def short_cohort_synced():
    """Five synced users (two cheaters) on a short task plan."""
    raw = generate_cohort(5, 2, seed=11, task_plan=SHORT_PLAN)
    return [sync_session(s)[0] for s in raw]
