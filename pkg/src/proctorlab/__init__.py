"""proctorlab: behavioral monitoring toolkit for remote evaluation sessions.

Ingests heterogeneous behavioral/biometric sensor streams into synchronized
sessions, extracts keystroke/mouse/physiological features, and evaluates
five monitoring challenges (attention, anomaly detection, performance
prediction, authentication, pulse) with floor baselines and metrics.
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
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
    ValidationReport,
    WearableSample,
    anonymize,
    anonymize_session,
    validate_manifest,
    validate_session,
)
from .protocol import ClockEstimate, estimate_clock_offset  # noqa: F401
from .sync import resample_uniform, sync_session, window_session  # noqa: F401
from .features import (  # noqa: F401
    fixed_text_template,
    keystroke_features,
    mouse_features,
    physio_aggregate,
)
from .metrics import ScoreSet, compute_eer, interval_f1, mae  # noqa: F401
from .challenges import (  # noqa: F401
    CHALLENGES,
    detect_anomalies,
    run_challenge,
    verify_keystroke,
)
from .store import export_dataset, load_session, save_session  # noqa: F401
from .synth import generate_cohort, generate_profile, generate_session  # noqa: F401
