"""Interactive seeded segmentation prototypes with usability-score prediction."""

from .growcut import (
    LABEL_BACKGROUND,
    LABEL_FOREGROUND,
    SeedPoint,
    SegmentationResult,
    rgb_to_luminance,
    segment,
)
from .metrics import MetricReport, metric_report
from .questionnaires import attrakdiff_score, portfolio, sus_adjective, sus_score
from .sessions import Session, replay_log
from .tasks import Task, builtin_tasks, load_manifest

__version__ = "1.0.0"

__all__ = [
    "LABEL_BACKGROUND",
    "LABEL_FOREGROUND",
    "MetricReport",
    "SeedPoint",
    "SegmentationResult",
    "Session",
    "Task",
    "attrakdiff_score",
    "builtin_tasks",
    "load_manifest",
    "metric_report",
    "portfolio",
    "replay_log",
    "rgb_to_luminance",
    "segment",
    "sus_adjective",
    "sus_score",
    "__version__",
]
