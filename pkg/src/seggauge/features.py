"""Per-task log summaries and the deterministic feature registry.

One sample is one user on one prototype across exactly four tasks. Each
task log reduces to 22 scalars; a sample combines them into 48 base
features (4 seed-position statistics plus mean/median of each scalar),
adds 168 composite ratio features, and reaches 216 log-derived features.
A 22-component PCA over the sample matrix appends projections for 238
features total.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .events import (
    EVENT_GUIDED_SELECT,
    EVENT_JOINT_COMMIT,
    EVENT_JOINT_LONGPRESS,
    EVENT_STROKE,
    EVENT_UNDO,
    InteractionLog,
)

REGISTRY_VERSION = "seggauge-features/1"

TASKS_PER_SAMPLE = 4
PCA_COMPONENT_COUNT = 22
BASE_FEATURE_COUNT = 48
LOG_FEATURE_COUNT = 216
TOTAL_FEATURE_COUNT = 238

# The 22 per-task scalars. Time values are milliseconds; metric values are
# the final snapshot of the log.
SCALAR_NAMES = (
    "undos",
    "interactions",
    "seeds",
    "ctime",
    "itime",
    "wtime",
    "otime",
    "med_ctime",
    "med_itime",
    "med_wtime",
    "first_interaction_time",
    "mean_event_gap",
    "dice",
    "jaccard",
    "rand",
    "ravd",
    "roc_auc",
    "mse",
    "log",
    "obj_tpr",
    "seeds_per_interaction",
    "fg_seed_ratio",
)

SEED_FEATURE_NAMES = (
    "med_rel_seed_x",
    "med_rel_seed_y",
    "std_rel_seed_x",
    "std_rel_seed_y",
)

_TIME_SUMS = ("ctime", "itime", "wtime")
_RATIO_NUMERATORS = (
    "dice",
    "jaccard",
    "rand",
    "ravd",
    "roc_auc",
    "mse",
    "log",
    "obj_tpr",
    "otime",
    "med_ctime",
    "med_itime",
    "med_wtime",
)
_AGGREGATORS = ("mean", "med")

_METRIC_KEYS = ("dice", "jaccard", "rand", "ravd", "roc_auc", "mse", "log", "obj_tpr")

_SEED_EVENT_KINDS = (EVENT_STROKE, EVENT_GUIDED_SELECT, EVENT_JOINT_COMMIT, EVENT_JOINT_LONGPRESS)


def feature_names() -> list[str]:
    """The 216 log-derived feature names in registry order."""

    names = list(SEED_FEATURE_NAMES)
    for scalar in SCALAR_NAMES:
        for agg in _AGGREGATORS:
            names.append(f"{agg}({scalar})")
    for numerator in _RATIO_NUMERATORS:
        for denominator in _TIME_SUMS:
            for agg in _AGGREGATORS:
                names.append(f"{agg}({numerator}/{denominator})")
    for numerator in _RATIO_NUMERATORS:
        for denominator in _TIME_SUMS:
            for agg in _AGGREGATORS:
                names.append(f"{agg}({numerator})/{agg}({denominator})")
    for t1 in _TIME_SUMS:
        for t2 in _TIME_SUMS:
            if t1 == t2:
                continue
            for agg in _AGGREGATORS:
                names.append(f"{agg}({t1}/{t2})")
    for t1 in _TIME_SUMS:
        for t2 in _TIME_SUMS:
            if t1 == t2:
                continue
            for agg in _AGGREGATORS:
                names.append(f"{agg}({t1})/{agg}({t2})")
    return names


def pca_feature_names(count: int = PCA_COMPONENT_COUNT) -> list[str]:
    return [f"pca_val_{i}" for i in range(count)]


def full_feature_names() -> list[str]:
    return feature_names() + pca_feature_names()


@dataclass
class TaskSummary:
    """The 22 per-task scalars plus the submitted seed coordinates."""

    scalars: dict[str, float]
    seed_rel_coords: np.ndarray
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        missing = [n for n in SCALAR_NAMES if n not in self.scalars]
        if missing:
            raise InputError(f"task summary missing scalars: {missing}")
        coords = np.asarray(self.seed_rel_coords, dtype=np.float64).reshape(-1, 2)
        self.seed_rel_coords = coords

    def vector(self) -> np.ndarray:
        return np.array([self.scalars[n] for n in SCALAR_NAMES], dtype=np.float64)


def _median(values: list[float]) -> float:
    return float(np.median(values)) if values else 0.0


def _seed_points_of(event_kind: str, payload: dict) -> list[tuple[int, int, str]]:
    if event_kind == EVENT_STROKE:
        return [(int(x), int(y), payload["label"]) for x, y in payload["points"]]
    if event_kind == EVENT_GUIDED_SELECT:
        return [
            (int(x), int(y), lbl)
            for (x, y), lbl in zip(payload["points"], payload["labels"])
        ]
    if event_kind == EVENT_JOINT_COMMIT:
        return [(int(x), int(y), lbl) for x, y, lbl in payload["seeds"]]
    if event_kind == EVENT_JOINT_LONGPRESS:
        x, y = payload["position"]
        return [(int(x), int(y), payload["label"])]
    return []


def summarize_task(log: InteractionLog) -> TaskSummary:
    """Reduce one interaction log to the 22 registry scalars.

    Seed counts are the totals submitted through user actions (undone
    strokes still count as effort). An empty log yields an all-zero summary
    flagged "empty_log"; undefined final metrics are zeroed and flagged.
    """

    log.validate()
    flags: list[str] = []
    if not log.events:
        return TaskSummary(
            scalars={name: 0.0 for name in SCALAR_NAMES},
            seed_rel_coords=np.empty((0, 2)),
            flags=("empty_log",),
        )

    user_events = log.interaction_events()
    undos = sum(1 for e in user_events if e.kind == EVENT_UNDO)
    seed_records: list[tuple[int, int, str]] = []
    for event in user_events:
        seed_records.extend(_seed_points_of(event.kind, event.payload))
    n_seeds = len(seed_records)
    fg_ratio = (
        sum(1 for _, _, lbl in seed_records if lbl == "foreground") / n_seeds if n_seeds else 0.0
    )

    wall_by_seq = [e.wall_ms for e in log.events]
    sum_ctime = float(sum(e.computation_ms for e in log.events))
    sum_itime = float(sum(e.interaction_ms for e in log.events))
    sum_wtime = float(wall_by_seq[-1])
    sum_otime = max(0.0, sum_wtime - sum_ctime - sum_itime)

    user_walls = [e.wall_ms for e in user_events]
    prev_wall = {e.seq: (wall_by_seq[e.seq - 1] if e.seq > 0 else 0.0) for e in user_events}
    wall_deltas = [e.wall_ms - prev_wall[e.seq] for e in user_events]
    gaps = [b - a for a, b in zip(user_walls, user_walls[1:])]

    finals = log.final_metrics() or {}
    metric_values = {}
    for key in _METRIC_KEYS:
        value = finals.get(key)
        if value is None or not np.isfinite(value):
            if key in finals or not finals:
                flags.append(f"undefined_{key}")
            value = 0.0
        metric_values[key] = float(value)

    width = max(log.header.width - 1, 1)
    height = max(log.header.height - 1, 1)
    coords = np.array(
        [(x / width, y / height) for x, y, _ in seed_records], dtype=np.float64
    ).reshape(-1, 2)

    scalars = {
        "undos": float(undos),
        "interactions": float(len(user_events)),
        "seeds": float(n_seeds),
        "ctime": sum_ctime,
        "itime": sum_itime,
        "wtime": sum_wtime,
        "otime": sum_otime,
        "med_ctime": _median([e.computation_ms for e in user_events]),
        "med_itime": _median([e.interaction_ms for e in user_events]),
        "med_wtime": _median(wall_deltas),
        "first_interaction_time": float(user_walls[0]) if user_walls else 0.0,
        "mean_event_gap": float(np.mean(gaps)) if gaps else 0.0,
        "seeds_per_interaction": n_seeds / len(user_events) if user_events else 0.0,
        "fg_seed_ratio": fg_ratio,
        **metric_values,
    }
    return TaskSummary(scalars=scalars, seed_rel_coords=coords, flags=tuple(flags))


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    names: tuple[str, ...]
    flags: tuple[str, ...] = ()
    version: str = REGISTRY_VERSION


def build_features(
    summaries: list[TaskSummary], seed_events: np.ndarray | None = None
) -> FeatureVector:
    """Combine exactly four task summaries into the 216 log-derived features.

    ``seed_events`` optionally overrides the pooled relative seed
    coordinates (rows of x, y); by default they are collected from the
    summaries. Ratios with a zero denominator become 0 and are flagged.
    """

    if len(summaries) != TASKS_PER_SAMPLE:
        raise InputError(f"expected {TASKS_PER_SAMPLE} task summaries, got {len(summaries)}")
    flags: list[str] = []
    if seed_events is None:
        pools = [s.seed_rel_coords for s in summaries]
        coords = np.concatenate(pools) if pools else np.empty((0, 2))
    else:
        coords = np.asarray(seed_events, dtype=np.float64).reshape(-1, 2)

    values: list[float] = []
    if coords.shape[0]:
        values.extend(
            [
                float(np.median(coords[:, 0])),
                float(np.median(coords[:, 1])),
                float(coords[:, 0].std()),
                float(coords[:, 1].std()),
            ]
        )
    else:
        flags.append("no_user_seeds")
        values.extend([0.5, 0.5, 0.0, 0.0])

    per_scalar = {
        name: np.array([s.scalars[name] for s in summaries], dtype=np.float64)
        for name in SCALAR_NAMES
    }

    def agg(series: np.ndarray, how: str) -> float:
        return float(series.mean()) if how == "mean" else float(np.median(series))

    def safe_div(num: float, den: float, name: str) -> float:
        if den == 0.0:
            flags.append(f"zero_denominator:{name}")
            return 0.0
        return num / den

    for scalar in SCALAR_NAMES:
        for how in _AGGREGATORS:
            values.append(agg(per_scalar[scalar], how))

    def ratio_series(numerator: str, denominator: str) -> np.ndarray:
        num = per_scalar[numerator]
        den = per_scalar[denominator]
        out = np.zeros_like(num)
        for i in range(num.size):
            name = f"{numerator}/{denominator}[task {i}]"
            out[i] = safe_div(float(num[i]), float(den[i]), name)
        return out

    for numerator in _RATIO_NUMERATORS:
        for denominator in _TIME_SUMS:
            series = ratio_series(numerator, denominator)
            for how in _AGGREGATORS:
                values.append(agg(series, how))
    for numerator in _RATIO_NUMERATORS:
        for denominator in _TIME_SUMS:
            for how in _AGGREGATORS:
                values.append(
                    safe_div(
                        agg(per_scalar[numerator], how),
                        agg(per_scalar[denominator], how),
                        f"{how}({numerator})/{how}({denominator})",
                    )
                )
    for t1 in _TIME_SUMS:
        for t2 in _TIME_SUMS:
            if t1 == t2:
                continue
            series = ratio_series(t1, t2)
            for how in _AGGREGATORS:
                values.append(agg(series, how))
    for t1 in _TIME_SUMS:
        for t2 in _TIME_SUMS:
            if t1 == t2:
                continue
            for how in _AGGREGATORS:
                values.append(
                    safe_div(
                        agg(per_scalar[t1], how),
                        agg(per_scalar[t2], how),
                        f"{how}({t1})/{how}({t2})",
                    )
                )

    vector = np.asarray(values, dtype=np.float64)
    names = tuple(feature_names())
    if vector.size != LOG_FEATURE_COUNT or len(names) != LOG_FEATURE_COUNT:
        raise AssertionError(f"feature registry out of sync: {vector.size} values")
    return FeatureVector(values=vector, names=names, flags=tuple(dict.fromkeys(flags)))


# ---------------------------------------------------------------------------
# PCA augmentation


@dataclass
class PcaModel:
    mean: np.ndarray
    scale: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    flags: tuple[str, ...] = ()
    version: str = REGISTRY_VERSION

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def project(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        z = (rows - self.mean) / self.scale
        return z @ self.components.T

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "flags": list(self.flags),
        }

    @classmethod
    def from_json(cls, data: dict) -> "PcaModel":
        return cls(
            mean=np.asarray(data["mean"], dtype=np.float64),
            scale=np.asarray(data["scale"], dtype=np.float64),
            components=np.asarray(data["components"], dtype=np.float64),
            explained_variance=np.asarray(data["explained_variance"], dtype=np.float64),
            flags=tuple(data.get("flags", ())),
            version=data.get("version", REGISTRY_VERSION),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PcaModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


_POWER_TOLERANCE = 1e-10
_POWER_MAX_ITER = 2000


def _dominant_eigenpair(matrix: np.ndarray, basis: list[np.ndarray], start_seed: int):
    n = matrix.shape[0]
    rng = np.random.default_rng(start_seed)
    v = rng.standard_normal(n)
    for b in basis:
        v -= (v @ b) * b
    norm = np.linalg.norm(v)
    v = v / norm if norm > 0 else _orthonormal_fill(basis, n)
    value = 0.0
    for _ in range(_POWER_MAX_ITER):
        w = matrix @ v
        for b in basis:
            w -= (w @ b) * b
        norm = np.linalg.norm(w)
        if norm <= 1e-300:
            return 0.0, _orthonormal_fill(basis, n)
        w /= norm
        new_value = float(w @ (matrix @ w))
        if abs(new_value - value) <= _POWER_TOLERANCE * max(1.0, abs(new_value)):
            return new_value, w
        value = new_value
        v = w
    return value, v


def _orthonormal_fill(basis: list[np.ndarray], n: int) -> np.ndarray:
    # Deterministic orthonormal completion from the standard basis.
    for j in range(n):
        v = np.zeros(n)
        v[j] = 1.0
        for b in basis:
            v -= (v @ b) * b
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            return v / norm
    raise AssertionError("cannot extend orthonormal basis")


def fit_pca(matrix: np.ndarray, n_components: int = PCA_COMPONENT_COUNT) -> PcaModel:
    """Standardize the sample matrix and extract leading components.

    Eigenvectors come from power iteration with deflation on the sample
    covariance. Components are capped at samples - 1 (flagged when that
    bites); zero-variance features get unit scale and a flag.
    """

    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InputError("PCA needs a (samples, features) matrix with at least 2 samples")
    n_samples, n_features = X.shape
    flags: list[str] = []
    k = min(n_components, n_samples - 1, n_features)
    if k < n_components:
        flags.append(f"components_capped:{k}")

    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    zero_scale = scale == 0.0
    if zero_scale.any():
        flags.append(f"zero_variance_features:{int(zero_scale.sum())}")
        scale = np.where(zero_scale, 1.0, scale)
    z = (X - mean) / scale
    cov = (z.T @ z) / (n_samples - 1)

    basis: list[np.ndarray] = []
    eigenvalues: list[float] = []
    deflated = cov.copy()
    for comp_index in range(k):
        value, vector = _dominant_eigenpair(deflated, basis, start_seed=7_919 + comp_index)
        value = max(value, 0.0)
        basis.append(vector)
        eigenvalues.append(value)
        deflated = deflated - value * np.outer(vector, vector)

    order = np.argsort(-np.asarray(eigenvalues), kind="stable")
    components = np.asarray([basis[int(i)] for i in order])
    variances = np.asarray([eigenvalues[int(i)] for i in order])
    return PcaModel(
        mean=mean, scale=scale, components=components, explained_variance=variances, flags=tuple(flags)
    )


def apply_pca(model: PcaModel, vector: np.ndarray) -> np.ndarray:
    """Append the PCA projections to a 216-feature vector (216 -> 238 by default)."""

    vector = np.asarray(vector, dtype=np.float64).ravel()
    if vector.size != model.mean.size:
        raise InputError(f"feature vector length {vector.size} does not match PCA model")
    return np.concatenate([vector, model.project(vector)[0]])


def augment_matrix(model: PcaModel, matrix: np.ndarray) -> np.ndarray:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    return np.hstack([matrix, model.project(matrix)])


# ---------------------------------------------------------------------------
# CSV helpers


def write_feature_csv(path: str | Path, rows: np.ndarray, sample_ids: list[str], names: list[str]) -> None:
    rows = np.atleast_2d(rows)
    if rows.shape[1] != len(names):
        raise InputError("feature matrix width does not match header names")
    lines = ["sample_id," + ",".join(names)]
    for sample_id, row in zip(sample_ids, rows):
        lines.append(sample_id + "," + ",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_feature_csv(path: str | Path) -> tuple[list[str], list[str], np.ndarray]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise InputError(f"empty feature file {path}")
    header = lines[0].split(",")
    if header[0] != "sample_id":
        raise InputError("feature CSV must start with a sample_id column")
    names = header[1:]
    ids = []
    rows = []
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split(",")
        ids.append(parts[0])
        rows.append([float(v) for v in parts[1:]])
    return ids, names, np.asarray(rows, dtype=np.float64)
