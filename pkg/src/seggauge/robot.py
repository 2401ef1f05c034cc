"""Rule-based user simulation driving the interactive prototypes.

The error-corrector persona compares the current mask with ground truth,
targets the deepest interior point of the largest error component, and
emits a protocol-legal correction. The tri-map sampler draws seeds from
eroded/dilated ground truth. Cohort synthesis runs persona x task sessions
and derives synthetic questionnaire targets from a documented hidden
function of the behavioral summaries, so the prediction pipeline has
learnable signal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import imageops
from .errors import InputError, ProtocolError
from .events import InteractionLog
from .features import TaskSummary, summarize_task
from .growcut import LABEL_BACKGROUND, LABEL_FOREGROUND, SeedPoint
from .metrics import dice
from .sessions import (
    Finish,
    GuidedOptions,
    GuidedSelect,
    JointCommit,
    JointLongPress,
    JointProposals,
    JointToggle,
    Session,
    Stroke,
)
from .tasks import Task

DEFAULT_DICE_TARGET = 0.95

STRATEGIES = ("error_corrector", "trimap_sampler")


@dataclass(frozen=True)
class RobotPersona:
    name: str = "default"
    strategy: str = "error_corrector"
    jitter_sigma: float = 0.0
    patience: int = 25
    dice_target: float = DEFAULT_DICE_TARGET
    # Log-normal parameters (of the underlying normal) for simulated times, ms.
    interaction_time_mu: float = 6.3
    interaction_time_sigma: float = 0.4
    think_time_mu: float = 7.0
    think_time_sigma: float = 0.5

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise InputError(f"unknown robot strategy {self.strategy!r}")
        if self.jitter_sigma < 0:
            raise InputError("jitter sigma must be nonnegative")
        if self.patience < 1:
            raise InputError("patience must be at least 1")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "RobotPersona":
        return cls(**data)


def trimap_seeds(
    gt: np.ndarray,
    erosion_radius: int,
    dilation_radius: int,
    k: int,
    rng: np.random.Generator,
) -> list[SeedPoint]:
    """k foreground samples from the eroded mask, k background from outside the dilated one.

    If erosion empties the mask the radius is halved until usable (flagged
    via a zero-radius fall back to the mask itself).
    """

    gt = np.asarray(gt).astype(bool)
    if not gt.any():
        raise InputError("ground truth mask is empty")
    if erosion_radius < 1 or dilation_radius < 1:
        raise InputError("tri-map radii must be at least 1")
    if k == 0:
        return []

    radius = erosion_radius
    core = imageops.erode(gt, radius)
    while not core.any() and radius > 0:
        radius //= 2
        core = imageops.erode(gt, radius) if radius else gt
    outside = ~imageops.dilate(gt, dilation_radius)

    def sample(mask: np.ndarray, label: int) -> list[SeedPoint]:
        ys, xs = np.nonzero(mask)
        if ys.size == 0:
            return []
        take = min(k, ys.size)
        picks = rng.choice(ys.size, size=take, replace=False)
        return [SeedPoint(int(xs[i]), int(ys[i]), label) for i in np.sort(picks)]

    return sample(core, LABEL_FOREGROUND) + sample(outside, LABEL_BACKGROUND)


def largest_error_component(pred: np.ndarray, gt: np.ndarray) -> np.ndarray | None:
    """Mask of the biggest connected disagreement region, or None when equal."""

    diff = np.asarray(pred).astype(bool) ^ np.asarray(gt).astype(bool)
    if not diff.any():
        return None
    labels, count = imageops.connected_components(diff)
    sizes = [(labels == c).sum() for c in range(1, count + 1)]
    best = int(np.argmax(sizes)) + 1
    return labels == best


def deepest_point(component: np.ndarray) -> tuple[int, int]:
    """Interior cell maximizing steps-to-leave distance; raster order breaks ties."""

    depth = imageops.steps_to_leave(component)
    flat = depth.ravel()
    order = np.lexsort((np.arange(flat.size), -flat))
    y, x = divmod(int(order[0]), component.shape[1])
    return int(x), int(y)


def _jittered(x: int, y: int, sigma: float, shape: tuple[int, int], rng: np.random.Generator):
    if sigma > 0:
        x = int(round(x + rng.normal(0.0, sigma)))
        y = int(round(y + rng.normal(0.0, sigma)))
    height, width = shape
    return min(max(x, 0), width - 1), min(max(y, 0), height - 1)


def error_correct_step(session: Session, gt: np.ndarray, persona: RobotPersona, rng: np.random.Generator):
    """Pick the next corrective action for the session, or Finish when done."""

    if session.finished:
        raise ProtocolError("session already finished")
    gt = np.asarray(gt).astype(bool)
    current_dice = dice(session.result.mask, gt)
    component = largest_error_component(session.result.mask, gt)
    if component is None or current_dice >= persona.dice_target:
        return Finish()

    if session.kind == "guided":
        options = session.pending
        assert isinstance(options, GuidedOptions)
        (x1, y1), (x2, y2) = options.points
        index = 2 * int(gt[y1, x1]) + int(gt[y2, x2])
        return GuidedSelect(option=index)

    if session.kind == "joint":
        proposals = session.pending
        assert isinstance(proposals, JointProposals)
        if not proposals.committed:
            for i, ((x, y), label) in enumerate(zip(proposals.positions, proposals.labels)):
                wanted = LABEL_FOREGROUND if gt[y, x] else LABEL_BACKGROUND
                if label != wanted:
                    return JointToggle(index=i)
            return JointCommit()
        tx, ty = deepest_point(component)
        tx, ty = _jittered(tx, ty, persona.jitter_sigma, gt.shape, rng)
        return JointLongPress(x=tx, y=ty)

    # Semi-manual: paint the ground-truth-consistent part of the error
    # component in one stroke. Smaller local dabs make the Dice trajectory
    # non-monotone because new seeds reroute the automaton's competition
    # globally; covering the region pins it permanently.
    tx, ty = deepest_point(component)
    tx, ty = _jittered(tx, ty, persona.jitter_sigma, gt.shape, rng)
    wanted_fg = bool(gt[ty, tx])
    label = LABEL_FOREGROUND if wanted_fg else LABEL_BACKGROUND
    ys, xs = np.nonzero(component & (gt == wanted_fg))
    if ys.size == 0:
        ys, xs = np.array([ty]), np.array([tx])
        label = LABEL_FOREGROUND if gt[ty, tx] else LABEL_BACKGROUND
    points = tuple((int(x), int(y)) for x, y in zip(xs, ys))
    return Stroke(points=points, label=label)


def _simulated_times(persona: RobotPersona, rng: np.random.Generator) -> tuple[float, float]:
    interaction = float(rng.lognormal(persona.interaction_time_mu, persona.interaction_time_sigma))
    think = float(rng.lognormal(persona.think_time_mu, persona.think_time_sigma))
    return interaction, think


def guided_initial_seed(gt: np.ndarray) -> SeedPoint:
    """One foreground seed for guided evaluation: the ground-truth centroid.

    Falls back to the deepest interior cell when the centroid lands outside
    the object (concave shapes).
    """

    gt = np.asarray(gt).astype(bool)
    ys, xs = np.nonzero(gt)
    cy, cx = int(round(ys.mean())), int(round(xs.mean()))
    if not gt[cy, cx]:
        cx, cy = deepest_point(gt)
    return SeedPoint(cx, cy, LABEL_FOREGROUND)


def drive_session(
    task: Task,
    kind: str,
    persona: RobotPersona,
    rng: np.random.Generator,
    user_id: str = "robot",
    log_path: str | Path | None = None,
    rng_seed: int | None = None,
) -> Session:
    """Run one robot session to finish and return it (log included)."""

    if task.ground_truth is None:
        raise InputError("robot sessions need a task with ground truth")
    if persona.strategy == "trimap_sampler":
        return _drive_trimap(task, kind, persona, rng, user_id, log_path, rng_seed)
    if kind == "guided" and not task.initial_seeds:
        task = Task(
            task_id=task.task_id,
            image=task.image,
            ground_truth=task.ground_truth,
            initial_seeds=[guided_initial_seed(task.ground_truth)],
        )

    session = Session(
        task, kind, user_id=user_id, log_path=log_path, timing="simulated", rng_seed=rng_seed
    )
    interactions = 0
    while not session.finished:
        if interactions >= persona.patience:
            action = Finish()
        else:
            action = error_correct_step(session, task.ground_truth, persona, rng)
        interaction_ms, think_ms = _simulated_times(persona, rng)
        session.apply(action, interaction_ms=interaction_ms, think_ms=think_ms)
        if not isinstance(action, Finish):
            interactions += 1
    return session


def _drive_trimap(task, kind, persona, rng, user_id, log_path, rng_seed) -> Session:
    if kind != "semi_manual":
        raise InputError("the tri-map sampler persona drives semi-manual sessions only")
    session = Session(
        task, kind, user_id=user_id, log_path=log_path, timing="simulated", rng_seed=rng_seed
    )
    seeds = trimap_seeds(task.ground_truth, erosion_radius=2, dilation_radius=2, k=persona.patience, rng=rng)
    for seed in seeds:
        interaction_ms, think_ms = _simulated_times(persona, rng)
        session.apply(
            Stroke(points=((seed.x, seed.y),), label=seed.label),
            interaction_ms=interaction_ms,
            think_ms=think_ms,
        )
    interaction_ms, think_ms = _simulated_times(persona, rng)
    session.apply(Finish(), interaction_ms=interaction_ms, think_ms=think_ms)
    return session


# ---------------------------------------------------------------------------
# Cohort synthesis


HIDDEN_TARGET_PARAMS = {
    # Normalization constants for the behavioral drivers.
    "wall_time_scale_ms": 90_000.0,
    "undo_scale": 4.0,
    "gap_scale_ms": 15_000.0,
    "interaction_scale": 10.0,
    # Linear weights on (dice, speed, tidiness, engagement, pace) per target.
    "PQ": (0.55, 0.35, 0.10, 0.0, 0.0),
    "ATT": (0.45, 0.25, 0.0, 0.0, 0.30),
    "HQ-I": (0.40, 0.40, 0.20, 0.0, 0.0),
    "HQ-S": (0.30, 0.0, 0.0, 0.50, 0.20),
    "SUS": (0.60, 0.30, 0.10, 0.0, 0.0),
}


def hidden_targets(summaries: list[TaskSummary]) -> dict[str, float]:
    """The documented hidden function mapping behavior to questionnaire scores.

    Drivers are aggregates of the per-task scalars, squashed to [0, 1]:
    accuracy (mean final dice), speed (exp decay in mean wall time),
    tidiness (exp decay in undo count), engagement (saturating interaction
    count), and pace (exp decay in mean event gap). AttrakDiff targets map
    to 1..7, SUS to 0..100; the combined hedonic score is the mean of its
    two components.
    """

    p = HIDDEN_TARGET_PARAMS
    dice_mean = float(np.mean([s.scalars["dice"] for s in summaries]))
    wall_mean = float(np.mean([s.scalars["wtime"] for s in summaries]))
    undo_mean = float(np.mean([s.scalars["undos"] for s in summaries]))
    gap_mean = float(np.mean([s.scalars["mean_event_gap"] for s in summaries]))
    inter_mean = float(np.mean([s.scalars["interactions"] for s in summaries]))

    drivers = (
        min(max(dice_mean, 0.0), 1.0),
        math.exp(-wall_mean / p["wall_time_scale_ms"]),
        math.exp(-undo_mean / p["undo_scale"]),
        inter_mean / (inter_mean + p["interaction_scale"]),
        math.exp(-gap_mean / p["gap_scale_ms"]),
    )

    def blend(weights) -> float:
        return float(sum(w * d for w, d in zip(weights, drivers)))

    out = {}
    for name in ("PQ", "ATT", "HQ-I", "HQ-S"):
        out[name] = 1.0 + 6.0 * blend(p[name])
    out["HQ"] = 0.5 * (out["HQ-I"] + out["HQ-S"])
    out["SUS"] = 100.0 * blend(p["SUS"])
    return out


def default_personas() -> list[RobotPersona]:
    return [
        RobotPersona(name="careful", jitter_sigma=0.0, patience=30,
                     interaction_time_mu=6.6, think_time_mu=7.4),
        RobotPersona(name="average", jitter_sigma=1.0, patience=22,
                     interaction_time_mu=6.2, think_time_mu=7.0),
        RobotPersona(name="hasty", jitter_sigma=2.0, patience=12, dice_target=0.9,
                     interaction_time_mu=5.8, think_time_mu=6.4),
    ]


@dataclass
class CohortSample:
    sample_id: str
    user_id: str
    kind: str
    persona: RobotPersona
    logs: list[InteractionLog]
    summaries: list[TaskSummary] = field(default_factory=list)
    targets: dict[str, float] = field(default_factory=dict)
    clean_targets: dict[str, float] = field(default_factory=dict)


@dataclass
class Cohort:
    samples: list[CohortSample]
    noise_level: float
    rng_seed: int
    hidden_params: dict = field(default_factory=lambda: dict(HIDDEN_TARGET_PARAMS))


def synthesize_cohort(
    tasks: list[Task],
    personas: list[RobotPersona] | None,
    n_users: int,
    rng_seed: int = 0,
    noise_level: float = 0.1,
    log_dir: str | Path | None = None,
    kinds: tuple[str, ...] = ("semi_manual", "guided", "joint"),
) -> Cohort:
    """Run persona-driven sessions for every user and derive synthetic targets.

    One sample is one user on one prototype kind over all tasks. Noise is
    multiplicative: target * (1 + noise * z) with standard normal z, then
    clipped to the score range. Fixed seeds make the cohort bit-identical.
    """

    if not tasks:
        raise InputError("cohort needs at least one task")
    personas = personas or default_personas()
    if not personas:
        raise InputError("cohort needs at least one persona")
    samples = []
    for u in range(n_users):
        user_rng = np.random.default_rng(np.random.SeedSequence(entropy=rng_seed, spawn_key=(u,)))
        persona = personas[u % len(personas)]
        kind = kinds[u % len(kinds)]
        user_id = f"user{u:03d}"
        logs = []
        summaries = []
        for t_index, task in enumerate(tasks):
            log_path = None
            if log_dir is not None:
                log_path = Path(log_dir) / user_id / f"{kind}_{task.task_id}.segl"
            session = drive_session(
                task,
                kind,
                persona,
                user_rng,
                user_id=user_id,
                log_path=log_path,
                rng_seed=rng_seed,
            )
            log = session.log()
            logs.append(log)
            summaries.append(summarize_task(log))
        clean = hidden_targets(summaries)
        targets = dict(clean)
        noise_rng = np.random.default_rng(np.random.SeedSequence(entropy=rng_seed, spawn_key=(u, 1)))
        if noise_level > 0:
            for name, value in list(targets.items()):
                noisy = value * (1.0 + noise_level * float(noise_rng.standard_normal()))
                lo, hi = (0.0, 100.0) if name == "SUS" else (1.0, 7.0)
                targets[name] = float(min(max(noisy, lo), hi))
        samples.append(
            CohortSample(
                sample_id=f"{user_id}:{kind}",
                user_id=user_id,
                kind=kind,
                persona=persona,
                logs=logs,
                summaries=summaries,
                targets=targets,
                clean_targets=clean,
            )
        )
    return Cohort(samples=samples, noise_level=noise_level, rng_seed=rng_seed)


def write_targets_csv(cohort: Cohort, path: str | Path, clean: bool = False) -> None:
    from .gbrf import TARGET_NAMES

    lines = ["sample_id," + ",".join(TARGET_NAMES)]
    for sample in cohort.samples:
        values = sample.clean_targets if clean else sample.targets
        lines.append(
            sample.sample_id + "," + ",".join(repr(values[t]) for t in TARGET_NAMES)
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_targets_csv(path: str | Path) -> tuple[list[str], dict[str, np.ndarray]]:
    from .gbrf import TARGET_NAMES

    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    if header[0] != "sample_id" or set(TARGET_NAMES) - set(header[1:]):
        raise InputError("targets CSV must have sample_id plus all six target columns")
    ids = []
    columns: dict[str, list[float]] = {t: [] for t in TARGET_NAMES}
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split(",")
        ids.append(parts[0])
        row = dict(zip(header[1:], parts[1:]))
        for t in TARGET_NAMES:
            columns[t].append(float(row[t]))
    return ids, {t: np.asarray(v, dtype=np.float64) for t, v in columns.items()}


def load_cohort_manifest(path: str | Path) -> dict:
    """Read a cohort manifest: tasks file/list, personas, user count, noise, seed."""

    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    if "n_users" not in data:
        raise InputError("cohort manifest needs n_users")
    return data
