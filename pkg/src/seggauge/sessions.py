"""Headless state machines for the three interaction protocols.

A session owns the cumulative seed set, the current segmentation, and the
protocol-specific pending state (guided option candidates or joint seed
proposals). Every applied action appends one event to the interaction log;
replaying a recorded log reproduces all intermediate masks bit-exactly.

Sessions are single-writer. Timing comes either from a simulated clock
(deterministic, used by the robot user) or from the real clock (used by the
HTTP service for human sessions).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import growcut, imageops
from .errors import InputError, ProtocolError
from .events import (
    EVENT_FINISH,
    EVENT_GUIDED_SELECT,
    EVENT_JOINT_COMMIT,
    EVENT_JOINT_LONGPRESS,
    EVENT_JOINT_TOGGLE,
    EVENT_SESSION_START,
    EVENT_STROKE,
    EVENT_UNDO,
    EVENT_WARNING,
    EventRecord,
    InteractionLog,
    LogHeader,
    LogWriter,
)
from .growcut import (
    LABEL_BACKGROUND,
    LABEL_FOREGROUND,
    LABEL_NAMES,
    LABELS_BY_NAME,
    SeedPoint,
    SegmentationResult,
)
from .metrics import metric_report
from .tasks import Task

SESSION_KINDS = ("semi_manual", "guided", "joint")

# Fixed order of the four candidate labelings for the two suggested points.
GUIDED_LABELINGS = (
    (LABEL_BACKGROUND, LABEL_BACKGROUND),
    (LABEL_BACKGROUND, LABEL_FOREGROUND),
    (LABEL_FOREGROUND, LABEL_BACKGROUND),
    (LABEL_FOREGROUND, LABEL_FOREGROUND),
)

CHANGE_COUNT_WEIGHT = 17.0 / 12.0
DEFAULT_PROPOSAL_COUNT = 20


# ---------------------------------------------------------------------------
# Actions


@dataclass(frozen=True)
class Stroke:
    points: tuple[tuple[int, int], ...]
    label: int


@dataclass(frozen=True)
class GuidedSelect:
    option: int


@dataclass(frozen=True)
class JointToggle:
    index: int


@dataclass(frozen=True)
class JointLongPress:
    x: int
    y: int


@dataclass(frozen=True)
class JointCommit:
    pass


@dataclass(frozen=True)
class Undo:
    pass


@dataclass(frozen=True)
class Finish:
    pass


Action = Stroke | GuidedSelect | JointToggle | JointLongPress | JointCommit | Undo | Finish


def action_from_event(kind: str, payload: dict) -> Action:
    """Rebuild the action a logged event recorded (for replay)."""

    if kind == EVENT_STROKE:
        points = tuple((int(x), int(y)) for x, y in payload["points"])
        return Stroke(points=points, label=LABELS_BY_NAME[payload["label"]])
    if kind == EVENT_GUIDED_SELECT:
        return GuidedSelect(option=int(payload["option"]))
    if kind == EVENT_JOINT_TOGGLE:
        return JointToggle(index=int(payload["index"]))
    if kind == EVENT_JOINT_LONGPRESS:
        x, y = payload["position"]
        return JointLongPress(x=int(x), y=int(y))
    if kind == EVENT_JOINT_COMMIT:
        return JointCommit()
    if kind == EVENT_UNDO:
        return Undo()
    if kind == EVENT_FINISH:
        return Finish()
    raise InputError(f"event kind {kind!r} does not map to an action")


# ---------------------------------------------------------------------------
# Pending state


@dataclass(frozen=True)
class GuidedOptions:
    points: tuple[tuple[int, int], tuple[int, int]]
    candidates: tuple[SegmentationResult, SegmentationResult, SegmentationResult, SegmentationResult]

    @property
    def labelings(self):
        return GUIDED_LABELINGS


@dataclass
class JointProposals:
    positions: tuple[tuple[int, int], ...]
    labels: list[int]
    committed: bool = False

    def seeds(self) -> list[SeedPoint]:
        return [SeedPoint(x, y, lbl) for (x, y), lbl in zip(self.positions, self.labels)]


# ---------------------------------------------------------------------------
# Suggestion math


def suggest_guided_points(result: SegmentationResult) -> tuple[tuple[int, int], tuple[int, int]]:
    """Two distinct cells with the largest label-change counts.

    Ties break in raster order. Cells with a zero count are not eligible;
    missing picks fall back to the cells nearest the current contour (and to
    the cells nearest the grid center when there is no contour yet).
    """

    counts = result.change_counts
    height, width = counts.shape
    if height * width < 2:
        raise InputError("grid too small for two suggestions")
    flat = counts.ravel()
    chosen: list[int] = []
    eligible = np.flatnonzero(flat > 0)
    if eligible.size:
        order = eligible[np.lexsort((eligible, -flat[eligible]))]
        chosen.extend(int(i) for i in order[:2])
    if len(chosen) < 2:
        chosen.extend(_contour_fallback(result, exclude=set(chosen), count=2 - len(chosen)))
    (y1, x1), (y2, x2) = np.unravel_index(chosen[0], counts.shape), np.unravel_index(
        chosen[1], counts.shape
    )
    return (int(x1), int(y1)), (int(x2), int(y2))


def _contour_fallback(result: SegmentationResult, exclude: set[int], count: int) -> list[int]:
    height, width = result.mask.shape
    contour = imageops.contour_mask(result.mask)
    if contour.any():
        dist = imageops.euclidean_distance_transform(contour)
    else:
        yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
        cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
        dist = np.hypot(yy - cy, xx - cx)
    flat = dist.ravel()
    order = np.lexsort((np.arange(flat.size), flat))
    picks = []
    for idx in order:
        if int(idx) in exclude:
            continue
        picks.append(int(idx))
        if len(picks) == count:
            break
    return picks


def influence_map(image: np.ndarray, result: SegmentationResult) -> np.ndarray:
    """Combined influence of image gradient, label-change counts, and contour proximity.

    Each component is min-max normalized to [0, 1] (a constant component
    contributes zeros); change counts carry extra weight.
    """

    grad = _normalize01(imageops.gradient_magnitude(image))
    changes = _normalize01(result.change_counts.astype(np.float64))
    contour = imageops.contour_mask(result.mask)
    if contour.any():
        proximity = _normalize01(1.0 / (1.0 + imageops.euclidean_distance_transform(contour)))
    else:
        proximity = np.zeros_like(grad)
    return grad + CHANGE_COUNT_WEIGHT * changes + proximity


def _normalize01(grid: np.ndarray) -> np.ndarray:
    lo = grid.min()
    rng = grid.max() - lo
    if rng == 0:
        return np.zeros_like(grid, dtype=np.float64)
    return (grid - lo) / rng


def default_proposal_spacing(shape: tuple[int, int]) -> int:
    height, width = shape
    return max(3, round(0.04 * min(width, height)))


def propose_joint_seeds(
    image: np.ndarray,
    result: SegmentationResult,
    count: int = DEFAULT_PROPOSAL_COUNT,
    min_spacing: int | None = None,
) -> JointProposals:
    """Greedy top influence cells with a minimum pairwise spacing.

    Labels are taken from the current mask (inside = foreground). When the
    spacing constraint exhausts the grid before ``count`` picks, the
    remaining picks ignore the spacing (best-effort fill, rare in practice).
    """

    height, width = image.shape
    if count < 1 or count > height * width:
        raise InputError(f"proposal count {count} out of range for {width}x{height} grid")
    if min_spacing is None:
        min_spacing = default_proposal_spacing(image.shape)
    imap = influence_map(image, result)
    flat = imap.ravel()
    order = np.lexsort((np.arange(flat.size), -flat))
    picked: list[tuple[int, int]] = []
    min_sq = float(min_spacing) ** 2
    for idx in order:
        y, x = divmod(int(idx), width)
        if all((y - py) ** 2 + (x - px) ** 2 >= min_sq for py, px in picked):
            picked.append((y, x))
            if len(picked) == count:
                break
    if len(picked) < count:
        taken = set(picked)
        for idx in order:
            y, x = divmod(int(idx), width)
            if (y, x) not in taken:
                picked.append((y, x))
                taken.add((y, x))
                if len(picked) == count:
                    break
    positions = tuple((x, y) for y, x in picked)
    labels = [
        LABEL_FOREGROUND if result.mask[y, x] else LABEL_BACKGROUND for (x, y) in positions
    ]
    return JointProposals(positions=positions, labels=labels)


# ---------------------------------------------------------------------------
# Session


@dataclass
class _HistoryEntry:
    kind: str
    seed_len: int
    pending: GuidedOptions | JointProposals | None
    result: SegmentationResult


class Session:
    """One user x one task interaction session for a given protocol kind."""

    def __init__(
        self,
        task: Task,
        kind: str,
        user_id: str = "anonymous",
        log_path: str | Path | None = None,
        timing: str = "simulated",
        rng_seed: int | None = None,
        proposal_count: int = DEFAULT_PROPOSAL_COUNT,
        max_iterations: int | None = None,
    ):
        if kind not in SESSION_KINDS:
            raise InputError(f"unknown session kind {kind!r}")
        if timing not in ("simulated", "measured"):
            raise InputError(f"unknown timing mode {timing!r}")
        self.task = task
        self.kind = kind
        self.user_id = user_id
        self.proposal_count = proposal_count
        self.max_iterations = max_iterations
        self.finished = False
        self.revision = 0
        self._timing = timing
        self._wall_ms = 0.0
        self._t0 = time.perf_counter()
        self._pending_ctime = 0.0

        height, width = task.shape
        self._seed_items: list[SeedPoint] = list(growcut.border_background_seeds(task.shape))
        self._seed_items.extend(task.initial_seeds)
        self._base_seed_len = len(self._seed_items)
        self._history: list[_HistoryEntry] = []

        header = LogHeader(
            user_id=user_id,
            kind=kind,
            task_id=task.task_id,
            width=width,
            height=height,
            rng_seed=rng_seed,
        )
        self._writer = LogWriter(header, log_path)

        self.result = self._segment()
        self.pending = self._prepare_pending()
        self._append_event(
            EVENT_SESSION_START,
            {
                "border_seeds": len(growcut.border_background_seeds(task.shape)),
                "initial_seeds": [
                    [s.x, s.y, LABEL_NAMES[s.label]] for s in task.initial_seeds
                ],
            },
        )

    # -- state access ------------------------------------------------------

    @property
    def seeds(self) -> list[SeedPoint]:
        return list(self._seed_items)

    def user_seeds(self) -> list[SeedPoint]:
        """Seeds contributed by user actions (excludes border and initial seeds)."""

        return list(self._seed_items[self._base_seed_len :])

    def log(self) -> InteractionLog:
        return self._writer.log()

    def close(self) -> None:
        self._writer.close()

    # -- internals ----------------------------------------------------------

    def _segment(self, extra: Sequence[SeedPoint] = ()) -> SegmentationResult:
        seeds = self._seed_items + list(extra)
        if self._timing == "measured":
            start = time.perf_counter()
            result = growcut.segment(self.task.image, seeds, self.max_iterations)
            self._pending_ctime += (time.perf_counter() - start) * 1000.0
        else:
            result = growcut.segment(self.task.image, seeds, self.max_iterations)
            cells = self.task.image.size
            # Deterministic proxy for segmentation cost on simulated clocks.
            self._pending_ctime += result.iterations_run * cells / 50_000.0
        return result

    def _prepare_pending(self) -> GuidedOptions | JointProposals | None:
        if self.kind == "guided":
            points = suggest_guided_points(self.result)
            candidates = []
            for l1, l2 in GUIDED_LABELINGS:
                pair = (
                    SeedPoint(points[0][0], points[0][1], l1),
                    SeedPoint(points[1][0], points[1][1], l2),
                )
                candidates.append(self._segment(extra=pair))
            return GuidedOptions(points=points, candidates=tuple(candidates))
        if self.kind == "joint":
            if self._timing == "simulated":
                self._pending_ctime += self.task.image.size / 100_000.0
            return propose_joint_seeds(self.task.image, self.result, self.proposal_count)
        return None

    def _advance_clock(self, interaction_ms: float, think_ms: float) -> float:
        ctime = self._pending_ctime
        self._pending_ctime = 0.0
        if self._timing == "measured":
            now = (time.perf_counter() - self._t0) * 1000.0
            self._wall_ms = max(now, self._wall_ms + 0.001)
        else:
            self._wall_ms += max(think_ms, 0.0) + max(interaction_ms, 0.0) + ctime + 0.001
        return ctime

    def _metrics_snapshot(self) -> dict | None:
        if self.task.ground_truth is None:
            return None
        report = metric_report(self.result.mask, self.result.strengths, self.task.ground_truth)
        return {
            name: (value if math.isfinite(value) else None)
            for name, value in report.as_dict().items()
        }

    def _append_event(
        self,
        kind: str,
        payload: dict,
        interaction_ms: float = 0.0,
        think_ms: float = 0.0,
        with_mask: bool = True,
    ) -> EventRecord:
        ctime = self._advance_clock(interaction_ms, think_ms)
        event = EventRecord(
            seq=len(self._writer.events),
            wall_ms=self._wall_ms,
            kind=kind,
            payload=payload,
            computation_ms=ctime,
            interaction_ms=interaction_ms,
            metrics=self._metrics_snapshot() if with_mask else None,
            mask_digest=imageops.mask_digest(self.result.mask) if with_mask else None,
        )
        self._writer.append(event)
        self.revision += 1
        return event

    def _snapshot(self, kind: str) -> None:
        pending = self.pending
        if isinstance(pending, JointProposals):
            pending = JointProposals(
                positions=pending.positions, labels=list(pending.labels), committed=pending.committed
            )
        self._history.append(
            _HistoryEntry(kind=kind, seed_len=len(self._seed_items), pending=pending, result=self.result)
        )

    def _require_kind(self, expected: str, action: Action) -> None:
        if self.kind != expected:
            raise ProtocolError(
                f"action {type(action).__name__} is not legal for a {self.kind} session"
            )

    def _check_position(self, x: int, y: int) -> None:
        height, width = self.task.shape
        if not (0 <= x < width and 0 <= y < height):
            raise InputError(f"position ({x}, {y}) outside {width}x{height} grid")

    # -- public API ----------------------------------------------------------

    def apply(self, action: Action, interaction_ms: float = 0.0, think_ms: float = 0.0) -> EventRecord:
        """Apply one protocol action, log it, and return the event record."""

        if self.finished:
            raise ProtocolError("session is finished and rejects further actions")
        if isinstance(action, Stroke):
            return self._apply_stroke(action, interaction_ms, think_ms)
        if isinstance(action, GuidedSelect):
            return self._apply_guided_select(action, interaction_ms, think_ms)
        if isinstance(action, JointToggle):
            return self._apply_joint_toggle(action, interaction_ms, think_ms)
        if isinstance(action, JointLongPress):
            return self._apply_joint_longpress(action, interaction_ms, think_ms)
        if isinstance(action, JointCommit):
            return self._apply_joint_commit(interaction_ms, think_ms)
        if isinstance(action, Undo):
            return self._apply_undo(interaction_ms, think_ms)
        if isinstance(action, Finish):
            return self._apply_finish(interaction_ms, think_ms)
        raise InputError(f"unknown action {action!r}")

    def _apply_stroke(self, action: Stroke, interaction_ms: float, think_ms: float) -> EventRecord:
        self._require_kind("semi_manual", action)
        if not action.points:
            raise InputError("stroke contains no points")
        for x, y in action.points:
            self._check_position(x, y)
        self._snapshot(EVENT_STROKE)
        self._seed_items.extend(SeedPoint(x, y, action.label) for x, y in action.points)
        self.result = self._segment()
        payload = {
            "points": [[int(x), int(y)] for x, y in action.points],
            "label": LABEL_NAMES[action.label],
        }
        return self._append_event(EVENT_STROKE, payload, interaction_ms, think_ms)

    def _apply_guided_select(
        self, action: GuidedSelect, interaction_ms: float, think_ms: float
    ) -> EventRecord:
        self._require_kind("guided", action)
        if not isinstance(self.pending, GuidedOptions):
            raise ProtocolError("no guided options pending")
        if not 0 <= action.option < 4:
            raise InputError(f"option index {action.option} outside 0..3")
        options = self.pending
        self._snapshot(EVENT_GUIDED_SELECT)
        l1, l2 = GUIDED_LABELINGS[action.option]
        (x1, y1), (x2, y2) = options.points
        self._seed_items.extend((SeedPoint(x1, y1, l1), SeedPoint(x2, y2, l2)))
        self.result = options.candidates[action.option]
        self.pending = self._prepare_pending()
        payload = {
            "option": action.option,
            "points": [[x1, y1], [x2, y2]],
            "labels": [LABEL_NAMES[l1], LABEL_NAMES[l2]],
        }
        return self._append_event(EVENT_GUIDED_SELECT, payload, interaction_ms, think_ms)

    def _apply_joint_toggle(
        self, action: JointToggle, interaction_ms: float, think_ms: float
    ) -> EventRecord:
        self._require_kind("joint", action)
        proposals = self.pending
        if not isinstance(proposals, JointProposals):
            raise ProtocolError("no joint proposals pending")
        if not 0 <= action.index < len(proposals.positions):
            raise InputError(f"toggle index {action.index} out of range")
        self._snapshot(EVENT_JOINT_TOGGLE)
        old = proposals.labels[action.index]
        new = LABEL_FOREGROUND if old == LABEL_BACKGROUND else LABEL_BACKGROUND
        proposals.labels[action.index] = new
        x, y = proposals.positions[action.index]
        payload = {"index": action.index, "position": [x, y], "label": LABEL_NAMES[new]}
        return self._append_event(EVENT_JOINT_TOGGLE, payload, interaction_ms, think_ms)

    def _apply_joint_longpress(
        self, action: JointLongPress, interaction_ms: float, think_ms: float
    ) -> EventRecord:
        self._require_kind("joint", action)
        self._check_position(action.x, action.y)
        self._snapshot(EVENT_JOINT_LONGPRESS)
        current_fg = bool(self.result.mask[action.y, action.x])
        label = LABEL_BACKGROUND if current_fg else LABEL_FOREGROUND
        self._seed_items.append(SeedPoint(action.x, action.y, label))
        self.result = self._segment()
        payload = {"position": [action.x, action.y], "label": LABEL_NAMES[label]}
        return self._append_event(EVENT_JOINT_LONGPRESS, payload, interaction_ms, think_ms)

    def _apply_joint_commit(self, interaction_ms: float, think_ms: float) -> EventRecord:
        self._require_kind("joint", JointCommit())
        proposals = self.pending
        if not isinstance(proposals, JointProposals) or proposals.committed:
            raise ProtocolError("no uncommitted joint proposals")
        self._snapshot(EVENT_JOINT_COMMIT)
        seeds = proposals.seeds()
        self._seed_items.extend(seeds)
        proposals.committed = True
        self.result = self._segment()
        self.pending = self._prepare_pending()
        payload = {"seeds": [[s.x, s.y, LABEL_NAMES[s.label]] for s in seeds]}
        return self._append_event(EVENT_JOINT_COMMIT, payload, interaction_ms, think_ms)

    def _apply_undo(self, interaction_ms: float, think_ms: float) -> EventRecord:
        if not self._history:
            return self._append_event(
                EVENT_WARNING, {"message": "undo with empty history"}, interaction_ms, think_ms
            )
        entry = self._history.pop()
        del self._seed_items[entry.seed_len :]
        self.pending = entry.pending
        self.result = entry.result
        payload = {"reverted": entry.kind}
        return self._append_event(EVENT_UNDO, payload, interaction_ms, think_ms)

    def _apply_finish(self, interaction_ms: float, think_ms: float) -> EventRecord:
        self.finished = True
        payload = {"mask_rle": imageops.rle_encode(self.result.mask)}
        event = self._append_event(EVENT_FINISH, payload, interaction_ms, think_ms)
        self._writer.close()
        return event


# ---------------------------------------------------------------------------
# Replay


@dataclass(frozen=True)
class ReplayResult:
    final_mask: np.ndarray
    events_checked: int
    digests_matched: int


def replay_log(task: Task, log: InteractionLog, verify: bool = True) -> ReplayResult:
    """Re-drive a fresh session with a recorded action sequence.

    With ``verify`` set, every recorded post-event mask digest must match
    the replayed one. The initial seed list recorded in the session_start
    event takes precedence over the task descriptor's, so logs replay
    self-contained against the bare task image.
    """

    if log.events and log.events[0].kind == EVENT_SESSION_START:
        recorded = log.events[0].payload.get("initial_seeds", [])
        if isinstance(recorded, list):
            from .tasks import parse_seed_list

            task = Task(
                task_id=task.task_id,
                image=task.image,
                ground_truth=task.ground_truth,
                initial_seeds=parse_seed_list(recorded),
            )
    session = Session(task, log.header.kind, user_id=log.header.user_id, timing="simulated")
    checked = 0
    matched = 0
    for event in log.events:
        if event.kind in (EVENT_SESSION_START, EVENT_WARNING):
            replayed_digest = imageops.mask_digest(session.result.mask)
        else:
            action = action_from_event(event.kind, event.payload)
            replayed = session.apply(
                action, interaction_ms=event.interaction_ms, think_ms=0.0
            )
            replayed_digest = replayed.mask_digest
        if event.mask_digest is not None:
            checked += 1
            if replayed_digest == event.mask_digest:
                matched += 1
            elif verify:
                raise InputError(
                    f"replay diverged at event {event.seq} ({event.kind}): mask digest mismatch"
                )
    return ReplayResult(
        final_mask=session.result.mask, events_checked=checked, digests_matched=matched
    )
