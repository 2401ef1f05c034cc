"""Interaction log schema (.segl): append-only JSON lines with a header record.

The first line of a log is the header; every following line is one event.
Wall times are milliseconds since session start and strictly increase.
Mutating events carry a digest of the post-event mask so replays can be
verified bit-exactly, plus a metric snapshot when ground truth is known.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable

from .errors import InputError

SCHEMA_VERSION = "segl/1"

EVENT_SESSION_START = "session_start"
EVENT_STROKE = "stroke"
EVENT_GUIDED_SELECT = "guided_select"
EVENT_JOINT_TOGGLE = "joint_toggle"
EVENT_JOINT_LONGPRESS = "joint_longpress"
EVENT_JOINT_COMMIT = "joint_commit"
EVENT_UNDO = "undo"
EVENT_FINISH = "finish"
EVENT_WARNING = "warning"

# Events counted as user interactions in the task summaries.
INTERACTION_EVENTS = frozenset(
    {
        EVENT_STROKE,
        EVENT_GUIDED_SELECT,
        EVENT_JOINT_TOGGLE,
        EVENT_JOINT_LONGPRESS,
        EVENT_JOINT_COMMIT,
        EVENT_UNDO,
    }
)


@dataclass(frozen=True)
class LogHeader:
    user_id: str
    kind: str
    task_id: str
    width: int
    height: int
    rng_seed: int | None = None
    schema: str = SCHEMA_VERSION

    def to_json(self) -> dict:
        return {
            "schema": self.schema,
            "user_id": self.user_id,
            "kind": self.kind,
            "task_id": self.task_id,
            "width": self.width,
            "height": self.height,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "LogHeader":
        if data.get("schema") != SCHEMA_VERSION:
            raise InputError(f"unsupported log schema {data.get('schema')!r}")
        return cls(
            user_id=data["user_id"],
            kind=data["kind"],
            task_id=data["task_id"],
            width=int(data["width"]),
            height=int(data["height"]),
            rng_seed=data.get("rng_seed"),
        )


@dataclass(frozen=True)
class EventRecord:
    seq: int
    wall_ms: float
    kind: str
    payload: dict
    computation_ms: float = 0.0
    interaction_ms: float = 0.0
    metrics: dict | None = None
    mask_digest: str | None = None

    def to_json(self) -> dict:
        data = {
            "seq": self.seq,
            "t": self.wall_ms,
            "kind": self.kind,
            "payload": self.payload,
            "ctime": self.computation_ms,
            "itime": self.interaction_ms,
        }
        if self.metrics is not None:
            data["metrics"] = self.metrics
        if self.mask_digest is not None:
            data["mask"] = self.mask_digest
        return data

    @classmethod
    def from_json(cls, data: dict) -> "EventRecord":
        return cls(
            seq=int(data["seq"]),
            wall_ms=float(data["t"]),
            kind=data["kind"],
            payload=data.get("payload", {}),
            computation_ms=float(data.get("ctime", 0.0)),
            interaction_ms=float(data.get("itime", 0.0)),
            metrics=data.get("metrics"),
            mask_digest=data.get("mask"),
        )


@dataclass
class InteractionLog:
    header: LogHeader
    events: list[EventRecord] = field(default_factory=list)

    def validate(self) -> None:
        last = -1.0
        for i, event in enumerate(self.events):
            if event.seq != i:
                raise InputError(f"event sequence gap at {i}")
            if event.wall_ms <= last:
                raise InputError(f"wall time not strictly increasing at event {i}")
            last = event.wall_ms

    def interaction_events(self) -> list[EventRecord]:
        return [e for e in self.events if e.kind in INTERACTION_EVENTS]

    def final_metrics(self) -> dict | None:
        for event in reversed(self.events):
            if event.metrics is not None:
                return event.metrics
        return None


class LogWriter:
    """Collects events in memory and optionally appends them to a .segl file.

    File writes are flushed line by line so a log is valid after every event.
    """

    def __init__(self, header: LogHeader, path: str | Path | None = None):
        self.header = header
        self.events: list[EventRecord] = []
        self._path = Path(path) if path is not None else None
        self._fh: IO[str] | None = None
        if self._path is not None:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self._path.open("w", encoding="utf-8")
            self._write_line(header.to_json())

    def _write_line(self, data: dict) -> None:
        assert self._fh is not None
        self._fh.write(json.dumps(data, ensure_ascii=False, sort_keys=True) + "\n")
        self._fh.flush()

    def append(self, event: EventRecord) -> None:
        self.events.append(event)
        if self._fh is not None:
            self._write_line(event.to_json())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def log(self) -> InteractionLog:
        return InteractionLog(header=self.header, events=list(self.events))


def read_log(path: str | Path) -> InteractionLog:
    path = Path(path)
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise InputError(f"empty log file {path}")
    header = LogHeader.from_json(json.loads(lines[0]))
    events = [EventRecord.from_json(json.loads(ln)) for ln in lines[1:]]
    log = InteractionLog(header=header, events=events)
    log.validate()
    return log


def write_log(log: InteractionLog, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(log.header.to_json(), ensure_ascii=False, sort_keys=True) + "\n")
        for event in log.events:
            fh.write(json.dumps(event.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def iter_log_files(directory: str | Path) -> Iterable[Path]:
    return sorted(Path(directory).rglob("*.segl"))
