"""Session store: in-memory sessions backed by append-only .segl logs.

Every action is persisted before the response goes out. After a restart the
store lazily rebuilds a session by replaying its log, so GET state answers
identically; resumed sessions continue appending to the same log with wall
times continuing from the recorded end.
"""

from __future__ import annotations

import threading
import uuid
from pathlib import Path

from ..errors import InputError
from ..events import LogWriter, read_log
from ..sessions import Session, action_from_event
from ..events import EVENT_SESSION_START, EVENT_WARNING
from ..tasks import Task


class SessionRuntime:
    def __init__(self, session: Session, log_path: Path):
        self.session = session
        self.log_path = log_path
        self.lock = threading.Lock()


class SessionStore:
    def __init__(self, tasks: dict[str, Task], data_dir: str | Path):
        self.tasks = tasks
        self.data_dir = Path(data_dir)
        self.sessions_dir = self.data_dir / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self._runtimes: dict[str, SessionRuntime] = {}
        self._registry_lock = threading.Lock()

    def task(self, task_id: str) -> Task:
        if task_id not in self.tasks:
            raise KeyError(task_id)
        return self.tasks[task_id]

    def create(self, task_id: str, kind: str, user_id: str) -> tuple[str, SessionRuntime]:
        task = self.task(task_id)
        session_id = uuid.uuid4().hex[:12]
        log_path = self.sessions_dir / f"{session_id}.segl"
        session = Session(task, kind, user_id=user_id, log_path=log_path, timing="measured")
        runtime = SessionRuntime(session, log_path)
        with self._registry_lock:
            self._runtimes[session_id] = runtime
        return session_id, runtime

    def get(self, session_id: str) -> SessionRuntime:
        with self._registry_lock:
            runtime = self._runtimes.get(session_id)
        if runtime is not None:
            return runtime
        log_path = self.sessions_dir / f"{session_id}.segl"
        if not log_path.exists():
            raise KeyError(session_id)
        runtime = SessionRuntime(self._resume(log_path), log_path)
        with self._registry_lock:
            return self._runtimes.setdefault(session_id, runtime)

    def _resume(self, log_path: Path) -> Session:
        log = read_log(log_path)
        task = self.task(log.header.task_id)
        if log.events and log.events[0].kind == EVENT_SESSION_START:
            from ..tasks import parse_seed_list

            recorded = log.events[0].payload.get("initial_seeds", [])
            if isinstance(recorded, list):
                task = Task(
                    task_id=task.task_id,
                    image=task.image,
                    ground_truth=task.ground_truth,
                    initial_seeds=parse_seed_list(recorded),
                )
        session = Session(task, log.header.kind, user_id=log.header.user_id, timing="measured")
        for event in log.events:
            if event.kind in (EVENT_SESSION_START, EVENT_WARNING):
                continue
            session.apply(action_from_event(event.kind, event.payload))
        recorded_digest = next(
            (e.mask_digest for e in reversed(log.events) if e.mask_digest), None
        )
        if recorded_digest is not None:
            from ..imageops import mask_digest

            if mask_digest(session.result.mask) != recorded_digest:
                raise InputError(f"log {log_path} does not replay to its recorded state")
        # Reattach the original log: future events append after the recorded
        # ones with wall times continuing past the recorded end.
        session._writer.close()
        writer = LogWriter(log.header, path=None)
        writer.events = list(log.events)
        writer._path = log_path
        writer._fh = log_path.open("a", encoding="utf-8")
        session._writer = writer
        session.revision = len(log.events)
        session._wall_ms = log.events[-1].wall_ms if log.events else 0.0
        return session

    def questionnaire_path(self) -> Path:
        return self.data_dir / "questionnaires.jsonl"
