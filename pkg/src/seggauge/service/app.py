"""FastAPI application wrapping the session engine and questionnaire intake."""

from __future__ import annotations

import io
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response

from .. import imageops, questionnaires
from ..errors import InputError, ProtocolError, StaleRevisionError
from ..growcut import LABEL_NAMES, LABELS_BY_NAME
from ..metrics import dice
from ..sessions import (
    Finish,
    GuidedOptions,
    GuidedSelect,
    JointCommit,
    JointLongPress,
    JointProposals,
    JointToggle,
    Stroke,
    Undo,
)
from ..tasks import Task, builtin_tasks, load_manifest
from .schemas import (
    ActionRequest,
    CreateSessionRequest,
    FinishRequest,
    GuidedOptionOut,
    GuidedStateOut,
    JointProposalOut,
    QuestionnaireResponse,
    QuestionnaireSubmission,
    SeedOut,
    SessionStateResponse,
    TaskInfo,
)
from .store import SessionRuntime, SessionStore


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    data_dir: str = "seggauge-data"
    task_manifest: str | None = None
    include_builtin_tasks: bool = True

    @classmethod
    def from_file(cls, path: str | Path | None, env: dict | None = None) -> "ServiceConfig":
        data = {}
        if path is not None:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        env = env if env is not None else dict(os.environ)
        overrides = {
            "host": env.get("SEGGAUGE_HOST"),
            "port": env.get("SEGGAUGE_PORT"),
            "data_dir": env.get("SEGGAUGE_DATA_DIR"),
            "task_manifest": env.get("SEGGAUGE_TASKS"),
        }
        for key, value in overrides.items():
            if value is not None:
                data[key] = value
        config = cls(
            host=str(data.get("host", cls.host)),
            port=int(data.get("port", cls.port)),
            data_dir=str(data.get("data_dir", cls.data_dir)),
            task_manifest=data.get("task_manifest"),
            include_builtin_tasks=bool(data.get("include_builtin_tasks", True)),
        )
        return config


def _load_tasks(config: ServiceConfig) -> dict[str, Task]:
    tasks: dict[str, Task] = {}
    if config.include_builtin_tasks:
        for task in builtin_tasks():
            tasks[task.task_id] = task
    if config.task_manifest:
        for task in load_manifest(config.task_manifest):
            tasks[task.task_id] = task
    if not tasks:
        raise InputError("service has no tasks; provide a manifest or enable builtin tasks")
    return tasks


def _action_from_payload(payload) -> object:
    kind = payload.type
    if kind == "stroke":
        if not payload.points or payload.label is None:
            raise InputError("stroke action needs points and a label")
        return Stroke(
            points=tuple((int(x), int(y)) for x, y in payload.points),
            label=LABELS_BY_NAME[payload.label],
        )
    if kind == "guided_select":
        if payload.option is None:
            raise InputError("guided_select action needs an option index")
        return GuidedSelect(option=int(payload.option))
    if kind == "joint_toggle":
        if payload.index is None:
            raise InputError("joint_toggle action needs a proposal index")
        return JointToggle(index=int(payload.index))
    if kind == "joint_longpress":
        if payload.x is None or payload.y is None:
            raise InputError("joint_longpress action needs x and y")
        return JointLongPress(x=int(payload.x), y=int(payload.y))
    if kind == "joint_commit":
        return JointCommit()
    if kind == "undo":
        return Undo()
    if kind == "finish":
        return Finish()
    raise InputError(f"unknown action type {kind!r}")


def _session_state(
    session_id: str, runtime: SessionRuntime, include_mask: bool = False
) -> SessionStateResponse:
    session = runtime.session
    task = session.task
    result = session.result
    state = SessionStateResponse(
        session_id=session_id,
        revision=session.revision,
        kind=session.kind,
        task_id=task.task_id,
        user_id=session.user_id,
        width=task.shape[1],
        height=task.shape[0],
        finished=session.finished,
        contours=imageops.trace_boundaries(result.mask),
        seeds=[
            SeedOut(x=s.x, y=s.y, label=LABEL_NAMES[s.label]) for s in session.seeds
        ],
    )
    if task.ground_truth is not None:
        value = dice(result.mask, task.ground_truth)
        state.dice = value if math.isfinite(value) else None
    if isinstance(session.pending, GuidedOptions):
        options = []
        for i, candidate in enumerate(session.pending.candidates):
            labels = [LABEL_NAMES[l] for l in session.pending.labelings[i]]
            options.append(
                GuidedOptionOut(
                    option=i,
                    labels=labels,
                    contours=imageops.trace_boundaries(candidate.mask),
                    diff_rle=imageops.rle_encode(candidate.mask ^ result.mask),
                )
            )
        state.guided = GuidedStateOut(points=list(session.pending.points), options=options)
    if isinstance(session.pending, JointProposals):
        state.joint = [
            JointProposalOut(
                index=i,
                x=x,
                y=y,
                label=LABEL_NAMES[label],
                committed=session.pending.committed,
            )
            for i, ((x, y), label) in enumerate(
                zip(session.pending.positions, session.pending.labels)
            )
        ]
    if include_mask:
        state.mask_rle = imageops.rle_encode(result.mask)
    return state


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    tasks = _load_tasks(config)
    store = SessionStore(tasks, config.data_dir)
    app = FastAPI(title="seggauge session service", version="1.0")
    app.state.store = store
    app.state.config = config

    @app.exception_handler(RequestValidationError)
    async def malformed_body(_req: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.exception_handler(KeyError)
    async def unknown_resource(_req: Request, exc: KeyError):
        return JSONResponse(status_code=404, content={"detail": f"unknown resource {exc}"})

    @app.exception_handler(StaleRevisionError)
    async def stale_revision(_req: Request, exc: StaleRevisionError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(ProtocolError)
    async def illegal_action(_req: Request, exc: ProtocolError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(InputError)
    async def invalid_input(_req: Request, exc: InputError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/tasks", response_model=list[TaskInfo])
    def list_tasks():
        return [
            TaskInfo(
                task_id=t.task_id,
                width=t.shape[1],
                height=t.shape[0],
                has_ground_truth=t.ground_truth is not None,
                initial_seeds=[
                    SeedOut(x=s.x, y=s.y, label=LABEL_NAMES[s.label]) for s in t.initial_seeds
                ],
            )
            for t in tasks.values()
        ]

    @app.get("/tasks/{task_id}/image")
    def task_image(task_id: str):
        task = store.task(task_id)
        from PIL import Image

        img = Image.fromarray(np.round(task.image * 255.0).astype(np.uint8), mode="L")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.post("/sessions", response_model=SessionStateResponse, status_code=201)
    def create_session(body: CreateSessionRequest):
        session_id, runtime = store.create(body.task_id, body.kind, body.user_id)
        return _session_state(session_id, runtime)

    @app.get("/sessions/{session_id}/state", response_model=SessionStateResponse)
    def session_state(session_id: str, include_mask: bool = False):
        runtime = store.get(session_id)
        with runtime.lock:
            return _session_state(session_id, runtime, include_mask=include_mask)

    @app.post("/sessions/{session_id}/actions", response_model=SessionStateResponse)
    def apply_action(session_id: str, body: ActionRequest):
        runtime = store.get(session_id)
        with runtime.lock:
            session = runtime.session
            if body.revision != session.revision:
                raise StaleRevisionError(
                    f"revision {body.revision} is stale (current {session.revision})"
                )
            action = _action_from_payload(body.action)
            session.apply(action, interaction_ms=body.interaction_ms)
            return _session_state(session_id, runtime)

    @app.post("/sessions/{session_id}/finish", response_model=SessionStateResponse)
    def finish_session(session_id: str, body: FinishRequest):
        runtime = store.get(session_id)
        with runtime.lock:
            session = runtime.session
            if body.revision != session.revision:
                raise StaleRevisionError(
                    f"revision {body.revision} is stale (current {session.revision})"
                )
            session.apply(Finish(), interaction_ms=body.interaction_ms)
            return _session_state(session_id, runtime, include_mask=True)

    @app.post("/questionnaires", response_model=QuestionnaireResponse)
    def submit_questionnaire(body: QuestionnaireSubmission):
        groups = {}
        key_map = {"pq": "PQ", "att": "ATT", "hqi": "HQ-I", "hqs": "HQ-S"}
        for key, group in key_map.items():
            if key not in body.attrakdiff:
                raise InputError(f"attrakdiff payload missing group {key!r}")
            values = body.attrakdiff[key]
            if len(values) != 7:
                raise InputError(f"attrakdiff group {key!r} needs 7 answers")
            groups[group] = np.asarray([values], dtype=np.int64)
        sus_matrix = np.asarray([body.sus], dtype=np.int64)
        sus_value = questionnaires.sus_score(sus_matrix)
        scores = {g: questionnaires.attrakdiff_score(groups, g) for g in key_map.values()}

        record = {
            "user_id": body.user_id,
            "prototype": body.prototype,
            "sus": body.sus,
            "attrakdiff": body.attrakdiff,
            "randomization_seed": body.randomization_seed,
            "sus_score": sus_value,
            "attrakdiff_scores": scores,
        }
        path = store.questionnaire_path()
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
        return QuestionnaireResponse(stored=True, sus_score=sus_value, attrakdiff_scores=scores)

    return app
