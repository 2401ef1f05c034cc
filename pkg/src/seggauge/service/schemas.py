"""Pydantic request/response models for the session service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

SessionKind = Literal["semi_manual", "guided", "joint"]
SeedLabel = Literal["background", "foreground"]


class CreateSessionRequest(BaseModel):
    task_id: str
    kind: SessionKind
    user_id: str = "anonymous"


class SeedOut(BaseModel):
    x: int
    y: int
    label: SeedLabel


class GuidedOptionOut(BaseModel):
    option: int
    labels: list[SeedLabel]
    contours: list[list[tuple[int, int]]]
    diff_rle: dict


class GuidedStateOut(BaseModel):
    points: list[tuple[int, int]]
    options: list[GuidedOptionOut]


class JointProposalOut(BaseModel):
    index: int
    x: int
    y: int
    label: SeedLabel
    committed: bool


class SessionStateResponse(BaseModel):
    session_id: str
    revision: int
    kind: SessionKind
    task_id: str
    user_id: str
    width: int
    height: int
    finished: bool
    contours: list[list[tuple[int, int]]]
    seeds: list[SeedOut]
    dice: float | None = None
    guided: GuidedStateOut | None = None
    joint: list[JointProposalOut] | None = None
    mask_rle: dict | None = None


class ActionPayload(BaseModel):
    type: Literal[
        "stroke", "guided_select", "joint_toggle", "joint_longpress", "joint_commit", "undo", "finish"
    ]
    points: list[tuple[int, int]] | None = None
    label: SeedLabel | None = None
    option: int | None = None
    index: int | None = None
    x: int | None = None
    y: int | None = None


class ActionRequest(BaseModel):
    revision: int
    action: ActionPayload
    interaction_ms: float = Field(default=0.0, ge=0.0)


class FinishRequest(BaseModel):
    revision: int
    interaction_ms: float = Field(default=0.0, ge=0.0)


class TaskInfo(BaseModel):
    task_id: str
    width: int
    height: int
    has_ground_truth: bool
    initial_seeds: list[SeedOut]


class QuestionnaireSubmission(BaseModel):
    user_id: str
    prototype: SessionKind
    sus: list[int] = Field(min_length=10, max_length=10)
    attrakdiff: dict[str, list[int]]
    randomization_seed: int | None = None


class QuestionnaireResponse(BaseModel):
    stored: bool
    sus_score: float
    attrakdiff_scores: dict[str, float]
