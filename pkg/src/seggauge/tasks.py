"""Segmentation task descriptors and JSON task manifests.

A manifest is ``{"tasks": [{"id": ..., "image": ..., "ground_truth": ...,
"initial_seeds": [[x, y, "foreground"], ...]}, ...]}``. Image and ground
truth entries are file paths (PNG/PGM) or ``builtin:<shape>`` references to
the bundled synthetic shapes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import synthetic
from .errors import InputError
from .growcut import LABELS_BY_NAME, SeedPoint, as_intensity_grid
from .imageio import read_intensity_image, read_mask_image


@dataclass
class Task:
    task_id: str
    image: np.ndarray
    ground_truth: np.ndarray | None = None
    initial_seeds: list[SeedPoint] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.image = as_intensity_grid(self.image)
        if self.ground_truth is not None:
            gt = np.asarray(self.ground_truth).astype(bool)
            if gt.shape != self.image.shape:
                raise InputError(
                    f"ground truth shape {gt.shape} does not match image {self.image.shape}"
                )
            self.ground_truth = gt

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape


def parse_seed_list(entries) -> list[SeedPoint]:
    seeds = []
    for entry in entries:
        if len(entry) != 3:
            raise InputError(f"seed entry must be [x, y, label], got {entry!r}")
        x, y, label = entry
        if label not in LABELS_BY_NAME:
            raise InputError(f"unknown seed label {label!r}")
        seeds.append(SeedPoint(int(x), int(y), LABELS_BY_NAME[label]))
    return seeds


def _load_grid(ref: str, base_dir: Path, as_mask: bool) -> np.ndarray:
    if ref.startswith("builtin:"):
        image, gt = synthetic.builtin_shape(ref.split(":", 1)[1])
        return gt if as_mask else image
    path = Path(ref)
    if not path.is_absolute():
        path = base_dir / path
    return read_mask_image(path) if as_mask else read_intensity_image(path)


def load_task(descriptor: dict, base_dir: str | Path = ".") -> Task:
    base_dir = Path(base_dir)
    if "id" not in descriptor or "image" not in descriptor:
        raise InputError("task descriptor requires 'id' and 'image'")
    image = _load_grid(descriptor["image"], base_dir, as_mask=False)
    gt = None
    if descriptor.get("ground_truth"):
        gt = _load_grid(descriptor["ground_truth"], base_dir, as_mask=True)
    seeds = parse_seed_list(descriptor.get("initial_seeds", []))
    return Task(task_id=str(descriptor["id"]), image=image, ground_truth=gt, initial_seeds=seeds)


def load_manifest(path: str | Path) -> list[Task]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"task manifest not found: {path}")
    data = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(data, dict) or "tasks" not in data:
        raise InputError(f"manifest {path} must contain a 'tasks' list")
    tasks = [load_task(desc, path.parent) for desc in data["tasks"]]
    ids = [t.task_id for t in tasks]
    if len(set(ids)) != len(ids):
        raise InputError("duplicate task ids in manifest")
    return tasks


def builtin_tasks() -> list[Task]:
    """The bundled synthetic shapes as ready-to-run tasks."""

    tasks = []
    for name in synthetic.SHAPE_NAMES:
        image, gt = synthetic.builtin_shape(name)
        tasks.append(Task(task_id=f"builtin-{name}", image=image, ground_truth=gt))
    return tasks
