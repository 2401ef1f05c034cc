"""Bundled synthetic segmentation shapes for demos, simulation, and tests.

Each shape is a 48x48 grid with a brighter object on a darker background,
an illumination ramp, smooth deterministic texture, and a shaded object
rim, so segmentation needs several corrective interactions instead of one
lucky seed. Generation is fully deterministic.
"""

from __future__ import annotations

import numpy as np

SHAPE_SIZE = 48
SHAPE_NAMES = ("disk", "blob", "wedge")

_FG_LEVEL = 0.61
_BG_LEVEL = 0.39


def _box_blur(grid: np.ndarray, passes: int = 1) -> np.ndarray:
    out = grid.astype(np.float64)
    for _ in range(passes):
        padded = np.pad(out, 1, mode="edge")
        acc = np.zeros_like(out)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                acc += padded[1 + dy : 1 + dy + out.shape[0], 1 + dx : 1 + dx + out.shape[1]]
        out = acc / 9.0
    return out


def _grid(size: int) -> tuple[np.ndarray, np.ndarray]:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    return yy, xx


def _disk_mask(size: int) -> np.ndarray:
    yy, xx = _grid(size)
    cy = cx = (size - 1) / 2.0
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= (0.30 * size) ** 2


def _blob_mask(size: int) -> np.ndarray:
    yy, xx = _grid(size)
    a = ((yy - 0.42 * size) ** 2 + (xx - 0.38 * size) ** 2) <= (0.21 * size) ** 2
    b = ((yy - 0.58 * size) ** 2 + (xx - 0.62 * size) ** 2) <= (0.24 * size) ** 2
    return a | b


def _wedge_mask(size: int) -> np.ndarray:
    yy, xx = _grid(size)
    box = (
        (yy >= 0.25 * size)
        & (yy <= 0.75 * size)
        & (xx >= 0.22 * size)
        & (xx <= 0.78 * size)
    )
    notch = (yy <= 0.48 * size) & (xx >= 0.44 * size) & (xx <= 0.58 * size)
    return box & ~notch


_SHAPE_MASKS = {"disk": _disk_mask, "blob": _blob_mask, "wedge": _wedge_mask}

# Per-shape texture phases keep the three images visually distinct.
_TEXTURE_PHASE = {"disk": 0.0, "blob": 1.3, "wedge": 2.6}


def _texture(size: int, phase: float) -> np.ndarray:
    yy, xx = _grid(size)
    u = xx / max(size - 1, 1)
    v = yy / max(size - 1, 1)
    wave = (
        np.sin(2 * np.pi * (2.1 * u + 1.3 * v) + phase)
        + np.sin(2 * np.pi * (1.2 * u - 2.4 * v) + 2.0 * phase + 0.7)
        + np.sin(2 * np.pi * (3.3 * u + 0.4 * v) + 3.0 * phase + 1.9)
    )
    return wave / 3.0


def _rim_shading(gt: np.ndarray) -> np.ndarray:
    # Darken the object rim so its edge intensity approaches the background.
    inner = gt.copy()
    rim = np.zeros(gt.shape, dtype=np.float64)
    weight = 1.0
    for _ in range(3):
        padded = np.pad(inner, 1, constant_values=False)
        core = inner.copy()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                core &= padded[1 + dy : 1 + dy + inner.shape[0], 1 + dx : 1 + dx + inner.shape[1]]
        rim += weight * (inner & ~core)
        inner = core
        weight *= 0.6
    return rim


def builtin_shape(name: str, size: int = SHAPE_SIZE) -> tuple[np.ndarray, np.ndarray]:
    """Return (image, ground_truth) for a bundled shape name."""

    if name not in _SHAPE_MASKS:
        raise KeyError(f"unknown builtin shape {name!r}; choose from {SHAPE_NAMES}")
    gt = _SHAPE_MASKS[name](size)
    yy, xx = _grid(size)
    ramp = 0.05 * (xx / max(size - 1, 1)) + 0.04 * (yy / max(size - 1, 1))
    image = np.where(gt, _FG_LEVEL, _BG_LEVEL).astype(np.float64)
    image = image + ramp + 0.115 * _texture(size, _TEXTURE_PHASE[name])
    image = image - 0.12 * _rim_shading(gt)
    image = _box_blur(image, passes=1)
    return np.clip(image, 0.0, 1.0), gt
