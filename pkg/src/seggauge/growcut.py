"""Seeded GrowCut segmentation on 2-D intensity grids.

The automaton state per cell is (label, strength, change count). Labeled
cells attack their Moore neighbors each iteration; a cell is conquered by
the strongest attacker whose strength, damped by intensity similarity,
exceeds the cell's own strength. Seeds start at full strength and can
therefore never be conquered.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, ShapeError

LABEL_NONE = 0
LABEL_BACKGROUND = 1
LABEL_FOREGROUND = 2

LABEL_NAMES = {LABEL_BACKGROUND: "background", LABEL_FOREGROUND: "foreground"}
LABELS_BY_NAME = {v: k for k, v in LABEL_NAMES.items()}

# Moore neighborhood in raster order of the offsets.
_NEIGHBOR_OFFSETS = (
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
)

_LUMA_WEIGHTS = (0.2126, 0.7152, 0.0722)


@dataclass(frozen=True)
class SeedPoint:
    """A labeled cell position. ``x`` is the column, ``y`` the row."""

    x: int
    y: int
    label: int

    def __post_init__(self) -> None:
        if self.label not in (LABEL_BACKGROUND, LABEL_FOREGROUND):
            raise InputError(f"seed label must be background or foreground, got {self.label!r}")


@dataclass(frozen=True)
class SegmentationResult:
    """Final automaton state: foreground mask, strengths, change counts."""

    mask: np.ndarray
    labels: np.ndarray
    strengths: np.ndarray
    change_counts: np.ndarray
    iterations_run: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape


def as_intensity_grid(image: np.ndarray | Sequence) -> np.ndarray:
    """Validate and return a float64 (height, width) grid with values in [0, 1]."""

    grid = np.asarray(image, dtype=np.float64)
    if grid.ndim != 2 or grid.size == 0:
        raise ShapeError(f"expected a non-empty 2-D grid, got shape {grid.shape}")
    if not np.isfinite(grid).all():
        raise InputError("intensity grid contains non-finite values")
    if grid.min() < 0.0 or grid.max() > 1.0:
        raise InputError("intensity values must lie in [0, 1]")
    return grid


def rgb_to_luminance(red: np.ndarray, green: np.ndarray, blue: np.ndarray) -> np.ndarray:
    """Combine linear RGB channels into a luminance grid (BT.709 weights)."""

    r = np.asarray(red, dtype=np.float64)
    g = np.asarray(green, dtype=np.float64)
    b = np.asarray(blue, dtype=np.float64)
    if not (r.shape == g.shape == b.shape):
        raise ShapeError(f"channel shapes differ: {r.shape}, {g.shape}, {b.shape}")
    wr, wg, wb = _LUMA_WEIGHTS
    return np.clip(wr * r + wg * g + wb * b, 0.0, 1.0)


def similarity(c_e: float, c_f: float, max_pairwise_diff: float) -> float:
    """Intensity similarity in [0, 1]; 1 for identical cells.

    A constant image has zero maximum pairwise difference; similarity is
    then defined as 1 everywhere (identical cells are maximally similar).
    """

    if max_pairwise_diff == 0.0:
        return 1.0
    if max_pairwise_diff < 0.0:
        raise InputError("max_pairwise_diff must be nonnegative")
    return 1.0 - abs(c_e - c_f) / max_pairwise_diff


def resolve_seeds(seeds: Iterable[SeedPoint], shape: tuple[int, int]) -> dict[tuple[int, int], int]:
    """Collapse a seed sequence to one label per position (later seeds win)."""

    height, width = shape
    resolved: dict[tuple[int, int], int] = {}
    for seed in seeds:
        if not (0 <= seed.x < width and 0 <= seed.y < height):
            raise InputError(f"seed position ({seed.x}, {seed.y}) outside {width}x{height} grid")
        resolved[(seed.x, seed.y)] = seed.label
    return resolved


def initial_state(
    image: np.ndarray, seeds: Iterable[SeedPoint]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Automaton start state: seeds at strength 1, everything else unlabeled."""

    grid = as_intensity_grid(image)
    resolved = resolve_seeds(seeds, grid.shape)
    if not resolved:
        raise InputError("seed set is empty")
    labels = np.full(grid.shape, LABEL_NONE, dtype=np.uint8)
    strengths = np.zeros(grid.shape, dtype=np.float64)
    counts = np.zeros(grid.shape, dtype=np.int32)
    for (x, y), label in resolved.items():
        labels[y, x] = label
        strengths[y, x] = 1.0
    return labels, strengths, counts


def max_pairwise_difference(image: np.ndarray) -> float:
    return float(image.max() - image.min())


def step(
    labels: np.ndarray,
    strengths: np.ndarray,
    change_counts: np.ndarray,
    image: np.ndarray,
    max_diff: float | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """One synchronous automaton iteration; returns new state and a change flag.

    All cells read the previous state, so the result is independent of any
    cell-processing order. The winning attacker of a cell maximizes
    strength * similarity; exact ties prefer background attackers, then the
    attacker earliest in raster order. The change counter increments only
    when the cell's label actually changes.
    """

    if labels.shape != image.shape:
        raise ShapeError(f"field shape {labels.shape} does not match image {image.shape}")
    if max_diff is None:
        max_diff = max_pairwise_difference(image)
    height, width = image.shape
    n_cells = height * width

    # Edge padding keeps |c_e - c_f| <= max_diff; pad strength -1 means the
    # border never attacks (attack <= 0 can never exceed a strength >= 0).
    pad_img = np.pad(image, 1, mode="edge")
    pad_strength = np.pad(strengths, 1, constant_values=-1.0)
    pad_labels = np.pad(labels, 1, constant_values=LABEL_NONE)
    cell_index = np.arange(n_cells, dtype=np.int64).reshape(height, width)
    pad_index = np.pad(cell_index, 1, constant_values=n_cells)

    n_dirs = len(_NEIGHBOR_OFFSETS)
    attacks = np.empty((n_dirs, height, width), dtype=np.float64)
    atk_labels = np.empty((n_dirs, height, width), dtype=np.uint8)
    atk_index = np.empty((n_dirs, height, width), dtype=np.int64)
    for d, (dy, dx) in enumerate(_NEIGHBOR_OFFSETS):
        sl = (slice(1 + dy, 1 + dy + height), slice(1 + dx, 1 + dx + width))
        if max_diff == 0.0:
            g = 1.0
        else:
            g = 1.0 - np.abs(image - pad_img[sl]) / max_diff
        attacks[d] = pad_strength[sl] * g
        atk_labels[d] = pad_labels[sl]
        atk_index[d] = pad_index[sl]

    best = attacks.max(axis=0)
    conquered = best > strengths
    if not conquered.any():
        return labels, strengths, change_counts, False

    # Tie-break among equally strong attackers: label order, then raster order.
    tie_key = atk_labels.astype(np.int64) * (n_cells + 1) + atk_index
    tie_key = np.where(attacks == best, tie_key, np.iinfo(np.int64).max)
    winner = tie_key.argmin(axis=0)

    win_label = np.take_along_axis(atk_labels, winner[None], axis=0)[0]
    new_labels = np.where(conquered, win_label, labels)
    new_strengths = np.where(conquered, best, strengths)
    new_counts = change_counts + (conquered & (new_labels != labels))
    return new_labels, new_strengths, new_counts.astype(np.int32), True


def default_max_iterations(shape: tuple[int, int]) -> int:
    height, width = shape
    return 10 * (width + height)


def segment(
    image: np.ndarray,
    seeds: Iterable[SeedPoint],
    max_iterations: int | None = None,
) -> SegmentationResult:
    """Run the automaton to convergence (or the iteration cap) and return the result.

    Deterministic: identical inputs produce bit-identical results.
    """

    grid = as_intensity_grid(image)
    labels, strengths, counts = initial_state(grid, seeds)
    if max_iterations is None:
        max_iterations = default_max_iterations(grid.shape)
    if max_iterations < 1:
        raise InputError("max_iterations must be positive")
    max_diff = max_pairwise_difference(grid)

    iterations = 0
    for _ in range(max_iterations):
        labels, strengths, counts, changed = step(labels, strengths, counts, grid, max_diff)
        iterations += 1
        if not changed:
            break
    return SegmentationResult(
        mask=labels == LABEL_FOREGROUND,
        labels=labels,
        strengths=strengths,
        change_counts=counts,
        iterations_run=iterations,
    )


def border_background_seeds(shape: tuple[int, int]) -> list[SeedPoint]:
    """Background seeds along every edge cell (the standard session start set)."""

    height, width = shape
    seeds = []
    for x in range(width):
        seeds.append(SeedPoint(x, 0, LABEL_BACKGROUND))
        if height > 1:
            seeds.append(SeedPoint(x, height - 1, LABEL_BACKGROUND))
    for y in range(1, height - 1):
        seeds.append(SeedPoint(0, y, LABEL_BACKGROUND))
        if width > 1:
            seeds.append(SeedPoint(width - 1, y, LABEL_BACKGROUND))
    return seeds
