"""Reading and writing image grids (PNG and PGM, 8-bit and 16-bit)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InputError
from .growcut import rgb_to_luminance


def read_intensity_image(path: str | Path) -> np.ndarray:
    """Load a PNG or PGM image as a float64 grid in [0, 1].

    RGB(A) inputs are converted to luminance; grayscale inputs are
    normalized by their bit depth.
    """

    path = Path(path)
    if not path.exists():
        raise InputError(f"image file not found: {path}")
    with Image.open(path) as img:
        if img.mode in ("RGB", "RGBA", "P"):
            rgb = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
            return rgb_to_luminance(rgb[..., 0], rgb[..., 1], rgb[..., 2])
        if img.mode == "L":
            return np.asarray(img, dtype=np.float64) / 255.0
        if img.mode in ("I", "I;16"):
            arr = np.asarray(img, dtype=np.float64)
            return arr / 65535.0 if arr.max() > 255 else arr / 255.0
        raise InputError(f"unsupported image mode {img.mode!r} in {path}")


def read_mask_image(path: str | Path) -> np.ndarray:
    """Load a binary mask; any value above half intensity counts as foreground."""

    return read_intensity_image(path) > 0.5


def write_pgm(path: str | Path, grid: np.ndarray) -> None:
    """Write a [0, 1] grid (or boolean mask) as an 8-bit binary PGM."""

    path = Path(path)
    data = np.clip(np.asarray(grid, dtype=np.float64), 0.0, 1.0)
    img = np.round(data * 255.0).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    path.write_bytes(header + img.tobytes())


def write_png(path: str | Path, grid: np.ndarray) -> None:
    data = np.clip(np.asarray(grid, dtype=np.float64), 0.0, 1.0)
    img = Image.fromarray(np.round(data * 255.0).astype(np.uint8), mode="L")
    img.save(Path(path), format="PNG")
