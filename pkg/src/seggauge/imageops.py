"""Small grid utilities: gradients, distance transforms, morphology, contours."""

from __future__ import annotations

import hashlib
from collections import deque

import numpy as np


def gradient_magnitude(image: np.ndarray) -> np.ndarray:
    """Central-difference gradient magnitude with replicated borders."""

    padded = np.pad(image.astype(np.float64), 1, mode="edge")
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) * 0.5
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) * 0.5
    return np.hypot(gx, gy)


def contour_mask(mask: np.ndarray) -> np.ndarray:
    """Foreground cells with at least one background 4-neighbor.

    Cells beyond the grid count as background, so foreground touching the
    border is part of the contour.
    """

    padded = np.pad(mask.astype(bool), 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return mask.astype(bool) & ~interior


def _edt_1d_squared(f: np.ndarray) -> np.ndarray:
    # Lower envelope of parabolas (Felzenszwalb & Huttenlocher).
    n = f.shape[0]
    d = np.empty(n, dtype=np.float64)
    v = np.zeros(n, dtype=np.int64)
    z = np.empty(n + 1, dtype=np.float64)
    k = 0
    z[0] = -np.inf
    z[1] = np.inf
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = (q - v[k]) ** 2 + f[v[k]]
    return d


def euclidean_distance_transform(feature: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance from every cell to the nearest True cell.

    Returns +inf everywhere when the feature mask is empty.
    """

    feature = feature.astype(bool)
    height, width = feature.shape
    inf = 1e18
    d = np.where(feature, 0.0, inf)
    for y in range(height):
        d[y, :] = _edt_1d_squared(d[y, :])
    for x in range(width):
        d[:, x] = _edt_1d_squared(d[:, x])
    d = np.sqrt(d)
    d[d > 1e8] = np.inf
    return d


def erode(mask: np.ndarray, radius: int) -> np.ndarray:
    """Chebyshev (square structuring element) erosion by ``radius`` cells."""

    out = mask.astype(bool)
    for _ in range(radius):
        padded = np.pad(out, 1, constant_values=False)
        acc = out.copy()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                acc &= padded[1 + dy : 1 + dy + out.shape[0], 1 + dx : 1 + dx + out.shape[1]]
        out = acc
    return out


def dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Chebyshev dilation by ``radius`` cells."""

    out = mask.astype(bool)
    for _ in range(radius):
        padded = np.pad(out, 1, constant_values=False)
        acc = out.copy()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                acc |= padded[1 + dy : 1 + dy + out.shape[0], 1 + dx : 1 + dx + out.shape[1]]
        out = acc
    return out


def connected_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected component labels (1..n in raster order of first cell), 0 outside."""

    mask = mask.astype(bool)
    height, width = mask.shape
    labels = np.zeros((height, width), dtype=np.int32)
    current = 0
    for sy in range(height):
        for sx in range(width):
            if not mask[sy, sx] or labels[sy, sx]:
                continue
            current += 1
            queue = deque([(sy, sx)])
            labels[sy, sx] = current
            while queue:
                y, x = queue.popleft()
                for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if 0 <= ny < height and 0 <= nx < width and mask[ny, nx] and not labels[ny, nx]:
                        labels[ny, nx] = current
                        queue.append((ny, nx))
    return labels, current


def steps_to_leave(mask: np.ndarray) -> np.ndarray:
    """Per-cell minimum number of 4-steps to exit the mask (0 outside it).

    Cells beyond the grid count as outside.
    """

    mask = mask.astype(bool)
    height, width = mask.shape
    dist = np.zeros((height, width), dtype=np.int32)
    queue: deque[tuple[int, int]] = deque()
    for y in range(height):
        for x in range(width):
            if not mask[y, x]:
                continue
            edge = y == 0 or y == height - 1 or x == 0 or x == width - 1
            if not edge:
                edge = not (mask[y - 1, x] and mask[y + 1, x] and mask[y, x - 1] and mask[y, x + 1])
            if edge:
                dist[y, x] = 1
                queue.append((y, x))
    while queue:
        y, x = queue.popleft()
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if 0 <= ny < height and 0 <= nx < width and mask[ny, nx] and dist[ny, nx] == 0:
                dist[ny, nx] = dist[y, x] + 1
                queue.append((ny, nx))
    return dist


_TRACE_DIRS = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))


def trace_boundaries(mask: np.ndarray) -> list[list[tuple[int, int]]]:
    """Closed (x, y) pixel chains around each 4-connected foreground component.

    Moore boundary tracing starting at each component's first raster cell.
    """

    labels, count = connected_components(mask)
    height, width = mask.shape
    chains: list[list[tuple[int, int]]] = []

    def at(y: int, x: int, comp: int) -> bool:
        return 0 <= y < height and 0 <= x < width and labels[y, x] == comp

    for comp in range(1, count + 1):
        ys, xs = np.nonzero(labels == comp)
        sy, sx = int(ys[0]), int(xs[0])
        chain = [(sx, sy)]
        if not any(at(sy + dy, sx + dx, comp) for dy, dx in _TRACE_DIRS):
            chains.append(chain)  # isolated pixel
            continue
        # Backtrack starts west of the first cell (guaranteed outside).
        y, x = sy, sx
        back = 0
        while True:
            found = False
            for i in range(1, 9):
                d = (back + i) % 8
                dy, dx = _TRACE_DIRS[d]
                ny, nx = y + dy, x + dx
                if at(ny, nx, comp):
                    y, x = ny, nx
                    back = (d + 5) % 8  # direction of the cell we came from, rotated
                    found = True
                    break
            if not found:
                break
            if (y, x) == (sy, sx):
                break
            chain.append((x, y))
        chains.append(chain)
    return chains


def rle_encode(mask: np.ndarray) -> dict:
    """Row-major run-length encoding; runs alternate starting with False."""

    flat = mask.astype(bool).ravel()
    runs: list[int] = []
    pos = 0
    if flat.size and flat[0]:
        runs.append(0)  # runs alternate starting with a False run
    for change in np.flatnonzero(np.diff(flat.astype(np.int8))):
        runs.append(int(change + 1 - pos))
        pos = change + 1
    runs.append(int(flat.size - pos))
    return {"size": [int(mask.shape[1]), int(mask.shape[0])], "counts": runs}


def rle_decode(rle: dict) -> np.ndarray:
    width, height = rle["size"]
    flat = np.zeros(width * height, dtype=bool)
    pos = 0
    value = False
    for run in rle["counts"]:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape(height, width)


def mask_digest(mask: np.ndarray) -> str:
    """Stable hex digest of a binary mask (shape-aware)."""

    h = hashlib.sha256()
    h.update(np.asarray(mask.shape, dtype=np.int64).tobytes())
    h.update(np.packbits(mask.astype(bool)).tobytes())
    return h.hexdigest()
