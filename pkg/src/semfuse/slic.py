"""Simple linear iterative clustering (SLIC) superpixels.

Clusters live in a 5-D space (CIELAB colour + image position). Each
iteration assigns every pixel to the nearest centre among those whose
2S x 2S window contains it, then moves the centres to the mean of their
members. A final pass splits clusters into 4-connected pieces, folds
fragments smaller than S^2/4 into the neighbour they share the longest
border with, and relabels densely.
"""

from __future__ import annotations

import math

import numpy as np
from skimage import measure
from skimage.color import rgb2lab

from .errors import EmptyImage, InvalidParameter
from .semantics import SuperpixelMap

DEFAULT_COMPACTNESS = 10.0
DEFAULT_ITERATIONS = 10


def default_segment_count(n: int, m: int) -> int:
    """1200 superpixels for a 640x480 frame, scaled by area otherwise."""
    return max(1, round(1200 * n * m / (640 * 480)))


def _to_lab(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    if img.ndim != 3 or img.shape[2] not in (3, 4):
        raise InvalidParameter("expected an RGB raster of shape (n, m, 3)")
    img = img[:, :, :3]
    if np.issubdtype(img.dtype, np.integer):
        img = img.astype(np.float64) / 255.0
    return rgb2lab(np.clip(img.astype(np.float64), 0.0, 1.0))


def _grid_centres(n: int, m: int, k: int) -> tuple[np.ndarray, float]:
    step = math.sqrt(n * m / k)
    ny = max(1, min(n, round(n / step)))
    nx = max(1, min(m, round(m / step)))
    ys = (np.arange(ny) + 0.5) * n / ny
    xs = (np.arange(nx) + 0.5) * m / nx
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return np.column_stack([yy.ravel(), xx.ravel()]), step


def slic_segment(
    image: np.ndarray,
    target_count: int | None = None,
    compactness: float = DEFAULT_COMPACTNESS,
    iterations: int = DEFAULT_ITERATIONS,
) -> SuperpixelMap:
    img = np.asarray(image)
    if img.size == 0 or img.ndim < 2 or img.shape[0] == 0 or img.shape[1] == 0:
        raise EmptyImage("cannot segment an empty image")
    n, m = img.shape[:2]
    k = default_segment_count(n, m) if target_count is None else int(target_count)
    if k < 1 or k > n * m:
        raise InvalidParameter(f"target_count must lie in [1, {n * m}], got {k}")
    if not compactness > 0:
        raise InvalidParameter("compactness must be positive")
    if iterations < 0:
        raise InvalidParameter("iterations must be non-negative")

    lab = _to_lab(img)
    pos, step = _grid_centres(n, m, k)
    centres = np.column_stack([lab[np.round(pos[:, 0] - 0.5).astype(int), np.round(pos[:, 1] - 0.5).astype(int)], pos])
    # centre layout: L, a, b, y, x  (y/x in pixel-centre coordinates)
    yy, xx = np.mgrid[0:n, 0:m].astype(np.float64)
    yy += 0.5
    xx += 0.5
    spatial_w = (compactness / step) ** 2
    half = int(math.ceil(step))

    labels = np.full((n, m), -1, dtype=np.int64)
    for _ in range(max(iterations, 1)):
        best = np.full((n, m), np.inf)
        labels.fill(-1)
        for ci, (cl, ca, cb, cy, cx) in enumerate(centres):
            y0 = max(0, int(math.floor(cy - half)))
            y1 = min(n, int(math.ceil(cy + half)))
            x0 = max(0, int(math.floor(cx - half)))
            x1 = min(m, int(math.ceil(cx + half)))
            if y0 >= y1 or x0 >= x1:
                continue
            win = lab[y0:y1, x0:x1]
            dc = (win[..., 0] - cl) ** 2 + (win[..., 1] - ca) ** 2 + (win[..., 2] - cb) ** 2
            ds = (yy[y0:y1, x0:x1] - cy) ** 2 + (xx[y0:y1, x0:x1] - cx) ** 2
            d = dc + spatial_w * ds
            bw = best[y0:y1, x0:x1]
            closer = d < bw
            bw[closer] = d[closer]
            labels[y0:y1, x0:x1][closer] = ci
        # pixels outside every window (only possible with tiny K) join the nearest centre
        stray = labels < 0
        if stray.any():
            sy, sx = yy[stray], xx[stray]
            d2 = (sy[:, None] - centres[None, :, 3]) ** 2 + (sx[:, None] - centres[None, :, 4]) ** 2
            labels[stray] = np.argmin(d2, axis=1)
        if iterations == 0:
            break
        flat = labels.ravel()
        counts = np.bincount(flat, minlength=len(centres)).astype(np.float64)
        feats = np.column_stack([lab.reshape(-1, 3), yy.ravel(), xx.ravel()])
        sums = np.zeros_like(centres)
        for j in range(5):
            sums[:, j] = np.bincount(flat, weights=feats[:, j], minlength=len(centres))
        alive = counts > 0
        centres[alive] = sums[alive] / counts[alive, None]

    return enforce_connectivity(labels, min_size=step * step / 4.0)


def enforce_connectivity(labels: np.ndarray, min_size: float) -> SuperpixelMap:
    """Split into 4-connected pieces, absorb pieces below ``min_size``, relabel densely."""
    labels = np.asarray(labels, dtype=np.int64)
    n, m = labels.shape
    # same-valued 4-connected regions, numbered from 1
    comp = measure.label(labels, background=-1, connectivity=1).astype(np.int64) - 1
    ncomp = int(comp.max()) + 1
    sizes = np.bincount(comp.ravel(), minlength=ncomp).astype(np.int64)

    # border-length between adjacent components
    pairs = [
        np.column_stack([comp[:, :-1].ravel(), comp[:, 1:].ravel()]),
        np.column_stack([comp[:-1, :].ravel(), comp[1:, :].ravel()]),
    ]
    pairs = np.concatenate(pairs)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    pairs = np.sort(pairs, axis=1)
    uniq, cnt = np.unique(pairs, axis=0, return_counts=True)
    adjacency: list[dict[int, int]] = [dict() for _ in range(ncomp)]
    for (a, b), c in zip(uniq.tolist(), cnt.tolist()):
        adjacency[a][b] = adjacency[a].get(b, 0) + c
        adjacency[b][a] = adjacency[b].get(a, 0) + c

    parent = np.arange(ncomp)
    alive = np.ones(ncomp, dtype=bool)
    # smallest first; ties by id keep the result deterministic
    order = sorted(range(ncomp), key=lambda i: (sizes[i], i))
    for c in order:
        if not alive[c] or sizes[c] >= min_size or not adjacency[c]:
            continue
        target = max(adjacency[c].items(), key=lambda kv: (kv[1], -kv[0]))[0]
        parent[c] = target
        alive[c] = False
        sizes[target] += sizes[c]
        for nb, w in adjacency[c].items():
            if nb == target:
                continue
            adjacency[target][nb] = adjacency[target].get(nb, 0) + w
            adjacency[nb][target] = adjacency[nb].get(target, 0) + w
            adjacency[nb].pop(c, None)
        adjacency[target].pop(c, None)
        adjacency[c] = {}

    # path-compress merged components onto their surviving root
    root = parent.copy()
    while True:
        nxt = root[root]
        if np.array_equal(nxt, root):
            break
        root = nxt
    final = root[comp]
    # dense ids in raster order of first appearance
    _, first_idx, inverse = np.unique(final.ravel(), return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first_idx))
    dense = rank[inverse].reshape(n, m)
    return SuperpixelMap(dense, int(dense.max()) + 1)
