"""Mask-based occlusion rejection.

Points are visited nearest-first. A point whose rounded pixel is already
claimed by a nearer point's mask is occluded; otherwise it is visible and
claims a ``u_gap x v_gap`` rectangle around its own pixel. The rectangle
size is the pixel spacing expected between neighbouring lidar returns,
``f * tan(angular resolution)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .camproject import CameraModel, in_image, project_many, round_half_away
from .errors import InvalidParameter


class Visibility(IntEnum):
    VISIBLE = 0
    OCCLUDED = 1
    OUT_OF_VIEW = 2
    BEHIND_CAMERA = 3


@dataclass(frozen=True)
class GapSpec:
    """Lidar angular resolution in degrees (vertical, horizontal)."""

    theta_v: float = 2.0
    theta_h: float = 0.1

    def __post_init__(self):
        for name in ("theta_v", "theta_h"):
            val = getattr(self, name)
            if not 0.0 < val < 90.0:
                raise InvalidParameter(f"{name} must lie in (0, 90) degrees, got {val}")


@dataclass(frozen=True, eq=False)
class VisibilityResult:
    """Per-point state plus pixel coordinates (NaN unless visible)."""

    states: np.ndarray
    pixels: np.ndarray
    mask: np.ndarray | None = None

    @property
    def visible(self) -> np.ndarray:
        return self.states == Visibility.VISIBLE

    def counts(self) -> dict[str, int]:
        return {s.name.lower(): int(np.count_nonzero(self.states == s)) for s in Visibility}


def _odd_gap(x: float) -> int:
    g = max(1, math.floor(x + 0.5))
    return g + 1 if g % 2 == 0 else g


def gap_pixels(model: CameraModel, gaps: GapSpec) -> tuple[int, int]:
    u_gap = _odd_gap(model.fx * math.tan(math.radians(gaps.theta_h)))
    v_gap = _odd_gap(model.fy * math.tan(math.radians(gaps.theta_v)))
    return u_gap, v_gap


def visibility_filter(
    points_cam: np.ndarray,
    model: CameraModel,
    gaps: GapSpec,
    masking: bool = True,
    keep_mask: bool = False,
) -> VisibilityResult:
    """Classify camera-frame points as visible / occluded / out of view / behind.

    With ``masking=False`` only the behind-camera and image-bounds tests run
    (used for the direct-projection ablation).
    """
    p = np.asarray(points_cam, dtype=np.float64).reshape(-1, 3)
    n = len(p)
    states = np.full(n, Visibility.BEHIND_CAMERA, dtype=np.int8)
    pixels = np.full((n, 2), np.nan)
    grid = np.zeros((model.height, model.width), dtype=bool)
    front = np.flatnonzero(p[:, 2] > 0)
    if len(front) == 0:
        return VisibilityResult(states, pixels, grid if keep_mask else None)

    # stable: equal distances keep input order
    d2 = np.einsum("ij,ij->i", p[front], p[front])
    order = front[np.argsort(d2, kind="stable")]
    px = project_many(p[order], model)
    inside = in_image(px, model)
    states[order[~inside]] = Visibility.OUT_OF_VIEW

    cand = order[inside]
    cand_px = px[inside]
    if not masking:
        states[cand] = Visibility.VISIBLE
        pixels[cand] = cand_px
        return VisibilityResult(states, pixels, grid if keep_mask else None)

    u_gap, v_gap = gap_pixels(model, gaps)
    hu, hv = u_gap // 2, v_gap // 2
    ui = round_half_away(cand_px[:, 0]).tolist()
    vi = round_half_away(cand_px[:, 1]).tolist()
    w, h = model.width, model.height
    visible = np.zeros(len(cand), dtype=bool)
    for j, (u, v) in enumerate(zip(ui, vi)):
        if grid[v, u]:
            continue
        visible[j] = True
        grid[max(0, v - hv):min(h, v + hv + 1), max(0, u - hu):min(w, u + hu + 1)] = True
    states[cand[visible]] = Visibility.VISIBLE
    states[cand[~visible]] = Visibility.OCCLUDED
    pixels[cand[visible]] = cand_px[visible]
    return VisibilityResult(states, pixels, grid if keep_mask else None)
