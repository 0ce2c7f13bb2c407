"""Fisheye camera model: lidar frame -> camera frame -> pixel.

Projection follows the equidistant-polynomial fisheye model::

    a, b   = x/z, y/z
    r      = hypot(a, b),  theta = atan(r)
    theta_d = theta * (1 + k1 theta^2 + k2 theta^4 + k3 theta^6 + k4 theta^8)
    x', y' = (theta_d / r) * (a, b)
    u      = fx * (x' + alpha y') + cx
    v      = fy * y' + cy

No clamping is done for large theta; if the distortion polynomial folds
back the pixel lands wherever the formula sends it and ``in_image``
decides what is kept.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BehindCamera, FormatError, InvalidParameter
from .geometry import RigidTransform, apply

AXIS_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class CameraModel:
    id: str
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    alpha: float = 0.0
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    k4: float = 0.0
    T_l_cn: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidParameter("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise InvalidParameter("image size must be at least 1x1")

    @property
    def distortion(self) -> tuple[float, float, float, float]:
        return (self.k1, self.k2, self.k3, self.k4)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "width": self.width,
            "height": self.height,
            **{k: getattr(self, k) for k in ("fx", "fy", "cx", "cy", "alpha", "k1", "k2", "k3", "k4")},
            "T_l_cn": self.T_l_cn.as_matrix().ravel().tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> CameraModel:
        try:
            return cls(
                id=str(d["id"]),
                width=int(d["width"]),
                height=int(d["height"]),
                **{k: float(d[k]) for k in ("fx", "fy", "cx", "cy", "alpha", "k1", "k2", "k3", "k4")},
                T_l_cn=RigidTransform.from_matrix(d["T_l_cn"]),
            )
        except KeyError as exc:
            raise FormatError(f"camera entry missing field {exc}") from None


def to_camera_frame(p: np.ndarray, model: CameraModel) -> np.ndarray:
    return apply(model.T_l_cn, p)


def _distort(theta: np.ndarray, k: tuple[float, float, float, float]) -> np.ndarray:
    t2 = theta * theta
    k1, k2, k3, k4 = k
    # Horner form of 1 + k1 t^2 + k2 t^4 + k3 t^6 + k4 t^8
    return theta * (1.0 + t2 * (k1 + t2 * (k2 + t2 * (k3 + t2 * k4))))


def project_many(p_cam: np.ndarray, model: CameraModel) -> np.ndarray:
    """Project ``(N, 3)`` camera-frame points with ``z > 0`` to ``(N, 2)`` pixels."""
    p = np.asarray(p_cam, dtype=np.float64).reshape(-1, 3)
    z = p[:, 2]
    if np.any(~(z > 0)):
        raise BehindCamera("project requires z > 0 for every point")
    # z -> 0+ overflows to inf/NaN pixels; in_image rejects those
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        a = p[:, 0] / z
        b = p[:, 1] / z
        r = np.hypot(a, b)
        theta = np.arctan(r)
        theta_d = _distort(theta, model.distortion)
        on_axis = r < AXIS_EPS
        scale = np.where(on_axis, 1.0, theta_d / np.where(on_axis, 1.0, r))
        xd = scale * a
        yd = scale * b
    u = model.fx * (xd + model.alpha * yd) + model.cx
    v = model.fy * yd + model.cy
    return np.column_stack([u, v])


def project(p_cam: np.ndarray, model: CameraModel) -> np.ndarray:
    """Project one camera-frame point; returns ``array([u, v])``."""
    return project_many(np.asarray(p_cam, dtype=np.float64).reshape(1, 3), model)[0]


def round_half_away(x: np.ndarray | float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def in_image(px: np.ndarray, model: CameraModel) -> np.ndarray | bool:
    px = np.asarray(px, dtype=np.float64)
    finite = np.isfinite(px).all(axis=-1)
    safe = np.where(finite[..., None], px, -1.0)
    ui = round_half_away(safe[..., 0])
    vi = round_half_away(safe[..., 1])
    ok = finite & (ui >= 0) & (ui < model.width) & (vi >= 0) & (vi < model.height)
    return bool(ok) if ok.ndim == 0 else ok


def undistort_theta(theta_d: np.ndarray, model: CameraModel, theta_max: float = np.pi / 2, tol: float = 1e-13) -> np.ndarray:
    """Invert ``theta -> theta_d`` by bisection on ``[0, theta_max)``.

    Assumes the polynomial is monotone on that interval. Entries whose
    ``theta_d`` exceeds the value reached at ``theta_max`` come back as NaN.
    """
    td = np.asarray(theta_d, dtype=np.float64)
    k = model.distortion
    hi_val = _distort(np.asarray(theta_max), k)
    lo = np.zeros_like(td)
    hi = np.full_like(td, theta_max)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        below = _distort(mid, k) < td
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo, initial=0.0) < tol:
            break
    out = 0.5 * (lo + hi)
    return np.where(td >= hi_val, np.nan, out)


def unproject_many(px: np.ndarray, model: CameraModel, theta_max: float = np.pi / 2 - 1e-6) -> np.ndarray:
    """Unit ray directions (camera frame) for ``(N, 2)`` pixels; NaN rows where no ray exists."""
    px = np.asarray(px, dtype=np.float64).reshape(-1, 2)
    yd = (px[:, 1] - model.cy) / model.fy
    xd = (px[:, 0] - model.cx) / model.fx - model.alpha * yd
    theta_d = np.hypot(xd, yd)
    theta = undistort_theta(theta_d, model, theta_max)
    small = theta_d < AXIS_EPS
    s = np.where(small, 1.0, np.sin(theta) / np.where(small, 1.0, theta_d))
    d = np.column_stack([s * xd, s * yd, np.cos(theta)])
    d[np.isnan(theta)] = np.nan
    return d


def read_calibration(path: str | Path) -> tuple[RigidTransform, list[CameraModel]]:
    """Load ``{"T_veh_l": [...16], "cameras": [...]}``."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
        t_veh_l = RigidTransform.from_matrix(doc["T_veh_l"])
        cams = [CameraModel.from_json(c) for c in doc["cameras"]]
    except FileNotFoundError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad calibration file: {exc}") from None
    ids = [c.id for c in cams]
    if len(set(ids)) != len(ids):
        raise FormatError(f"{path}: duplicate camera ids")
    return t_veh_l, cams


def write_calibration(path: str | Path, t_veh_l: RigidTransform, cameras: list[CameraModel]) -> None:
    doc = {"T_veh_l": t_veh_l.as_matrix().ravel().tolist(), "cameras": [c.to_json() for c in cameras]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
