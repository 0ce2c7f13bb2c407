"""Rigid transforms, stamped poses and odometry interpolation.

Conventions: a transform ``T_ab`` maps coordinates expressed in frame ``b``
into frame ``a`` (``p_a = R @ p_b + t``). ``compose(a, b)`` applies ``b``
first, then ``a``. Poses in an :class:`OdometryTrack` map the vehicle
footprint frame into the world frame.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import EmptyTrack, FormatError, InvalidParameter, TimestampOutOfRange

InterpMode = Literal["nearest", "interpolated"]
INTERP_MODES = ("nearest", "interpolated")

_ORTHO_TOL = 1e-9
_DRIFT_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _orthonormalize(r: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(r)
    out = u @ vt
    if np.linalg.det(out) < 0:
        u[:, -1] *= -1
        out = u @ vt
    return out


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Proper rigid motion: ``p -> rotation @ p + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        if r.shape != (3, 3) or t.shape != (3,):
            raise InvalidParameter("rotation must be 3x3 and translation length 3")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise InvalidParameter("transform contains non-finite values")
        if np.abs(r.T @ r - np.eye(3)).max() > _ORTHO_TOL or abs(np.linalg.det(r) - 1.0) > _ORTHO_TOL:
            raise InvalidParameter("rotation is not a proper orthonormal matrix")
        object.__setattr__(self, "rotation", _frozen(r))
        object.__setattr__(self, "translation", _frozen(t))

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, x: float, y: float, z: float) -> RigidTransform:
        return cls(np.eye(3), np.array([x, y, z], dtype=np.float64))

    @classmethod
    def rot_z(cls, angle: float, degrees: bool = False) -> RigidTransform:
        if degrees:
            angle = np.deg2rad(angle)
        c, s = np.cos(angle), np.sin(angle)
        return cls(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]), np.zeros(3))

    @classmethod
    def from_quaternion(cls, q_xyzw: Sequence[float], translation: Sequence[float]) -> RigidTransform:
        """Build from a Hamilton quaternion ``(qx, qy, qz, qw)``; normalised here."""
        q = np.asarray(q_xyzw, dtype=np.float64)
        n = np.linalg.norm(q)
        if not np.isfinite(n) or n == 0.0:
            raise InvalidParameter("quaternion has zero norm")
        return cls(Rotation.from_quat(q / n).as_matrix(), translation)

    @classmethod
    def from_matrix(cls, m: Sequence[float] | np.ndarray) -> RigidTransform:
        """Accept a 4x4 homogeneous matrix or 16 row-major values."""
        a = np.asarray(m, dtype=np.float64)
        if a.size != 16:
            raise InvalidParameter("homogeneous matrix needs 16 values")
        a = a.reshape(4, 4)
        if np.abs(a[3] - [0.0, 0.0, 0.0, 1.0]).max() > 1e-9:
            raise InvalidParameter("last row of a homogeneous matrix must be 0 0 0 1")
        return cls(a[:3, :3], a[:3, 3])

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def as_quaternion(self) -> np.ndarray:
        return Rotation.from_matrix(self.rotation).as_quat()

    def __matmul__(self, other: RigidTransform) -> RigidTransform:
        return compose(self, other)

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return apply(self, p)

    def __repr__(self) -> str:
        rv = Rotation.from_matrix(self.rotation).as_rotvec()
        return f"RigidTransform(rotvec={np.round(rv, 9).tolist()}, translation={np.round(self.translation, 9).tolist()})"


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform applying ``b`` then ``a``."""
    r = a.rotation @ b.rotation
    if np.abs(r.T @ r - np.eye(3)).max() > _DRIFT_TOL:
        r = _orthonormalize(r)
    return RigidTransform(r, a.rotation @ b.translation + a.translation)


def invert(t: RigidTransform) -> RigidTransform:
    rt = t.rotation.T
    return RigidTransform(rt, -(rt @ t.translation))


def apply(t: RigidTransform, p: np.ndarray) -> np.ndarray:
    """Apply ``t`` to a single point ``(3,)`` or a batch ``(N, 3)``."""
    p = np.asarray(p, dtype=np.float64)
    return p @ t.rotation.T + t.translation


def distance(a: RigidTransform, b: RigidTransform) -> tuple[float, float]:
    """(rotation angle in rad, translation norm) of ``invert(a) @ b``."""
    d = compose(invert(a), b)
    angle = float(np.linalg.norm(Rotation.from_matrix(d.rotation).as_rotvec()))
    return angle, float(np.linalg.norm(d.translation))


@dataclass(frozen=True, eq=False)
class StampedPose:
    t: float
    pose: RigidTransform


class OdometryTrack:
    """Immutable, time-ordered sequence of vehicle poses in the world frame."""

    def __init__(self, samples: Iterable[StampedPose]):
        samples = tuple(samples)
        if not samples:
            raise EmptyTrack("odometry track has no samples")
        times = np.array([s.t for s in samples], dtype=np.float64)
        if not np.all(np.isfinite(times)):
            raise InvalidParameter("odometry timestamps must be finite")
        if np.any(np.diff(times) <= 0):
            raise InvalidParameter("odometry timestamps must be strictly increasing")
        self._samples = samples
        self._times = _frozen(times)

    @property
    def samples(self) -> tuple[StampedPose, ...]:
        return self._samples

    @property
    def times(self) -> np.ndarray:
        return self._times

    @property
    def start(self) -> float:
        return float(self._times[0])

    @property
    def end(self) -> float:
        return float(self._times[-1])

    def __len__(self) -> int:
        return len(self._samples)

    def covers(self, t: float) -> bool:
        return self.start <= t <= self.end

    def pose_at(self, t: float, mode: InterpMode = "nearest") -> RigidTransform:
        if not self.covers(t):
            raise TimestampOutOfRange(
                f"t={t!r} outside odometry coverage [{self.start!r}, {self.end!r}]"
            )
        times = self._times
        # index of first sample with time >= t
        hi = int(np.searchsorted(times, t, side="left"))
        if hi < len(times) and times[hi] == t:
            return self._samples[hi].pose
        lo = hi - 1
        if mode == "nearest":
            # ties go to the earlier sample
            if (t - times[lo]) <= (times[hi] - t):
                return self._samples[lo].pose
            return self._samples[hi].pose
        if mode != "interpolated":
            raise InvalidParameter(f"unknown interpolation mode {mode!r}")
        s = (t - times[lo]) / (times[hi] - times[lo])
        return interpolate(self._samples[lo].pose, self._samples[hi].pose, s)

    @classmethod
    def from_csv(cls, path: str | Path) -> OdometryTrack:
        return read_odometry_csv(path)

    def to_csv(self, path: str | Path) -> None:
        write_odometry_csv(self, path)


def interpolate(a: RigidTransform, b: RigidTransform, s: float) -> RigidTransform:
    """Linear translation, geodesic (shortest-arc) rotation; ``s`` in [0, 1]."""
    rel = Rotation.from_matrix(a.rotation.T @ b.rotation).as_rotvec()
    r = a.rotation @ Rotation.from_rotvec(s * rel).as_matrix()
    t = (1.0 - s) * a.translation + s * b.translation
    return RigidTransform(r, t)


def ego_motion_between(
    track: OdometryTrack, t_from: float, t_to: float, mode: InterpMode = "nearest"
) -> RigidTransform:
    """Vehicle motion ``invert(pose(t_from)) @ pose(t_to)``.

    The result maps vehicle-frame coordinates at ``t_to`` into the vehicle
    frame at ``t_from``.
    """
    if len(track) == 0:
        raise EmptyTrack("odometry track has no samples")
    if t_from == t_to:
        if not track.covers(t_from):
            raise TimestampOutOfRange(f"t={t_from!r} outside odometry coverage")
        return RigidTransform.identity()
    return compose(invert(track.pose_at(t_from, mode)), track.pose_at(t_to, mode))


ODOMETRY_HEADER = ["t", "x", "y", "z", "qx", "qy", "qz", "qw"]


def read_odometry_csv(path: str | Path) -> OdometryTrack:
    path = Path(path)
    samples = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ODOMETRY_HEADER:
            raise FormatError(f"{path}: odometry header must be {','.join(ODOMETRY_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t, x, y, z, qx, qy, qz, qw = (float(v) for v in row)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            q = np.array([qx, qy, qz, qw])
            if abs(np.linalg.norm(q) - 1.0) > 1e-6:
                raise FormatError(f"{path}:{lineno}: quaternion not unit norm")
            samples.append(StampedPose(t, RigidTransform.from_quaternion(q, [x, y, z])))
    try:
        return OdometryTrack(samples)
    except (EmptyTrack, InvalidParameter) as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_odometry_csv(track: OdometryTrack, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(ODOMETRY_HEADER) + "\n")
        for s in track.samples:
            q = s.pose.as_quaternion()
            # canonical sign keeps output byte-stable
            if q[3] < 0:
                q = -q
            vals = [s.t, *s.pose.translation, *q]
            fh.write(",".join(f"{v:.17g}" for v in vals) + "\n")
