"""Synthetic scenes with exact ground truth.

Scenes are built from axis-aligned boxes and finite vertical planes, so
every ray intersection has a closed form. From a scene this module
produces a motion-distorted 16-beam sweep (one packet per azimuth block,
each cast from the lidar pose at the packet time), odometry, rendered
label/score images per camera, and a ray-cast visibility oracle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .camproject import CameraModel, in_image, project_many, unproject_many
from .errors import ConfigError, InvalidParameter, NoHits
from .fusion import SOURCE_CLASSES
from .geometry import OdometryTrack, RigidTransform, StampedPose, apply, compose, invert
from .motion import LidarPacket, LidarScan
from .semantics import LabelImage, ScoreMap

UNLABELED = SOURCE_CLASSES.index("unlabeled")
T_MIN = 1e-9
STRICT_TOL = 1e-6


# ---------------------------------------------------------------------------
# primitives


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    class_id: int

    def __post_init__(self):
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise InvalidParameter(f"degenerate box {self.lo} {self.hi}")

    def intersect(self, o: np.ndarray, d: np.ndarray, inv: np.ndarray | None = None) -> np.ndarray:
        """Entry distance along each ray (``inf`` on a miss).

        ``inv`` is ``1 / d``, passed in when many boxes share the same rays.
        """
        if inv is None:
            with np.errstate(divide="ignore"):
                inv = 1.0 / d
        tnear = np.full(len(d), -np.inf)
        tfar = np.full(len(d), np.inf)
        with np.errstate(invalid="ignore"):
            for k in range(3):
                ok, dk, ik = o[:, k], d[:, k], inv[:, k]
                t1 = (self.lo[k] - ok) * ik
                t2 = (self.hi[k] - ok) * ik
                par = dk == 0.0
                if par.any():
                    # parallel to a slab: all of t if inside it, nothing otherwise
                    inside = (ok >= self.lo[k]) & (ok <= self.hi[k])
                    t1 = np.where(par, np.where(inside, -np.inf, np.inf), t1)
                    t2 = np.where(par, np.inf, t2)
                np.maximum(tnear, np.minimum(t1, t2), out=tnear)
                np.minimum(tfar, np.maximum(t1, t2), out=tfar)
        hit = (tnear <= tfar) & (tfar >= T_MIN)
        t = np.where(tnear >= T_MIN, tnear, tfar)
        return np.where(hit, t, np.inf)

    def to_json(self) -> dict:
        return {"type": "box", "lo": list(self.lo), "hi": list(self.hi), "class_id": self.class_id}


@dataclass(frozen=True)
class VerticalPlane:
    """Vertical rectangle over the segment ``p0 -> p1`` (x, y) between ``z0`` and ``z1``."""

    p0: tuple[float, float]
    p1: tuple[float, float]
    z0: float
    z1: float
    class_id: int

    def __post_init__(self):
        if self.z1 <= self.z0 or self.p0 == self.p1:
            raise InvalidParameter("degenerate vertical plane")

    def intersect(self, o: np.ndarray, d: np.ndarray) -> np.ndarray:
        x0, y0 = self.p0
        ex, ey = self.p1[0] - x0, self.p1[1] - y0
        nx, ny = -ey, ex
        denom = d[:, 0] * nx + d[:, 1] * ny
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((x0 - o[:, 0]) * nx + (y0 - o[:, 1]) * ny) / denom
            hx = o[:, 0] + t * d[:, 0]
            hy = o[:, 1] + t * d[:, 1]
            hz = o[:, 2] + t * d[:, 2]
            s = ((hx - x0) * ex + (hy - y0) * ey) / (ex * ex + ey * ey)
        ok = (denom != 0.0) & (t >= T_MIN) & (s >= 0.0) & (s <= 1.0) & (hz >= self.z0) & (hz <= self.z1)
        return np.where(ok, t, np.inf)

    def to_json(self) -> dict:
        return {"type": "plane", "p0": list(self.p0), "p1": list(self.p1), "z0": self.z0, "z1": self.z1,
                "class_id": self.class_id}


Primitive = Box | VerticalPlane


def primitive_from_json(d: dict) -> Primitive:
    if d["type"] == "box":
        return Box(tuple(d["lo"]), tuple(d["hi"]), int(d["class_id"]))
    if d["type"] == "plane":
        return VerticalPlane(tuple(d["p0"]), tuple(d["p1"]), float(d["z0"]), float(d["z1"]), int(d["class_id"]))
    raise InvalidParameter(f"unknown primitive type {d['type']!r}")


def cast_rays(primitives: Sequence[Primitive], o: np.ndarray, d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest hit distance and primitive index per ray (``inf``/-1 on a miss)."""
    o = np.broadcast_to(np.asarray(o, dtype=np.float64), np.shape(d))
    d = np.asarray(d, dtype=np.float64)
    best = np.full(len(d), np.inf)
    which = np.full(len(d), -1, dtype=np.int64)
    with np.errstate(divide="ignore"):
        inv = 1.0 / d
    for i, prim in enumerate(primitives):
        t = prim.intersect(o, d, inv) if isinstance(prim, Box) else prim.intersect(o, d)
        closer = t < best
        best[closer] = t[closer]
        which[closer] = i
    return best, which


# ---------------------------------------------------------------------------
# trajectory and lidar


@dataclass(frozen=True)
class Trajectory:
    """Planar vehicle motion: constant speed (m/s) along the heading plus constant yaw rate (rad/s)."""

    speed: float = 0.0
    yaw_rate: float = 0.0
    start: RigidTransform = field(default_factory=RigidTransform.identity)
    t0: float = 0.0

    def pose(self, t: float) -> RigidTransform:
        dt = t - self.t0
        w = self.yaw_rate
        yaw = w * dt
        if abs(w) < 1e-12:
            dx, dy = self.speed * dt, 0.0
        else:
            dx = self.speed / w * math.sin(yaw)
            dy = self.speed / w * (1.0 - math.cos(yaw))
        local = compose(RigidTransform.from_translation(dx, dy, 0.0), RigidTransform.rot_z(yaw))
        return compose(self.start, local)

    def to_json(self) -> dict:
        return {"speed": self.speed, "yaw_rate": self.yaw_rate, "t0": self.t0,
                "start": self.start.as_matrix().ravel().tolist()}

    @classmethod
    def from_json(cls, d: dict) -> Trajectory:
        start = RigidTransform.from_matrix(d["start"]) if "start" in d else RigidTransform.identity()
        return cls(float(d.get("speed", 0.0)), float(d.get("yaw_rate", 0.0)), start, float(d.get("t0", 0.0)))


@dataclass(frozen=True)
class LidarSpec:
    beams: int = 16
    elev_min: float = -15.0
    elev_max: float = 15.0
    azimuth_step: float = 0.4
    rate: float = 10.0
    columns_per_packet: int = 12
    start_azimuth: float = 180.0
    max_range: float = 100.0
    min_range: float = 0.3

    @property
    def period(self) -> float:
        return 1.0 / self.rate

    @property
    def columns(self) -> int:
        return int(round(360.0 / self.azimuth_step))

    @property
    def elevations(self) -> np.ndarray:
        return np.linspace(self.elev_min, self.elev_max, self.beams)

    @property
    def theta_v(self) -> float:
        return (self.elev_max - self.elev_min) / (self.beams - 1)

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class SceneSpec:
    primitives: tuple[Primitive, ...]
    lidar: LidarSpec = field(default_factory=LidarSpec)
    trajectory: Trajectory = field(default_factory=Trajectory)
    T_veh_l: RigidTransform = field(default_factory=lambda: RigidTransform.from_translation(0.0, 0.0, 1.9))
    cameras: tuple[CameraModel, ...] = ()
    seed: int = 0
    jitter: float = 0.0
    sweep_start: float = 0.0
    camera_time: float | None = None

    @property
    def t_ref(self) -> float:
        """Camera capture time; defaults to the sweep midpoint."""
        if self.camera_time is not None:
            return self.camera_time
        pt = packet_times(self)
        return 0.5 * (float(pt[0]) + float(pt[-1]))

    def lidar_pose(self, t: float) -> RigidTransform:
        return compose(self.trajectory.pose(t), self.T_veh_l)

    def camera_pose(self, model: CameraModel, t: float) -> RigidTransform:
        """Camera -> world at time ``t``."""
        return compose(self.lidar_pose(t), invert(model.T_l_cn))

    def to_json(self) -> dict:
        return {
            "primitives": [p.to_json() for p in self.primitives],
            "lidar": self.lidar.to_json(),
            "trajectory": self.trajectory.to_json(),
            "T_veh_l": self.T_veh_l.as_matrix().ravel().tolist(),
            "cameras": [c.to_json() for c in self.cameras],
            "seed": self.seed,
            "jitter": self.jitter,
            "sweep_start": self.sweep_start,
            "camera_time": self.camera_time,
        }

    @classmethod
    def from_json(cls, d: dict) -> SceneSpec:
        return cls(
            primitives=tuple(primitive_from_json(p) for p in d["primitives"]),
            lidar=LidarSpec(**d.get("lidar", {})),
            trajectory=Trajectory.from_json(d.get("trajectory", {})),
            T_veh_l=RigidTransform.from_matrix(d["T_veh_l"]) if "T_veh_l" in d else RigidTransform.from_translation(0, 0, 1.9),
            cameras=tuple(CameraModel.from_json(c) for c in d.get("cameras", [])),
            seed=int(d.get("seed", 0)),
            jitter=float(d.get("jitter", 0.0)),
            sweep_start=float(d.get("sweep_start", 0.0)),
            camera_time=d.get("camera_time"),
        )

    @classmethod
    def load(cls, path: str | Path) -> SceneSpec:
        return cls.from_json(json.loads(Path(path).read_text()))


def packet_times(spec: SceneSpec) -> np.ndarray:
    lid = spec.lidar
    n_packets = math.ceil(lid.columns / lid.columns_per_packet)
    col_dt = lid.period / lid.columns
    return spec.sweep_start + np.arange(n_packets) * lid.columns_per_packet * col_dt


@dataclass(frozen=True, eq=False)
class SimulatedScan:
    scan: LidarScan
    labels: np.ndarray
    world_points: np.ndarray
    packet_ids: np.ndarray

    def __iter__(self):
        return iter((self.scan, self.labels, self.world_points))


def simulate_scan(spec: SceneSpec, scan_id: str = "0") -> SimulatedScan:
    """Cast one sweep; points come back in the lidar frame at each packet's time."""
    lid = spec.lidar
    elev = np.deg2rad(lid.elevations)
    times = packet_times(spec)
    packets = []
    labels = []
    world = []
    pkt_ids = []
    for k, t in enumerate(times):
        c0 = k * lid.columns_per_packet
        cols = np.arange(c0, min(c0 + lid.columns_per_packet, lid.columns))
        az = np.deg2rad(lid.start_azimuth + cols * lid.azimuth_step)
        aa, ee = np.meshgrid(az, elev, indexing="ij")
        aa, ee = aa.ravel(), ee.ravel()
        d_l = np.column_stack([np.cos(ee) * np.cos(aa), np.cos(ee) * np.sin(aa), np.sin(ee)])
        pose = spec.lidar_pose(float(t))
        d_w = d_l @ pose.rotation.T
        dist, which = cast_rays(spec.primitives, pose.translation, d_w)
        ok = (which >= 0) & (dist <= lid.max_range) & (dist >= lid.min_range)
        p_w = pose.translation + dist[ok, None] * d_w[ok]
        p_l = dist[ok, None] * d_l[ok]
        if spec.jitter > 0:
            rng = np.random.default_rng([spec.seed, k])
            p_l = p_l + rng.normal(scale=spec.jitter, size=p_l.shape)
            p_w = apply(pose, p_l)
        packets.append(LidarPacket(float(t), p_l))
        labels.append(np.array([spec.primitives[i].class_id for i in which[ok]], dtype=np.int64))
        world.append(p_w)
        pkt_ids.append(np.full(int(ok.sum()), k))
    scan = LidarScan(tuple(packets), lid.period, scan_id)
    if len(scan) == 0:
        raise NoHits("no lidar ray hit the scene")
    return SimulatedScan(scan, np.concatenate(labels), np.concatenate(world), np.concatenate(pkt_ids))


def odometry_for(spec: SceneSpec, extra_times: Sequence[float] = (), margin: float = 0.02, rate: float = 100.0) -> OdometryTrack:
    """Poses at every packet time, the camera time, and a ``rate`` Hz grid."""
    pt = packet_times(spec)
    exact = np.concatenate([pt, [spec.t_ref], np.asarray(extra_times, dtype=np.float64)])
    lo = pt[0] - margin
    hi = pt[-1] + margin
    grid = np.arange(math.floor(lo * rate), math.ceil(hi * rate) + 1) / rate
    grid = grid[(grid >= lo) & (grid <= hi)]
    # drop grid samples that nearly coincide with exact ones
    exact = np.unique(exact)
    near = np.abs(grid[:, None] - exact[None, :]).min(axis=1) < 1e-7
    times = np.unique(np.concatenate([exact, grid[~near]]))
    return OdometryTrack(StampedPose(float(t), spec.trajectory.pose(float(t))) for t in times)


def static_in_lidar_frame(spec: SceneSpec, world_points: np.ndarray, t: float) -> np.ndarray:
    """World points expressed in the lidar frame at time ``t``."""
    return apply(invert(spec.lidar_pose(t)), world_points)


# ---------------------------------------------------------------------------
# cameras


def render_semantic_image(
    spec: SceneSpec, model: CameraModel, peak_score: float = 10.0, t: float | None = None, classes: int = len(SOURCE_CLASSES)
) -> tuple[LabelImage, ScoreMap]:
    """Label every pixel with the class of the first primitive its ray hits."""
    t = spec.t_ref if t is None else t
    vv, uu = np.mgrid[0:model.height, 0:model.width].astype(np.float64)
    dirs = unproject_many(np.column_stack([uu.ravel(), vv.ravel()]), model)
    valid = ~np.isnan(dirs[:, 0])
    pose = spec.camera_pose(model, t)
    labels = np.full(len(dirs), UNLABELED, dtype=np.int64)
    if spec.primitives and valid.any():
        d_w = dirs[valid] @ pose.rotation.T
        _, which = cast_rays(spec.primitives, pose.translation, d_w)
        cls = np.array([p.class_id for p in spec.primitives] + [UNLABELED], dtype=np.int64)
        labels[valid] = cls[which]  # which == -1 picks UNLABELED
    labels = labels.reshape(model.height, model.width)
    scores = np.zeros((classes, model.height, model.width))
    np.put_along_axis(scores, labels[None], peak_score, axis=0)
    return LabelImage(labels, classes), ScoreMap(scores)


def visibility_oracle(
    points_cam: np.ndarray, spec: SceneSpec, model: CameraModel, cam_to_world: RigidTransform
) -> np.ndarray:
    """True where the camera has a clear line of sight to the point and it lands in the image."""
    p = np.asarray(points_cam, dtype=np.float64).reshape(-1, 3)
    out = np.zeros(len(p), dtype=bool)
    front = p[:, 2] > 0
    if not front.any():
        return out
    idx = np.flatnonzero(front)
    px = project_many(p[idx], model)
    inside = in_image(px, model)
    idx = idx[inside]
    if len(idx) == 0:
        return out
    dist = np.linalg.norm(p[idx], axis=1)
    d_w = (p[idx] / dist[:, None]) @ cam_to_world.rotation.T
    t_hit, _ = cast_rays(spec.primitives, cam_to_world.translation, d_w)
    out[idx] = ~(t_hit < dist - STRICT_TOL)
    return out


def _ring_directions(d: np.ndarray, angle: float, count: int) -> np.ndarray:
    """``count`` unit directions at ``angle`` rad around each unit direction in ``d``."""
    helper = np.where(np.abs(d[:, 2:3]) < 0.9, [[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]])
    e1 = np.cross(d, helper)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(d, e1)
    phis = np.arange(count) * 2 * np.pi / count
    ring = (
        np.cos(angle) * d[:, None, :]
        + np.sin(angle) * (np.cos(phis)[None, :, None] * e1[:, None, :] + np.sin(phis)[None, :, None] * e2[:, None, :])
    )
    return ring


def deep_occlusion(
    points_cam: np.ndarray,
    spec: SceneSpec,
    cam_to_world: RigidTransform,
    margin: float,
    rings: int = 4,
    per_ring: int = 24,
) -> np.ndarray:
    """True where every ray within ``margin`` rad of the point's ray is blocked
    before the point by the same primitive that blocks the point itself, i.e.
    the ray runs at least ``margin`` inside that occluder's silhouette.

    Sampled on ``rings`` concentric cones (plus the centre ray) with
    ``per_ring`` rays each.
    """
    p = np.asarray(points_cam, dtype=np.float64).reshape(-1, 3)
    dist = np.linalg.norm(p, axis=1)
    d = p / dist[:, None]
    origin = cam_to_world.translation
    t_hit, occluder = cast_rays(spec.primitives, origin, d @ cam_to_world.rotation.T)
    blocked = t_hit < dist - STRICT_TOL
    for i in range(rings):
        cone = _ring_directions(d, margin * (i + 1) / rings, per_ring)
        dirs = cone.reshape(-1, 3) @ cam_to_world.rotation.T
        t_c, w_c = cast_rays(spec.primitives, origin, dirs)
        t_c = t_c.reshape(-1, per_ring)
        w_c = w_c.reshape(-1, per_ring)
        blocked &= ((t_c < dist[:, None] - STRICT_TOL) & (w_c == occluder[:, None])).all(axis=1)
    return blocked


# ---------------------------------------------------------------------------
# canned scenes

SYNTH_FOCAL = 387.0


def fisheye_camera(cam_id: str, T_l_cn: RigidTransform, width: int = 640, height: int = 480, focal: float = SYNTH_FOCAL) -> CameraModel:
    """Wide-angle (~95 deg horizontal) camera with mild barrel distortion."""
    return CameraModel(
        id=cam_id, width=width, height=height, fx=focal, fy=focal, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        alpha=0.0, k1=-0.05, k2=0.005, k3=0.0, k4=0.0, T_l_cn=T_l_cn,
    )


def camera_mount(position_l: Sequence[float], yaw_deg: float) -> RigidTransform:
    """Lidar -> camera transform for a camera at ``position_l`` (lidar frame) looking along ``yaw_deg``.

    Camera axes: z forward, x right, y down.
    """
    yaw = math.radians(yaw_deg)
    fwd = np.array([math.cos(yaw), math.sin(yaw), 0.0])
    right = np.array([math.sin(yaw), -math.cos(yaw), 0.0])
    down = np.array([0.0, 0.0, -1.0])
    r_cam_to_l = np.column_stack([right, down, fwd])
    cam_to_l = RigidTransform(r_cam_to_l, np.asarray(position_l, dtype=np.float64))
    return invert(cam_to_l)


def _cls(name: str) -> int:
    return SOURCE_CLASSES.index(name)


def standard_cameras() -> tuple[CameraModel, ...]:
    """Roof rig of six overlapping cameras level with the lidar, 60 deg apart.

    Mounts sit on the roof rectangle rather than on the lidar axis, so each
    camera sees the street with some sideways parallax.
    """
    mounts = (
        ("cam_front", (0.5, 0.0, 0.0), 0.0),
        ("cam_front_left", (0.4, 0.4, 0.0), 60.0),
        ("cam_rear_left", (-0.6, 0.4, 0.0), 120.0),
        ("cam_rear", (-0.7, 0.0, 0.0), 180.0),
        ("cam_rear_right", (-0.6, -0.4, 0.0), -120.0),
        ("cam_front_right", (0.4, -0.4, 0.0), -60.0),
    )
    return tuple(fisheye_camera(cid, camera_mount(pos, yaw)) for cid, pos, yaw in mounts)


def street_scene(seed: int = 0, speed: float = 6.0, yaw_rate_deg: float = 0.0) -> SceneSpec:
    """Urban street: road, pavements, building fronts, fences with hedges
    behind them, poles with signs, pedestrians, riders and parked vehicles.

    Object placement is jittered by ``seed``. The sweep seam faces forward,
    so the front camera sees returns from both ends of the sweep.
    """
    rng = np.random.default_rng(seed)
    prims: list[Primitive] = [
        Box((-60.0, -5.5, -0.2), (60.0, 5.5, 0.0), _cls("road")),
        Box((-60.0, 5.5, -0.2), (60.0, 9.0, 0.1), _cls("undrivable_road")),
        Box((-60.0, -9.0, -0.2), (60.0, -5.5, 0.1), _cls("undrivable_road")),
        VerticalPlane((-60.0, 11.5), (60.0, 11.5), 0.0, 9.0, _cls("building")),
        VerticalPlane((-60.0, -11.5), (60.0, -11.5), 0.0, 9.0, _cls("building")),
        VerticalPlane((35.0, -11.5), (35.0, 11.5), 0.0, 12.0, _cls("building")),
        VerticalPlane((-40.0, -11.5), (-40.0, 11.5), 0.0, 12.0, _cls("building")),
    ]
    for side in (1.0, -1.0):
        # fence runs with a hedge growing behind them, and free-standing hedges
        for x in np.arange(-20.0, 24.0, 11.0) + rng.uniform(-2, 2):
            w = rng.uniform(3.0, 5.0)
            prims.append(VerticalPlane((x, side * 9.5), (x + w, side * 9.5), 0.1, 1.2, _cls("fence")))
            y0, y1 = sorted((side * 9.8, side * 10.9))
            prims.append(Box((x, y0, 0.1), (x + w, y1, rng.uniform(2.0, 2.6)), _cls("vegetation")))
            xh = x + w + rng.uniform(1.5, 3.0)
            prims.append(Box((xh, y0, 0.1), (xh + rng.uniform(1.0, 2.0), y1, rng.uniform(2.0, 2.6)), _cls("vegetation")))
        # poles, some carrying signs
        for x in np.arange(-15.0, 20.0, 6.0) + rng.uniform(-1.5, 1.5):
            y = side * (6.1 + rng.uniform(0.0, 0.4))
            prims.append(Box((x - 0.08, y - 0.08, 0.1), (x + 0.08, y + 0.08, 4.5), _cls("pole")))
            if rng.random() < 0.5:
                prims.append(Box((x - 0.05, y - 0.4, 2.4), (x + 0.05, y + 0.4, 3.0), _cls("sign")))
        # pedestrians and riders on the pavement
        for x in np.arange(-12.0, 16.0, 7.0) + rng.uniform(-2, 2):
            y = side * (7.1 + rng.uniform(0.0, 1.2))
            name = "rider" if rng.random() < 0.3 else "pedestrian"
            prims.append(Box((x - 0.25, y - 0.2, 0.1), (x + 0.25, y + 0.2, 1.75), _cls(name)))
        # parked vehicles along the kerb and one further ahead
        for x in (-14.0, -2.0, 9.0, 18.0) + rng.uniform(-2, 2, size=4):
            y0 = side * 3.5
            prims.append(Box((x, min(y0, y0 + side * 1.8), 0.0), (x + 4.2, max(y0, y0 + side * 1.8), 1.45),
                             _cls("vehicle")))
    return SceneSpec(
        primitives=tuple(prims),
        lidar=LidarSpec(start_azimuth=0.0),
        trajectory=Trajectory(speed=speed, yaw_rate=math.radians(yaw_rate_deg)),
        cameras=standard_cameras(),
        seed=seed,
    )


def wall_scene(speed: float = 0.0, yaw_rate_deg: float = 0.0, distance: float = 10.0) -> SceneSpec:
    """A single wall ahead of and around the vehicle; used for exactness checks."""
    prims = (
        VerticalPlane((distance, -50.0), (distance, 50.0), -10.0, 20.0, _cls("building")),
        VerticalPlane((-distance, -50.0), (-distance, 50.0), -10.0, 20.0, _cls("building")),
        VerticalPlane((-50.0, distance), (50.0, distance), -10.0, 20.0, _cls("building")),
        VerticalPlane((-50.0, -distance), (50.0, -distance), -10.0, 20.0, _cls("building")),
    )
    return SceneSpec(
        primitives=prims,
        lidar=LidarSpec(start_azimuth=0.0),
        trajectory=Trajectory(speed=speed, yaw_rate=math.radians(yaw_rate_deg)),
    )


def occlusion_scene(seed: int) -> SceneSpec:
    """Near walls and boxes in front of a far wall, seen by side-mounted cameras.

    Stationary vehicle; the occluders sit at different bearings and
    heights so the lower cameras see parallax the lidar does not.
    """
    rng = np.random.default_rng(1000 + seed)
    side = 1.0 if seed % 2 == 0 else -1.0
    far = side * rng.uniform(11.0, 15.0)
    prims: list[Primitive] = [
        VerticalPlane((-40.0, far), (40.0, far), -3.0, 10.0, _cls("building")),
        Box((-40.0, -40.0, -0.3), (40.0, 40.0, 0.0), _cls("road")),
    ]
    for _ in range(int(rng.integers(2, 5))):
        y = side * rng.uniform(3.5, 7.5)
        x = rng.uniform(-6.0, 6.0)
        if rng.random() < 0.5:
            w = rng.uniform(1.5, 4.0)
            prims.append(VerticalPlane((x, y), (x + w, y), 0.0, rng.uniform(1.0, 2.6), _cls("fence")))
        else:
            sx, sy, sz = rng.uniform(0.6, 2.5), rng.uniform(0.5, 1.8), rng.uniform(0.8, 2.2)
            prims.append(Box((x, y - sy / 2, 0.0), (x + sx, y + sy / 2, sz), _cls(rng.choice(["vehicle", "vegetation", "pedestrian"]))))
    cams = (
        fisheye_camera("cam_left", camera_mount((rng.uniform(-0.3, 0.3), 0.2, -0.4), 90.0)),
        fisheye_camera("cam_right", camera_mount((rng.uniform(-0.3, 0.3), -0.2, -0.4), -90.0)),
    )
    return SceneSpec(primitives=tuple(prims), cameras=cams, seed=seed)


SCENES = {"street": street_scene, "occlusion": occlusion_scene}


def scene_by_name(name: str, seed: int = 0) -> SceneSpec:
    """A canned scene by name, or a SceneSpec JSON file by path."""
    if name in SCENES:
        return SCENES[name](seed)
    path = Path(name)
    if not path.is_file():
        raise ConfigError(f"unknown scene {name!r}; use one of {sorted(SCENES)} or a SceneSpec JSON path")
    return SceneSpec.load(path)


def export_dataset(spec: SceneSpec, out_dir: str | Path, sweeps: int = 1) -> dict[str, Path]:
    """Write a complete pipeline input set for ``sweeps`` consecutive sweeps.

    Files: ``scans.jsonl``, ``odometry.csv``, ``calib.json``, ``frames.json``
    with per-frame score maps and grid superpixel maps, ``truth.csv`` (merged
    class ids), ``merge.json`` and ``scene.json``.
    """
    from dataclasses import replace

    from .camproject import write_calibration
    from .evaluation import write_truth_csv
    from .formats import write_score_map, write_superpixel_map
    from .fusion import default_merge_spec
    from .geometry import write_odometry_csv
    from .motion import write_scans
    from .pipeline import CameraFrame, Frame, write_frames
    from .semantics import SuperpixelMap

    if sweeps < 1:
        raise InvalidParameter("sweeps must be at least 1")
    if not spec.cameras:
        raise InvalidParameter("scene has no cameras")
    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    merge = default_merge_spec()

    scans, frames, truth, samples = [], [], {}, {}
    for k in range(sweeps):
        sk = replace(spec, sweep_start=spec.sweep_start + k * spec.lidar.period,
                     camera_time=None if spec.camera_time is None else spec.camera_time + k * spec.lidar.period)
        sid = f"{k:04d}"
        sim = simulate_scan(sk, sid)
        scans.append(sim.scan)
        truth[sid] = {i: merge.mapping[c] for i, c in enumerate(sim.labels.tolist()) if merge.mapping[c] is not None}
        for s in odometry_for(sk).samples:
            key = round(s.t, 7)
            samples.setdefault(key, s)
        cams = {}
        for model in sk.cameras:
            _, scores = render_semantic_image(sk, model)
            sc = out / "frames" / f"{sid}_{model.id}.sfsm"
            sp = out / "frames" / f"{sid}_{model.id}.sfsp"
            write_score_map(sc, scores)
            write_superpixel_map(sp, SuperpixelMap.grid(model.height, model.width))
            cams[model.id] = CameraFrame(scores=sc, superpixels=sp)
        frames.append(Frame(sk.t_ref, cams))

    paths = {
        "scans": out / "scans.jsonl",
        "odometry": out / "odometry.csv",
        "calibration": out / "calib.json",
        "frames": out / "frames.json",
        "truth": out / "truth.csv",
        "merge": out / "merge.json",
        "scene": out / "scene.json",
    }
    write_scans(paths["scans"], scans)
    write_odometry_csv(OdometryTrack(samples[k] for k in sorted(samples)), paths["odometry"])
    write_calibration(paths["calibration"], spec.T_veh_l, list(spec.cameras))
    write_frames(paths["frames"], frames)
    write_truth_csv(paths["truth"], truth)
    paths["merge"].write_text(json.dumps(merge.to_json(), indent=1) + "\n")
    paths["scene"].write_text(json.dumps(spec.to_json(), indent=1) + "\n")
    return paths


def scene_gaps(spec: SceneSpec):
    """GapSpec matching the scene's lidar resolution."""
    from .occlusion import GapSpec

    return GapSpec(spec.lidar.theta_v, spec.lidar.azimuth_step)


def ablate_scene(spec: SceneSpec, mode: str = "interpolated"):
    """Direct / motion / motion+mask reports for one simulated sweep."""
    from .evaluation import ablation_run
    from .fusion import default_merge_spec
    from .semantics import SuperpixelMap, probabilize

    merge = default_merge_spec()
    sim = simulate_scan(spec)
    probs = {
        c.id: probabilize(render_semantic_image(spec, c)[1], SuperpixelMap.grid(c.height, c.width))
        for c in spec.cameras
    }
    truth = {i: merge.mapping[c] for i, c in enumerate(sim.labels.tolist()) if merge.mapping[c] is not None}
    return ablation_run(sim.scan, odometry_for(spec), probs, (spec.T_veh_l, spec.cameras), scene_gaps(spec),
                        truth, spec.t_ref, merge, mode=mode)
