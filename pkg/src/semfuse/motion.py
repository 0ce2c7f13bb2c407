"""Per-packet ego-motion correction of a lidar sweep.

Each packet captured at ``t_i`` is moved into the lidar frame at the camera
reference time ``t_ref``::

    p' = inv(T_veh_l) @ M @ T_veh_l @ p,    M = inv(pose(t_ref)) @ pose(t_i)

``T_veh_l`` is the lidar pose in the vehicle footprint frame.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import FormatError, InvalidParameter, TimestampOutOfRange
from .geometry import (
    InterpMode,
    OdometryTrack,
    RigidTransform,
    apply,
    compose,
    ego_motion_between,
    invert,
)

# packets this far outside odometry coverage are clamped to the boundary pose
CLAMP_TOLERANCE = 0.010


@dataclass(frozen=True, eq=False)
class LidarPacket:
    t: float
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise InvalidParameter("packet contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True, eq=False)
class LidarScan:
    packets: tuple[LidarPacket, ...]
    period: float = 0.1
    scan_id: str = "0"

    def __post_init__(self):
        packets = tuple(self.packets)
        times = [p.t for p in packets]
        if any(b < a for a, b in zip(times, times[1:])):
            raise InvalidParameter("packet timestamps must be non-decreasing")
        object.__setattr__(self, "packets", packets)

    def __len__(self) -> int:
        return sum(len(p) for p in self.packets)

    @property
    def points(self) -> np.ndarray:
        if not self.packets:
            return np.zeros((0, 3))
        return np.concatenate([p.points for p in self.packets])

    @property
    def point_times(self) -> np.ndarray:
        if not self.packets:
            return np.zeros(0)
        return np.concatenate([np.full(len(p), p.t) for p in self.packets])

    @property
    def start(self) -> float:
        return self.packets[0].t

    @property
    def end(self) -> float:
        return self.packets[-1].t

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.start + self.end)


@dataclass(frozen=True)
class MotionCorrectionConfig:
    t_ref: float
    T_veh_l: RigidTransform = field(default_factory=RigidTransform.identity)
    mode: InterpMode = "nearest"


def _clamp(track: OdometryTrack, t: float) -> float:
    if t < track.start:
        if track.start - t <= CLAMP_TOLERANCE:
            return track.start
    elif t > track.end:
        if t - track.end <= CLAMP_TOLERANCE:
            return track.end
    else:
        return t
    raise TimestampOutOfRange(
        f"t={t!r} more than {CLAMP_TOLERANCE * 1e3:g} ms outside odometry "
        f"coverage [{track.start!r}, {track.end!r}]"
    )


def packet_transform(t_i: float, track: OdometryTrack, cfg: MotionCorrectionConfig) -> RigidTransform:
    """Lidar(t_i) -> lidar(t_ref) transform."""
    t_ref = _clamp(track, cfg.t_ref)
    t_pkt = _clamp(track, t_i)
    m = ego_motion_between(track, t_ref, t_pkt, cfg.mode)
    return compose(invert(cfg.T_veh_l), compose(m, cfg.T_veh_l))


def correct_packet(packet: LidarPacket, track: OdometryTrack, cfg: MotionCorrectionConfig) -> LidarPacket:
    t = packet_transform(packet.t, track, cfg)
    return LidarPacket(packet.t, apply(t, packet.points))


def correct_scan(
    scan: LidarScan, track: OdometryTrack, cfg: MotionCorrectionConfig, jobs: int = 1
) -> LidarScan:
    if jobs > 1 and len(scan.packets) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            packets = list(pool.map(lambda p: correct_packet(p, track, cfg), scan.packets))
    else:
        packets = [correct_packet(p, track, cfg) for p in scan.packets]
    return replace(scan, packets=tuple(packets))


def select_t_ref(scan: LidarScan, image_times: Sequence[float]) -> float:
    """Image timestamp closest to the sweep midpoint (earlier one on ties)."""
    if not len(image_times):
        raise InvalidParameter("no image timestamps to choose t_ref from")
    times = np.asarray(image_times, dtype=np.float64)
    idx = int(np.argmin(np.abs(times - scan.midpoint)))
    return float(times[idx])


# ---------------------------------------------------------------------------
# scan files: JSON lines, one packet per line, grouped by "#SCAN <id>" lines


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_scans(path: str | Path, scans: Sequence[LidarScan]) -> None:
    with Path(path).open("w") as fh:
        for scan in scans:
            fh.write(f"#SCAN {scan.scan_id}\n")
            for pkt in scan.packets:
                pts = ",".join("[" + ",".join(_fmt(c) for c in row) + "]" for row in pkt.points)
                fh.write('{"t": ' + _fmt(pkt.t) + ', "pts": [' + pts + "]}\n")


def iter_scans(path: str | Path, period: float = 0.1) -> Iterator[LidarScan]:
    path = Path(path)
    scan_id: str | None = None
    packets: list[LidarPacket] = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("#SCAN"):
                    if scan_id is not None:
                        yield LidarScan(tuple(packets), period, scan_id)
                    scan_id = line[len("#SCAN"):].strip() or str(lineno)
                    packets = []
                continue
            if scan_id is None:
                raise FormatError(f"{path}:{lineno}: packet before any #SCAN sentinel")
            try:
                obj = json.loads(line)
                packets.append(LidarPacket(float(obj["t"]), np.asarray(obj["pts"], dtype=np.float64).reshape(-1, 3)))
            except (ValueError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}:{lineno}: bad packet: {exc}") from None
    if scan_id is not None:
        try:
            yield LidarScan(tuple(packets), period, scan_id)
        except InvalidParameter as exc:
            raise FormatError(f"{path}: scan {scan_id}: {exc}") from None


def read_scans(path: str | Path, period: float = 0.1) -> list[LidarScan]:
    return list(iter_scans(path, period))
