"""End-to-end driver: scans + odometry + per-camera frames -> semantic clouds.

Inputs are tied together by a frames manifest, a JSON file listing the
camera frames available for t_ref selection::

    {"frames": [
        {"t": 0.05,
         "cameras": {"cam_front": {"scores": "scores/f0_cam_front.sfsm",
                                   "superpixels": "sp/f0_cam_front.sfsp"}}}
    ]}

Per camera, either ``probs`` (an SFPB probability image) or ``scores``
plus one of ``superpixels`` (SFSP) / ``image`` (any raster Pillow reads,
segmented with SLIC) must be given. Relative paths resolve against the
manifest's directory.
"""

from __future__ import annotations

import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .camproject import CameraModel, read_calibration
from .errors import ConfigError, FormatError, SemFuseError, StageError
from .formats import read_probability_image, read_score_map, read_superpixel_map, write_probability_image
from .fusion import SOURCE_CLASSES, ClassMergeSpec, fuse_scan, merge_classes, write_cloud
from .geometry import InterpMode, OdometryTrack, RigidTransform, read_odometry_csv
from .motion import LidarScan, MotionCorrectionConfig, correct_scan, read_scans, select_t_ref, write_scans
from .occlusion import GapSpec
from .semantics import ProbabilityImage, probabilize
from .slic import DEFAULT_COMPACTNESS, DEFAULT_ITERATIONS, slic_segment

STAGES = ("corrected", "visibility", "probs")


@dataclass(frozen=True)
class CameraFrame:
    scores: Path | None = None
    superpixels: Path | None = None
    image: Path | None = None
    probs: Path | None = None


@dataclass(frozen=True)
class Frame:
    t: float
    cameras: dict[str, CameraFrame]


@dataclass(frozen=True)
class SlicParams:
    target_count: int | None = None
    compactness: float = DEFAULT_COMPACTNESS
    iterations: int = DEFAULT_ITERATIONS


@dataclass(frozen=True)
class PipelineConfig:
    calibration: Path
    odometry: Path
    scans: Path
    frames: Path
    out_dir: Path
    gaps: GapSpec = field(default_factory=GapSpec)
    mode: InterpMode = "nearest"
    merge: Path | None = None
    slic: SlicParams = field(default_factory=SlicParams)
    class_names: tuple[str, ...] = SOURCE_CLASSES
    jobs: int = 1
    seed: int = 0
    dump_stages: tuple[str, ...] = ()
    masking: bool = True

    def __post_init__(self):
        bad = [s for s in self.dump_stages if s not in STAGES]
        if bad:
            raise ConfigError(f"unknown dump stage(s) {bad}; choose from {list(STAGES)}")
        if self.mode not in ("nearest", "interpolated"):
            raise ConfigError(f"unknown interpolation mode {self.mode!r}")
        if self.jobs < 1:
            raise ConfigError("--jobs must be at least 1")


@dataclass(frozen=True)
class ScanResult:
    scan_id: str
    t_ref: float
    points: int
    labelled: int
    counts: dict[str, int]
    csv: Path


def _require(path: Path | None, what: str) -> Path:
    if path is None or not Path(path).is_file():
        raise ConfigError(f"{what} not found: {path}")
    return Path(path)


def read_frames(path: str | Path) -> list[Frame]:
    path = _require(Path(path), "frames manifest")
    try:
        doc = json.loads(path.read_text())
        frames = []
        for f in doc["frames"]:
            cams = {}
            for cid, entry in f["cameras"].items():
                paths = {k: (path.parent / v if v is not None else None) for k, v in entry.items()}
                cams[cid] = CameraFrame(**paths)
            frames.append(Frame(float(f["t"]), cams))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad frames manifest: {exc}") from None
    if not frames:
        raise FormatError(f"{path}: no frames listed")
    return frames


def write_frames(path: str | Path, frames: Sequence[Frame]) -> None:
    path = Path(path)
    doc = {"frames": []}
    for f in frames:
        cams = {}
        for cid, cf in sorted(f.cameras.items()):
            entry = {}
            for key in ("scores", "superpixels", "image", "probs"):
                p = getattr(cf, key)
                if p is not None:
                    entry[key] = os.path.relpath(p, path.parent)
            cams[cid] = entry
        doc["frames"].append({"t": f.t, "cameras": cams})
    path.write_text(json.dumps(doc, indent=1) + "\n")


def _read_image(path: Path) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except (UnidentifiedImageError, OSError) as exc:
        raise FormatError(f"{path}: {exc}") from None


def load_probability_image(cf: CameraFrame, slic: SlicParams) -> ProbabilityImage:
    """Probability image for one camera frame, computing it if needed."""
    if cf.probs is not None:
        return read_probability_image(_require(cf.probs, "probability image"))
    scores = read_score_map(_require(cf.scores, "score map"))
    if cf.superpixels is not None:
        sp = read_superpixel_map(_require(cf.superpixels, "superpixel map"))
    elif cf.image is not None:
        img = _read_image(_require(cf.image, "image"))
        try:
            sp = slic_segment(img, slic.target_count, slic.compactness, slic.iterations)
        except SemFuseError as exc:
            raise StageError("semantics", f"{cf.image}: {exc}") from exc
    else:
        raise ConfigError("camera frame needs probs, or scores plus superpixels or image")
    try:
        return probabilize(scores, sp)
    except SemFuseError as exc:
        raise StageError("semantics", f"{cf.scores}: {exc}") from exc


def _safe_name(scan_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", scan_id) or "_"


def process_scan(
    scan: LidarScan,
    track: OdometryTrack,
    t_veh_l: RigidTransform,
    cameras: Sequence[CameraModel],
    frames: Sequence[Frame],
    cfg: PipelineConfig,
    merge: ClassMergeSpec | None,
) -> ScanResult:
    name = _safe_name(scan.scan_id)
    out = Path(cfg.out_dir)
    t_ref = select_t_ref(scan, [f.t for f in frames])
    frame = next(f for f in frames if f.t == t_ref)

    probs = {}
    for model in cameras:
        if model.id not in frame.cameras:
            raise ConfigError(f"frame at t={t_ref!r} has no entry for camera {model.id!r}")
        probs[model.id] = load_probability_image(frame.cameras[model.id], cfg.slic)
        if "probs" in cfg.dump_stages:
            write_probability_image(out / "stages" / f"{name}_{_safe_name(model.id)}.sfpb", probs[model.id])

    try:
        corrected = correct_scan(scan, track, MotionCorrectionConfig(t_ref, t_veh_l, cfg.mode))
    except SemFuseError as exc:
        raise StageError("motion", f"scan {scan.scan_id}: {exc}") from exc
    if "corrected" in cfg.dump_stages:
        write_scans(out / "stages" / f"{name}.corrected.jsonl", [corrected])

    vis: dict[str, np.ndarray] = {}
    try:
        cloud = fuse_scan(corrected, probs, cameras, cfg.gaps, cfg.class_names, t_ref=t_ref,
                          masking=cfg.masking, scan_id=scan.scan_id, visibility_out=vis)
        if merge is not None:
            cloud = merge_classes(cloud, merge)
    except SemFuseError as exc:
        raise StageError("fusion", f"scan {scan.scan_id}: {exc}") from exc
    if "visibility" in cfg.dump_stages:
        ids = sorted(vis)
        with (out / "stages" / f"{name}.visibility.csv").open("w") as fh:
            fh.write(",".join(["point_index"] + ids) + "\n")
            for i in range(len(scan)):
                fh.write(",".join([str(i)] + [str(int(vis[c][i])) for c in ids]) + "\n")

    csv_path = out / f"{name}.csv"
    write_cloud(cloud, csv_path, out / f"{name}.json")
    return ScanResult(scan.scan_id, t_ref, len(scan), len(cloud), dict(cloud.counts), csv_path)


def run_pipeline(cfg: PipelineConfig) -> list[ScanResult]:
    """Run every scan in ``cfg.scans``; results come back in file order.

    Scans are processed by up to ``cfg.jobs`` workers; each writes only its
    own output files, so the result does not depend on the job count.
    """
    t_veh_l, cameras = read_calibration(_require(cfg.calibration, "calibration file"))
    track = read_odometry_csv(_require(cfg.odometry, "odometry file"))
    scans = read_scans(_require(cfg.scans, "scan file"))
    frames = read_frames(cfg.frames)
    merge = ClassMergeSpec.load(_require(cfg.merge, "merge spec")) if cfg.merge is not None else None
    if merge is not None and tuple(merge.source_classes) != tuple(cfg.class_names):
        raise ConfigError("merge spec source classes differ from the pipeline class list")
    if len({s.scan_id for s in scans}) != len(scans):
        raise FormatError(f"{cfg.scans}: duplicate scan ids")

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.dump_stages:
        (out / "stages").mkdir(exist_ok=True)

    def work(scan: LidarScan) -> ScanResult:
        return process_scan(scan, track, t_veh_l, cameras, frames, cfg, merge)

    if cfg.jobs > 1 and len(scans) > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(work, scans))
    return [work(s) for s in scans]
