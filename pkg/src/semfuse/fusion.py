"""Label transfer from probability images onto visible lidar points."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .camproject import CameraModel, round_half_away, to_camera_frame
from .errors import DimensionMismatch, FormatError, IncompleteSpec, MissingCamera
from .motion import LidarScan
from .occlusion import GapSpec, Visibility, visibility_filter
from .semantics import ProbabilityImage

# image class order of the 12-class segmentation network
SOURCE_CLASSES = (
    "unlabeled",
    "sky",
    "building",
    "pole",
    "road",
    "undrivable_road",
    "vegetation",
    "sign",
    "fence",
    "vehicle",
    "pedestrian",
    "rider",
)

EVAL_CLASSES = ("building", "pole", "road", "undrivable_road", "vegetation", "vehicle", "pedestrian")

MIN_RETAINED_MASS = 1e-6


@dataclass(frozen=True)
class SemanticPoint:
    position: np.ndarray
    probs: np.ndarray
    source_camera: str
    pixel: np.ndarray
    point_index: int


@dataclass(eq=False)
class SemanticPointCloud:
    """Column-oriented semantic cloud; iterate for :class:`SemanticPoint` rows."""

    positions: np.ndarray
    probs: np.ndarray
    source_camera: np.ndarray
    pixels: np.ndarray
    point_index: np.ndarray
    class_names: tuple[str, ...]
    t_ref: float
    counts: dict[str, int] = field(default_factory=dict)
    scan_id: str = "0"

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.class_names = tuple(self.class_names)
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.probs = self.probs.reshape(len(self.positions), -1 if self.probs.size else len(self.class_names))
        self.source_camera = np.asarray(self.source_camera, dtype=object).reshape(-1)
        self.pixels = np.asarray(self.pixels, dtype=np.float64).reshape(-1, 2)
        self.point_index = np.asarray(self.point_index, dtype=np.int64).reshape(-1)
        if self.probs.shape[1] != len(self.class_names):
            raise DimensionMismatch("probability vectors and class_names disagree in length")
        n = len(self.positions)
        if not (len(self.source_camera) == len(self.pixels) == len(self.point_index) == n):
            raise DimensionMismatch("semantic cloud columns differ in length")

    def __len__(self) -> int:
        return len(self.positions)

    def __iter__(self) -> Iterator[SemanticPoint]:
        for i in range(len(self)):
            yield SemanticPoint(
                self.positions[i], self.probs[i], str(self.source_camera[i]), self.pixels[i], int(self.point_index[i])
            )

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.probs, axis=1)


@dataclass(frozen=True)
class ClassMergeSpec:
    """``mapping[i]`` is the target index of source class ``i`` or ``None`` (discard)."""

    source_classes: tuple[str, ...]
    target_classes: tuple[str, ...]
    mapping: tuple[int | None, ...]

    def __post_init__(self):
        if len(self.mapping) != len(self.source_classes):
            raise IncompleteSpec("merge spec must map every source class exactly once")
        for t in self.mapping:
            if t is not None and not 0 <= t < len(self.target_classes):
                raise IncompleteSpec(f"merge target {t} out of range")

    def matrix(self) -> np.ndarray:
        m = np.zeros((len(self.source_classes), len(self.target_classes)))
        for s, t in enumerate(self.mapping):
            if t is not None:
                m[s, t] = 1.0
        return m

    @classmethod
    def from_names(
        cls, source: Sequence[str], target: Sequence[str], mapping: Mapping[str, str | None]
    ) -> ClassMergeSpec:
        missing = [s for s in source if s not in mapping]
        if missing:
            raise IncompleteSpec(f"merge spec does not cover classes {missing}")
        extra = [s for s in mapping if s not in source]
        if extra:
            raise IncompleteSpec(f"merge spec names unknown classes {extra}")
        index = {name: i for i, name in enumerate(target)}
        try:
            idx = tuple(None if mapping[s] is None else index[mapping[s]] for s in source)
        except KeyError as exc:
            raise IncompleteSpec(f"unknown merge target {exc}") from None
        return cls(tuple(source), tuple(target), idx)

    def to_json(self) -> dict:
        return {
            "source_classes": list(self.source_classes),
            "target_classes": list(self.target_classes),
            "mapping": {
                s: (None if t is None else self.target_classes[t])
                for s, t in zip(self.source_classes, self.mapping)
            },
        }

    @classmethod
    def from_json(cls, doc: dict) -> ClassMergeSpec:
        try:
            return cls.from_names(doc["source_classes"], doc["target_classes"], doc["mapping"])
        except (KeyError, TypeError) as exc:
            raise FormatError(f"bad merge spec: {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> ClassMergeSpec:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from None
        return cls.from_json(doc)


def default_merge_spec() -> ClassMergeSpec:
    """12 network classes -> 7 evaluation classes."""
    mapping = {
        "unlabeled": None,
        "sky": None,
        "building": "building",
        "fence": "building",
        "pole": "pole",
        "sign": "pole",
        "road": "road",
        "undrivable_road": "undrivable_road",
        "vegetation": "vegetation",
        "vehicle": "vehicle",
        "pedestrian": "pedestrian",
        "rider": "pedestrian",
    }
    return ClassMergeSpec.from_names(SOURCE_CLASSES, EVAL_CLASSES, mapping)


def _edge_margin(px: np.ndarray, model: CameraModel) -> np.ndarray:
    u = round_half_away(px[:, 0])
    v = round_half_away(px[:, 1])
    return np.minimum(np.minimum(u, v), np.minimum(model.width - 1 - u, model.height - 1 - v))


def fuse_scan(
    corrected: LidarScan | np.ndarray,
    prob_images: Mapping[str, ProbabilityImage],
    models: Sequence[CameraModel],
    gaps: GapSpec,
    class_names: Sequence[str] = SOURCE_CLASSES,
    t_ref: float = 0.0,
    masking: bool = True,
    scan_id: str | None = None,
    visibility_out: dict | None = None,
) -> SemanticPointCloud:
    """Attach a class distribution to every lidar point some camera sees.

    A point seen by several cameras is taken from the camera where its pixel
    is farthest from the image border; ties go to the lexicographically
    smallest camera id, so the result does not depend on camera order.
    """
    if isinstance(corrected, LidarScan):
        points = corrected.points
        scan_id = corrected.scan_id if scan_id is None else scan_id
    else:
        points = np.asarray(corrected, dtype=np.float64).reshape(-1, 3)
    n = len(points)
    class_names = tuple(class_names)
    c = len(class_names)

    for model in models:
        if model.id not in prob_images:
            raise MissingCamera(f"no probability image for camera {model.id!r}")
        img = prob_images[model.id]
        if img.shape != (model.height, model.width):
            raise DimensionMismatch(
                f"camera {model.id!r}: probability image {img.shape} vs model {(model.height, model.width)}"
            )
        if img.classes != c:
            raise DimensionMismatch(f"camera {model.id!r}: {img.classes} classes, expected {c}")

    best_state = np.full(n, Visibility.BEHIND_CAMERA, dtype=np.int8)
    best_margin = np.full(n, -1, dtype=np.int64)
    best_cam = np.full(n, -1, dtype=np.int64)
    best_px = np.full((n, 2), np.nan)
    ordered = sorted(models, key=lambda mdl: mdl.id)
    for ci, model in enumerate(ordered):
        res = visibility_filter(to_camera_frame(points, model), model, gaps, masking=masking)
        if visibility_out is not None:
            visibility_out[model.id] = res.states
        best_state = np.minimum(best_state, res.states)
        vis = res.visible
        margin = np.full(n, -1, dtype=np.int64)
        if vis.any():
            margin[vis] = _edge_margin(res.pixels[vis], model)
        # strict '>' keeps the smaller id on ties
        take = vis & (margin > best_margin)
        best_margin[take] = margin[take]
        best_cam[take] = ci
        best_px[take] = res.pixels[take]

    keep = np.flatnonzero(best_cam >= 0)
    probs = np.zeros((len(keep), c))
    for ci, model in enumerate(ordered):
        sel = best_cam[keep] == ci
        if not sel.any():
            continue
        px = best_px[keep[sel]]
        u = round_half_away(px[:, 0])
        v = round_half_away(px[:, 1])
        probs[sel] = prob_images[model.id].probs[:, v, u].T
    counts = {s.name.lower(): int(np.count_nonzero(best_state == s)) for s in Visibility}
    cams = np.array([ordered[i].id for i in best_cam[keep]], dtype=object)
    return SemanticPointCloud(
        positions=points[keep],
        probs=probs,
        source_camera=cams,
        pixels=best_px[keep],
        point_index=keep,
        class_names=class_names,
        t_ref=t_ref,
        counts=counts,
        scan_id=scan_id if scan_id is not None else "0",
    )


def merge_classes(cloud: SemanticPointCloud, spec: ClassMergeSpec) -> SemanticPointCloud:
    if tuple(cloud.class_names) != tuple(spec.source_classes):
        raise IncompleteSpec("merge spec source classes do not match the cloud's classes")
    merged = cloud.probs @ spec.matrix()
    mass = merged.sum(axis=1)
    keep = mass >= MIN_RETAINED_MASS
    merged = merged[keep] / mass[keep, None]
    return SemanticPointCloud(
        positions=cloud.positions[keep],
        probs=merged,
        source_camera=cloud.source_camera[keep],
        pixels=cloud.pixels[keep],
        point_index=cloud.point_index[keep],
        class_names=spec.target_classes,
        t_ref=cloud.t_ref,
        counts=dict(cloud.counts),
        scan_id=cloud.scan_id,
    )


# ---------------------------------------------------------------------------
# CSV + JSON sidecar


def _g9(v: float) -> str:
    s = format(float(v), ".9g")
    return "0" if s == "-0" else s


def write_cloud(cloud: SemanticPointCloud, csv_path: str | Path, sidecar_path: str | Path | None = None) -> None:
    csv_path = Path(csv_path)
    sidecar_path = Path(sidecar_path) if sidecar_path is not None else csv_path.with_suffix(".json")
    header = ["x", "y", "z", "source_camera", "u", "v", "argmax"] + [f"p_{name}" for name in cloud.class_names]
    labels = cloud.labels
    with csv_path.open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(len(cloud)):
            x, y, z = cloud.positions[i]
            u, v = cloud.pixels[i]
            row = [_g9(x), _g9(y), _g9(z), str(cloud.source_camera[i]), _g9(u), _g9(v), str(int(labels[i]))]
            row += [_g9(p) for p in cloud.probs[i]]
            fh.write(",".join(row) + "\n")
    side = {
        "scan_id": cloud.scan_id,
        "class_names": list(cloud.class_names),
        "t_ref": cloud.t_ref,
        "counts": {k: cloud.counts.get(k, 0) for k in ("visible", "occluded", "out_of_view", "behind_camera")},
        "point_index": cloud.point_index.tolist(),
    }
    sidecar_path.write_text(json.dumps(side, indent=1) + "\n")


def read_cloud(csv_path: str | Path, sidecar_path: str | Path | None = None) -> SemanticPointCloud:
    csv_path = Path(csv_path)
    sidecar_path = Path(sidecar_path) if sidecar_path is not None else csv_path.with_suffix(".json")
    try:
        side = json.loads(sidecar_path.read_text())
        class_names = tuple(side["class_names"])
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise FormatError(f"{sidecar_path}: {exc}") from None
    with csv_path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["x", "y", "z", "source_camera", "u", "v", "argmax"] + [f"p_{c}" for c in class_names]
        if header != expected:
            raise FormatError(f"{csv_path}: header does not match sidecar class names")
        rows = list(reader)
    n = len(rows)
    try:
        pos = np.array([[float(r[0]), float(r[1]), float(r[2])] for r in rows]).reshape(n, 3)
        cams = np.array([r[3] for r in rows], dtype=object)
        px = np.array([[float(r[4]), float(r[5])] for r in rows]).reshape(n, 2)
        probs = np.array([[float(v) for v in r[7:]] for r in rows]).reshape(n, len(class_names))
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{csv_path}: {exc}") from None
    if n:
        # 9 significant digits on disk: restore exact normalisation
        probs = probs / probs.sum(axis=1, keepdims=True)
    point_index = side.get("point_index", list(range(n)))
    if len(point_index) != n:
        raise FormatError(f"{sidecar_path}: point_index length {len(point_index)} != {n} rows")
    return SemanticPointCloud(
        positions=pos,
        probs=probs,
        source_camera=cams,
        pixels=px,
        point_index=point_index,
        class_names=class_names,
        t_ref=float(side.get("t_ref", 0.0)),
        counts=dict(side.get("counts", {})),
        scan_id=str(side.get("scan_id", "0")),
    )
