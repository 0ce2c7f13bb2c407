"""Per-class recall / precision / F1 of fused clouds against hand labels.

Counts are pooled over scans before ratios are taken (micro-average).
Truth points missing from the cloud, whether dropped by occlusion, out of
view or unlabelled after merging, count as false negatives.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import FormatError, IncompleteSpec, UnknownClassInTruth
from .fusion import ClassMergeSpec, SemanticPointCloud, merge_classes

METHODS = ("direct", "motion", "motion_mask")
METHOD_TITLES = {
    "direct": "Direct Projection",
    "motion": "Projection + Motion Correction",
    "motion_mask": "Projection + Motion C + Mask",
}


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def f1_score(precision: float, recall: float) -> float:
    s = precision + recall
    return 2.0 * precision * recall / s if s > 0 else 0.0


@dataclass
class ClassCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> float:
        return f1_score(self.precision, self.recall)


@dataclass
class EvalReport:
    class_names: tuple[str, ...]
    counts: dict[str, ClassCounts]
    method: str = "motion_mask"
    evaluated: int = 0
    missing: int = 0
    metadata: dict = field(default_factory=lambda: {"averaging": "micro"})

    def rows(self) -> list[dict]:
        out = []
        for name in self.class_names:
            c = self.counts[name]
            out.append(
                {
                    "class": name,
                    "recall": c.recall,
                    "precision": c.precision,
                    "f1": c.f1,
                    "tp": c.tp,
                    "fp": c.fp,
                    "fn": c.fn,
                }
            )
        return out

    def f1(self, name: str) -> float:
        return self.counts[name].f1

    def present_classes(self) -> list[str]:
        """Classes with any truth or prediction support."""
        return [n for n in self.class_names if self.counts[n].tp + self.counts[n].fp + self.counts[n].fn > 0]

    def __add__(self, other: EvalReport) -> EvalReport:
        if self.class_names != other.class_names:
            raise ValueError("cannot pool reports over different class sets")
        counts = {
            n: ClassCounts(
                self.counts[n].tp + other.counts[n].tp,
                self.counts[n].fp + other.counts[n].fp,
                self.counts[n].fn + other.counts[n].fn,
            )
            for n in self.class_names
        }
        return EvalReport(
            self.class_names, counts, self.method, self.evaluated + other.evaluated, self.missing + other.missing,
            dict(self.metadata),
        )

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "metadata": self.metadata,
            "evaluated": self.evaluated,
            "missing": self.missing,
            "classes": self.rows(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> EvalReport:
        names = tuple(r["class"] for r in doc["classes"])
        counts = {r["class"]: ClassCounts(int(r["tp"]), int(r["fp"]), int(r["fn"])) for r in doc["classes"]}
        return cls(names, counts, doc.get("method", "motion_mask"), int(doc.get("evaluated", 0)),
                   int(doc.get("missing", 0)), dict(doc.get("metadata", {})))


def pool(reports: Iterable[EvalReport]) -> EvalReport:
    reports = list(reports)
    out = reports[0]
    for r in reports[1:]:
        out = out + r
    return out


def evaluate(
    cloud: SemanticPointCloud,
    truth: Mapping[int, int],
    merge: ClassMergeSpec | None = None,
    method: str = "motion_mask",
) -> EvalReport:
    """Compare argmax labels to ``truth`` (point index -> merged class id).

    If the cloud still carries source classes it is merged with ``merge``
    first; a cloud already in the merged class set is used as is.
    """
    if merge is not None and tuple(cloud.class_names) == tuple(merge.source_classes):
        cloud = merge_classes(cloud, merge)
    elif merge is not None and tuple(cloud.class_names) != tuple(merge.target_classes):
        raise IncompleteSpec("cloud classes match neither side of the merge spec")
    names = tuple(cloud.class_names)
    k = len(names)

    t_idx = np.fromiter(truth.keys(), dtype=np.int64, count=len(truth))
    t_cls = np.fromiter(truth.values(), dtype=np.int64, count=len(truth))
    bad = (t_cls < 0) | (t_cls >= k)
    if bad.any():
        raise UnknownClassInTruth(f"truth class ids {sorted(set(t_cls[bad].tolist()))} not in [0, {k})")

    pred = cloud.labels
    order = np.argsort(t_idx)
    t_idx, t_cls = t_idx[order], t_cls[order]
    pos = np.searchsorted(t_idx, cloud.point_index)
    pos_ok = pos < len(t_idx)
    matched = np.zeros(len(cloud), dtype=bool)
    matched[pos_ok] = t_idx[pos[pos_ok]] == cloud.point_index[pos_ok]
    p = pred[matched]
    g = t_cls[pos[matched]]

    seen = np.zeros(len(t_idx), dtype=bool)
    seen[pos[matched]] = True
    absent = t_cls[~seen]

    tp = np.bincount(g[p == g], minlength=k)
    fp = np.bincount(p[p != g], minlength=k)
    fn = np.bincount(g[p != g], minlength=k) + np.bincount(absent, minlength=k)
    counts = {names[i]: ClassCounts(int(tp[i]), int(fp[i]), int(fn[i])) for i in range(k)}
    return EvalReport(names, counts, method, evaluated=int(matched.sum()), missing=int(len(absent)))


def format_report(report: EvalReport) -> str:
    lines = [f"{METHOD_TITLES.get(report.method, report.method)}",
             f"{'Semantic class':<18}{'Recall':>9}{'Precision':>11}{'F1 Score':>10}"]
    for r in report.rows():
        lines.append(f"{r['class']:<18}{r['recall']:>9.3f}{r['precision']:>11.3f}{r['f1']:>10.3f}")
    return "\n".join(lines)


def format_ablation(reports: Mapping[str, EvalReport]) -> str:
    """Side-by-side table: one recall/precision/F1 block per method."""
    methods = [m for m in METHODS if m in reports] or list(reports)
    names = reports[methods[0]].class_names
    col = 32
    head1 = f"{'':<18}" + "".join(f"{METHOD_TITLES.get(m, m):>{col}}" for m in methods)
    head2 = f"{'Semantic class':<18}" + "".join(f"{'Recall':>10}{'Precision':>12}{'F1':>10}" for _ in methods)
    lines = [head1, head2]
    for n in names:
        row = f"{n:<18}"
        for m in methods:
            c = reports[m].counts[n]
            row += f"{c.recall:>10.3f}{c.precision:>12.3f}{c.f1:>10.3f}"
        lines.append(row)
    return "\n".join(lines)


def read_truth_csv(path: str | Path) -> dict[str, dict[int, int]]:
    """``scan_id,point_index,class_id`` -> {scan_id: {point_index: class_id}}."""
    path = Path(path)
    out: dict[str, dict[int, int]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["scan_id", "point_index", "class_id"]:
            raise FormatError(f"{path}: truth header must be scan_id,point_index,class_id")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                sid, idx, cls = row[0], int(row[1]), int(row[2])
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            out.setdefault(sid, {})[idx] = cls
    return out


def write_truth_csv(path: str | Path, truth: Mapping[str, Mapping[int, int]]) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write("scan_id,point_index,class_id\n")
        for sid, labels in truth.items():
            for idx in sorted(labels):
                fh.write(f"{sid},{idx},{labels[idx]}\n")


def write_report_json(path: str | Path, reports: Mapping[str, EvalReport] | EvalReport) -> None:
    if isinstance(reports, EvalReport):
        doc = reports.to_json()
    else:
        doc = {m: r.to_json() for m, r in reports.items()}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def ablation_run(
    scan,
    odometry,
    prob_images,
    calib,
    gaps,
    truth: Mapping[int, int],
    t_ref: float,
    merge: ClassMergeSpec | None = None,
    class_names=None,
    mode: str = "nearest",
) -> dict[str, EvalReport]:
    """Evaluate direct projection, +motion correction, +motion and masking.

    ``calib`` is ``(T_veh_l, cameras)``. The direct run still drops points
    behind a camera or outside its image.
    """
    from .fusion import SOURCE_CLASSES, default_merge_spec, fuse_scan
    from .motion import MotionCorrectionConfig, correct_scan

    t_veh_l, cameras = calib
    merge = merge if merge is not None else default_merge_spec()
    class_names = tuple(class_names) if class_names is not None else tuple(merge.source_classes or SOURCE_CLASSES)
    corrected = correct_scan(scan, odometry, MotionCorrectionConfig(t_ref, t_veh_l, mode))
    runs = {
        "direct": (scan, False),
        "motion": (corrected, False),
        "motion_mask": (corrected, True),
    }
    out = {}
    for method, (pts, masking) in runs.items():
        cloud = fuse_scan(pts, prob_images, cameras, gaps, class_names, t_ref=t_ref, masking=masking)
        out[method] = evaluate(cloud, truth, merge, method=method)
    return out
