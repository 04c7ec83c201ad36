"""Detection metrics: mask IoU, greedy matching, 101-point interpolated AP,
AR over IoU 0.5:0.05:0.95, PR curves, and 6D pose error statistics.

Matching follows the MS COCO convention: detections are ranked by score,
each claims the unmatched ground-truth instance of highest IoU when that IoU
reaches the threshold, at most 100 detections per image count. AP with zero
ground truth and zero detections is reported as None ("not applicable"),
never silently 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matching import Detection
from .rotation import angle_between

RECALL_GRID = tuple(i / 100.0 for i in range(101))
AR_IOU_THRESHOLDS = tuple(0.5 + 0.05 * i for i in range(10))
MAX_DETECTIONS_PER_IMAGE = 100


@dataclass
class GtInstance:
    image_id: str
    mask: np.ndarray
    pose: "PoseLike | None" = None
    annotation_id: int = 0


@dataclass
class GroundTruthSet:
    images: list[tuple[str, int, int]]  # (image_id, width, height)
    instances: list[GtInstance]

    def __post_init__(self) -> None:
        sizes = {i[0]: (i[2], i[1]) for i in self.images}
        for inst in self.instances:
            if inst.image_id not in sizes:
                raise ValueError(f"instance references unknown image '{inst.image_id}'")
            if inst.mask.shape != sizes[inst.image_id]:
                raise ValueError("instance mask does not match its image size")


class PoseLike:
    """Anything with .rotation, .translation and .axis_direction attributes."""


@dataclass
class PoseErrorRecord:
    translation_error: float  # meters
    axis_error: float  # degrees in [0, 180]
    flip_aware_axis_error: float  # degrees in [0, 90]


@dataclass
class EvalReport:
    ap50: float | None
    ar_50_95: float | None
    pr_curves: dict[float, tuple[list[float], list[float]]]
    pose_errors: list[PoseErrorRecord]
    n_images: int
    n_ground_truth: int
    n_detections: int
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "AP [.5]": self.ap50,
            "AR [.5:.05:.95]": self.ar_50_95,
            "n_images": self.n_images,
            "n_ground_truth": self.n_ground_truth,
            "n_detections": self.n_detections,
            "pr_curves": {
                f"{t:.2f}": {"recall": list(r), "precision": list(p)}
                for t, (r, p) in self.pr_curves.items()
            },
            "pose_errors": [
                {
                    "translation_error_m": e.translation_error,
                    "axis_error_deg": e.axis_error,
                    "flip_aware_axis_error_deg": e.flip_aware_axis_error,
                }
                for e in self.pose_errors
            ],
            "notes": list(self.notes),
        }


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Pixel IoU of two binary masks of identical size; 0 when both empty."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError("mask dimension mismatch")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


def _ranked_detections(dets: list[Detection]) -> list[Detection]:
    """Global score ranking with intrinsic tie-breaks, capped per image."""
    ordered = sorted(dets, key=lambda d: (-d.score, d.image_id, d.y, d.x, d.template_id))
    seen: dict[str, int] = {}
    out = []
    for d in ordered:
        c = seen.get(d.image_id, 0)
        if c < MAX_DETECTIONS_PER_IMAGE:
            out.append(d)
            seen[d.image_id] = c + 1
    return out


class _MatchTables:
    """Per-image detection/GT IoU tables, computed once and reused across
    IoU thresholds."""

    def __init__(self, dets: list[Detection], gt: GroundTruthSet):
        self.ranked = _ranked_detections(dets)
        gt_by_image: dict[str, list[int]] = {}
        for gi, inst in enumerate(gt.instances):
            gt_by_image.setdefault(inst.image_id, []).append(gi)
        self.gt_index: dict[str, list[int]] = gt_by_image
        self.iou: list[np.ndarray] = []
        for d in self.ranked:
            if d.mask is None:
                raise ValueError("detection has no mask; materialize masks before evaluating")
            gis = gt_by_image.get(d.image_id, [])
            self.iou.append(
                np.array([mask_iou(d.mask, gt.instances[gi].mask) for gi in gis])
            )

    def labels(self, iou_threshold: float) -> list[bool]:
        matched: set[int] = set()
        out: list[bool] = []
        for d, ious in zip(self.ranked, self.iou):
            gis = self.gt_index.get(d.image_id, [])
            best_gi, best_iou = -1, -1.0
            for gi, iou in zip(gis, ious):
                if gi in matched:
                    continue
                if iou > best_iou:
                    best_gi, best_iou = gi, iou
            if best_gi >= 0 and best_iou >= iou_threshold:
                matched.add(best_gi)
                out.append(True)
            else:
                out.append(False)
        return out


def match_detections(
    dets: list[Detection], gt: GroundTruthSet, iou_threshold: float
) -> list[tuple[Detection, bool]]:
    """Greedy TP/FP labeling of score-ranked detections against ground truth."""
    tables = _MatchTables(dets, gt)
    return list(zip(tables.ranked, tables.labels(iou_threshold)))


def average_precision(labels: list[bool], n_gt: int) -> float | None:
    """101-point interpolated AP from a ranked TP/FP list.

    Returns None when there is no ground truth (undefined, reported as
    not-applicable rather than 0).
    """
    if n_gt < 0:
        raise ValueError("n_gt must be non-negative")
    if n_gt == 0:
        return None
    if not labels:
        return 0.0
    tp = np.cumsum(np.asarray(labels, dtype=np.float64))
    rank = np.arange(1, len(labels) + 1, dtype=np.float64)
    precision = tp / rank
    recall = tp / n_gt
    total = 0.0
    for r in RECALL_GRID:
        sel = precision[recall >= r]
        total += sel.max() if sel.size else 0.0
    return total / len(RECALL_GRID)


def pr_curve(
    dets: list[Detection], gt: GroundTruthSet, iou_threshold: float
) -> tuple[list[float], list[float]]:
    """Interpolated precision at the 101 recall points for one IoU threshold."""
    tables = _MatchTables(dets, gt)
    return _pr_from_labels(tables.labels(iou_threshold), len(gt.instances))


def _pr_from_labels(labels: list[bool], n_gt: int) -> tuple[list[float], list[float]]:
    recalls = list(RECALL_GRID)
    if n_gt == 0 or not labels:
        return recalls, [0.0] * len(recalls)
    tp = np.cumsum(np.asarray(labels, dtype=np.float64))
    rank = np.arange(1, len(labels) + 1, dtype=np.float64)
    precision = tp / rank
    recall = tp / n_gt
    interp = []
    for r in recalls:
        sel = precision[recall >= r]
        interp.append(float(sel.max()) if sel.size else 0.0)
    return recalls, interp


def average_recall(
    dets: list[Detection],
    gt: GroundTruthSet,
    iou_thresholds: tuple[float, ...] = AR_IOU_THRESHOLDS,
) -> float | None:
    """Mean recall over the IoU threshold sweep, None with no ground truth."""
    n_gt = len(gt.instances)
    if n_gt == 0:
        return None
    tables = _MatchTables(dets, gt)
    recalls = [sum(tables.labels(t)) / n_gt for t in iou_thresholds]
    return float(np.mean(recalls))


def pose_errors(
    dets: list[Detection], gt: GroundTruthSet, iou_gate: float = 0.5
) -> list[PoseErrorRecord]:
    """Pose error records for detections overlapping pose-annotated ground
    truth with IoU strictly above the gate.

    axis_error is the angle between estimated and true tube axes in [0, 180];
    the flip-aware variant folds the near-symmetric tube's 180-degree
    ambiguity, min(a, 180 - a).
    """
    pose_gis = [gi for gi, inst in enumerate(gt.instances) if inst.pose is not None]
    if not pose_gis:
        return []
    pose_set = set(pose_gis)
    tables = _MatchTables(dets, gt)
    matched: set[int] = set()
    out: list[PoseErrorRecord] = []
    for d, ious in zip(tables.ranked, tables.iou):
        if d.pose is None:
            continue
        gis = tables.gt_index.get(d.image_id, [])
        best_gi, best_iou = -1, -1.0
        for gi, iou in zip(gis, ious):
            if gi in matched or gi not in pose_set:
                continue
            if iou > best_iou:
                best_gi, best_iou = gi, iou
        if best_gi < 0 or best_iou <= iou_gate:
            continue
        matched.add(best_gi)
        gt_pose = gt.instances[best_gi].pose
        terr = float(np.linalg.norm(np.asarray(d.pose.translation) - np.asarray(gt_pose.translation)))
        aerr = angle_between(d.pose.axis_direction, gt_pose.axis_direction)
        out.append(
            PoseErrorRecord(
                translation_error=terr,
                axis_error=aerr,
                flip_aware_axis_error=min(aerr, 180.0 - aerr),
            )
        )
    return out


def evaluate(dets: list[Detection], gt: GroundTruthSet) -> EvalReport:
    """Full report: AP at IoU 0.5, AR over the threshold sweep, PR curves at
    every sweep threshold, and pose errors where ground-truth poses exist."""
    notes: list[str] = []
    n_gt = len(gt.instances)
    tables = _MatchTables(dets, gt)

    if n_gt == 0 and not tables.ranked:
        ap50 = None
        notes.append("AP/AR not applicable: no ground truth and no detections")
    elif n_gt == 0:
        ap50 = None
        notes.append("AP/AR not applicable: no ground truth")
    else:
        ap50 = average_precision(tables.labels(0.5), n_gt)

    ar = None
    if n_gt > 0:
        ar = float(np.mean([sum(tables.labels(t)) / n_gt for t in AR_IOU_THRESHOLDS]))

    curves = {t: _pr_from_labels(tables.labels(t), n_gt) for t in AR_IOU_THRESHOLDS}

    perr = pose_errors(dets, gt)
    if not perr and not any(i.pose is not None for i in gt.instances):
        notes.append("pose errors unavailable: no pose-annotated ground truth")

    return EvalReport(
        ap50=ap50,
        ar_50_95=ar,
        pr_curves=curves,
        pose_errors=perr,
        n_images=len(gt.images),
        n_ground_truth=n_gt,
        n_detections=len(tables.ranked),
        notes=notes,
    )
