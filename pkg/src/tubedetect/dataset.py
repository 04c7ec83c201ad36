"""Interchange formats: COCO-style annotations, detection files, RLE masks.

Annotation files are COCO-compatible JSON (single "tube" category) with an
optional per-annotation pose extension under the "tube_pose" key, which
standard COCO readers ignore. Detection files are the shared currency
between any detector and the evaluator; both carry schema_version "1".
Masks travel as uncompressed column-major RLE, counts alternating
background/foreground starting with background.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .evaluation import GroundTruthSet, GtInstance
from .matching import Detection, PoseEstimate

SCHEMA_VERSION = "1"


class DatasetError(ValueError):
    """Base for interchange-format violations."""


class CorruptRleError(DatasetError):
    pass


class DanglingReferenceError(DatasetError):
    pass


class SchemaVersionError(DatasetError):
    pass


class MalformedSegmentationError(DatasetError):
    pass


# ---------------------------------------------------------------------------
# RLE codec


def rle_encode(mask: np.ndarray) -> dict:
    """Column-major RLE of a binary mask.

    counts alternate background/foreground runs starting with background, so
    an all-foreground mask starts with a 0 count.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    flat = mask.ravel(order="F")
    if flat.size == 0:
        return {"size": [int(h), int(w)], "counts": []}
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], changes, [flat.size]])
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts = [0] + counts
    return {"size": [int(h), int(w)], "counts": [int(c) for c in counts]}


def rle_decode(rle: dict, width: int, height: int) -> np.ndarray:
    """Inverse of rle_encode; validates the run sum against width*height."""
    if not isinstance(rle, dict) or "counts" not in rle:
        raise MalformedSegmentationError("segmentation is not an RLE object")
    counts = rle["counts"]
    if not isinstance(counts, list) or any(
        (not isinstance(c, int)) or c < 0 for c in counts
    ):
        raise MalformedSegmentationError("RLE counts must be non-negative integers")
    if sum(counts) != width * height:
        raise CorruptRleError("corrupt RLE: run sum does not match the mask size")
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    return flat.reshape((height, width), order="F")


# ---------------------------------------------------------------------------
# annotation files


def _pose_to_json(pose: PoseEstimate | None) -> dict | None:
    if pose is None:
        return None
    return {
        "rotation_wxyz": [float(v) for v in np.asarray(pose.rotation)],
        "translation": [float(v) for v in np.asarray(pose.translation)],
        "units": "meters",
    }


def _pose_from_json(obj: dict | None) -> PoseEstimate | None:
    if obj is None:
        return None
    from .rotation import quat_to_matrix

    rot = np.asarray(obj["rotation_wxyz"], dtype=np.float64)
    return PoseEstimate(
        rotation=rot,
        translation=np.asarray(obj["translation"], dtype=np.float64),
        axis_direction=quat_to_matrix(rot) @ np.array([1.0, 0.0, 0.0]),
    )


def mask_bbox(mask: np.ndarray) -> list[int]:
    ys, xs = np.nonzero(mask)
    if len(ys) == 0:
        return [0, 0, 0, 0]
    return [int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1)]


def write_annotations(path: str | Path, gt: GroundTruthSet) -> None:
    """COCO-style annotation file; image file names are '<image_id>.png'."""
    image_ids = {img[0]: i + 1 for i, img in enumerate(gt.images)}
    doc = {
        "schema_version": SCHEMA_VERSION,
        "images": [
            {"id": image_ids[i[0]], "file_name": f"{i[0]}.png", "width": int(i[1]), "height": int(i[2])}
            for i in gt.images
        ],
        "annotations": [],
        "categories": [{"id": 1, "name": "tube"}],
    }
    for n, inst in enumerate(gt.instances, start=1):
        ann = {
            "id": n,
            "image_id": image_ids[inst.image_id],
            "category_id": 1,
            "segmentation": rle_encode(inst.mask),
            "bbox": mask_bbox(inst.mask),
            "area": int(np.count_nonzero(inst.mask)),
        }
        pose = _pose_to_json(inst.pose)
        if pose is not None:
            ann["tube_pose"] = pose
        doc["annotations"].append(ann)
    Path(path).write_text(json.dumps(doc, indent=1))


def load_annotations(path: str | Path) -> GroundTruthSet:
    """Parse an annotation file back into a GroundTruthSet.

    Raises SchemaVersionError, DanglingReferenceError,
    MalformedSegmentationError or CorruptRleError for the respective
    violations.
    """
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"unknown schema version {doc.get('schema_version')!r}, expected {SCHEMA_VERSION!r}"
        )
    images = []
    by_id: dict[int, tuple[str, int, int]] = {}
    for img in doc.get("images", []):
        name = str(img["file_name"])
        stem = name[:-4] if name.endswith(".png") else name
        entry = (stem, int(img["width"]), int(img["height"]))
        if img["id"] in by_id:
            raise DanglingReferenceError(f"duplicate image id {img['id']}")
        by_id[int(img["id"])] = entry
        images.append(entry)

    instances = []
    seen_ann: set[int] = set()
    for ann in doc.get("annotations", []):
        if int(ann["id"]) in seen_ann:
            raise DanglingReferenceError(f"duplicate annotation id {ann['id']}")
        seen_ann.add(int(ann["id"]))
        if int(ann["image_id"]) not in by_id:
            raise DanglingReferenceError(f"dangling image_id {ann['image_id']}")
        image_id, w, h = by_id[int(ann["image_id"])]
        mask = rle_decode(ann.get("segmentation"), w, h)
        instances.append(
            GtInstance(
                image_id=image_id,
                mask=mask,
                pose=_pose_from_json(ann.get("tube_pose")),
                annotation_id=int(ann["id"]),
            )
        )
    return GroundTruthSet(images=images, instances=instances)


# ---------------------------------------------------------------------------
# detection files


def write_detections(
    path: str | Path,
    dets: list[Detection],
    detector: str = "tube-template-matcher",
    config_digest: str = "",
    library_digest: str = "",
) -> None:
    """Serialize finalized detections (masks required) to interchange JSON."""
    records = []
    for d in dets:
        if d.mask is None:
            raise DatasetError("detection has no mask; materialize before writing")
        records.append(
            {
                "image_id": d.image_id,
                "location": [int(d.x), int(d.y)],
                "score": float(d.score),
                "template_id": int(d.template_id),
                "bbox": [int(v) for v in d.bbox],
                "segmentation": rle_encode(d.mask),
                "pose": _pose_to_json(d.pose),
            }
        )
    doc = {
        "schema_version": SCHEMA_VERSION,
        "detector": detector,
        "config_digest": config_digest,
        "library_digest": library_digest,
        "detections": records,
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_detections(path: str | Path) -> tuple[dict, list[Detection]]:
    """Read a detection file; returns (header metadata, detections)."""
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"unknown schema version {doc.get('schema_version')!r}, expected {SCHEMA_VERSION!r}"
        )
    meta = {
        "detector": doc.get("detector", ""),
        "config_digest": doc.get("config_digest", ""),
        "library_digest": doc.get("library_digest", ""),
    }
    dets = []
    for rec in doc.get("detections", []):
        seg = rec.get("segmentation")
        if not isinstance(seg, dict) or "size" not in seg:
            raise MalformedSegmentationError("detection record lacks RLE segmentation")
        h, w = int(seg["size"][0]), int(seg["size"][1])
        mask = rle_decode(seg, w, h)
        dets.append(
            Detection(
                image_id=str(rec["image_id"]),
                x=int(rec["location"][0]),
                y=int(rec["location"][1]),
                score=float(rec["score"]),
                template_id=int(rec.get("template_id", -1)),
                bbox=tuple(int(v) for v in rec["bbox"]),
                mask=mask,
                pose=_pose_from_json(rec.get("pose")),
            )
        )
    return meta, dets


def validate_detections_against(gt: GroundTruthSet, dets: list[Detection]) -> None:
    """Every detection must reference an annotated image."""
    known = {i[0] for i in gt.images}
    for d in dets:
        if d.image_id not in known:
            raise DanglingReferenceError(f"detection references unknown image '{d.image_id}'")
