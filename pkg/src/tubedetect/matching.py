"""Similarity evaluation, sliding-window template search, NMS and pose readout.

The similarity of a template at an image location is the mean over features
of the best |cos| orientation agreement within the spreading window
(fixed-point, so the response-map fast path and the naive double loop agree
to the last integer). Detections carry the matched template's silhouette as
their instance mask and, because each template's generating viewpoint is
known, a coarse 6D pose.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import (
    QuantizedOrientationImage,
    RESPONSE_SCALE,
    ResponseMaps,
    build_response_maps,
    compute_gradients,
    cos_fixed_table,
    quantize_orientations,
    spread_orientations,
    to_grayscale,
)
from .geometry import CameraIntrinsics, Template
from .rotation import quat_to_matrix

STAGE_ONE_FEATURES = 32  # features used for the exact-bound pruning pass


@dataclass
class PoseEstimate:
    rotation: np.ndarray  # unit quaternion (w, x, y, z), camera-from-body
    translation: np.ndarray  # meters, camera frame
    axis_direction: np.ndarray  # tube long axis in camera frame, unit norm


@dataclass
class Detection:
    image_id: str
    x: int
    y: int
    score: float
    template_id: int
    bbox: tuple[int, int, int, int]  # clipped (x0, y0, w, h) of the mask
    mask: np.ndarray | None = field(default=None, repr=False)
    pose: PoseEstimate | None = None

    @property
    def location(self) -> tuple[int, int]:
        return (self.x, self.y)


def _sort_key(d: Detection):
    return (-d.score, d.template_id, d.y, d.x)


def prepare_response_maps(
    image: np.ndarray,
    n0: int = 8,
    spread_radius: int = 2,
    magnitude_threshold: float = 40.0,
    channels: str = "gray",
) -> tuple[QuantizedOrientationImage, ResponseMaps]:
    """Quantized orientations and response planes for one test image."""
    img = to_grayscale(image) if channels == "gray" else np.asarray(image, dtype=np.float64)
    quant = quantize_orientations(compute_gradients(img), magnitude_threshold, n0)
    spread = spread_orientations(quant, spread_radius)
    return quant, build_response_maps(spread)


def similarity(t: Template, r: ResponseMaps, c: tuple[int, int]) -> float:
    """Template score in [0, 1] at anchor location c via the response planes.

    Features whose offset lands outside the image contribute 0.
    """
    h, w = r.planes.shape[1:]
    cx, cy = c
    px = cx + t.features[:, 0]
    py = cy + t.features[:, 1]
    ok = (px >= 0) & (px < w) & (py >= 0) & (py < h)
    total = int(r.planes[t.features[ok, 2], py[ok], px[ok]].sum(dtype=np.int64))
    return total / (RESPONSE_SCALE * len(t.features))


def similarity_naive(
    t: Template, q: QuantizedOrientationImage, spread_radius: int, c: tuple[int, int]
) -> float:
    """Unoptimized reference: explicit max over the (2T+1)^2 neighborhood of
    each feature, using the same fixed-point |cos| table as the fast path."""
    cf = cos_fixed_table(q.n0)
    h, w = q.bins.shape
    cx, cy = c
    total = 0
    for dx, dy, b in t.features:
        px, py = cx + int(dx), cy + int(dy)
        if not (0 <= px < w and 0 <= py < h):
            continue
        window = q.bins[
            max(py - spread_radius, 0) : min(py + spread_radius + 1, h),
            max(px - spread_radius, 0) : min(px + spread_radius + 1, w),
        ]
        present = window[window >= 0]
        if present.size:
            total += int(cf[(int(b) - present) % q.n0].max())
    return total / (RESPONSE_SCALE * len(t.features))


def match_templates(
    library: list[Template],
    image: np.ndarray,
    score_threshold: float = 0.80,
    stride: int = 2,
    *,
    n0: int = 8,
    spread_radius: int = 2,
    magnitude_threshold: float = 40.0,
    channels: str = "gray",
    image_id: str = "",
    response_maps: ResponseMaps | None = None,
) -> list[Detection]:
    """Evaluate every template at every stride-spaced anchor location.

    Returns detections with score >= score_threshold, sorted by descending
    score with (template_id, row-major location) tie-breaks. A two-stage
    scan prunes locations whose best attainable score is already below the
    threshold after a stratified subset of features, which cannot change the
    emitted set.
    """
    if not library:
        raise ValueError("empty template library")
    if stride <= 0 or stride > spread_radius:
        raise ValueError("stride must be in [1, spread_radius]")
    if response_maps is None:
        _, response_maps = prepare_response_maps(
            image, n0, spread_radius, magnitude_threshold, channels
        )
    planes = response_maps.planes
    n_bins, h, w = planes.shape

    pad = stride
    for t in library:
        pad = max(pad, int(np.abs(t.features[:, :2]).max()) + stride)
    pad = (pad // stride) * stride  # keep the padded grid phase-aligned
    padded = np.zeros((n_bins, h + 2 * pad, w + 2 * pad), dtype=np.uint8)
    padded[:, pad : pad + h, pad : pad + w] = planes

    ys = np.arange(0, h, stride)
    xs = np.arange(0, w, stride)
    # contiguous per-phase sub-grids: every strided slice of the padded
    # planes becomes a plain block view, which the accumulate loop reads at
    # memcpy speed instead of gathering with a stride
    sub = [
        [np.ascontiguousarray(padded[:, ry::stride, rx::stride]) for rx in range(stride)]
        for ry in range(stride)
    ]
    split_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    dets: list[Detection] = []

    for tid, t in enumerate(library):
        feats = t.features
        n = len(feats)
        thr_num = score_threshold * RESPONSE_SCALE * n - 1e-9
        if n not in split_cache:
            k1 = min(STAGE_ONE_FEATURES, n)
            first = np.unique(np.round(np.linspace(0, n - 1, k1)).astype(int))
            split_cache[n] = (first, np.setdiff1d(np.arange(n), first))
        first, rest = split_cache[n]

        acc = np.zeros((len(ys), len(xs)), dtype=np.uint16)  # stage-1 sums fit
        for dx, dy, b in feats[first]:
            qy, ry = divmod(pad + dy, stride)
            qx, rx = divmod(pad + dx, stride)
            np.add(
                acc,
                sub[ry][rx][b, qy : qy + len(ys), qx : qx + len(xs)],
                out=acc,
            )

        bound = acc.astype(np.float64) + len(rest) * RESPONSE_SCALE
        ai, aj = np.nonzero(bound >= thr_num)
        if ai.size == 0:
            continue
        ay = ys[ai]
        ax = xs[aj]
        total = acc[ai, aj].astype(np.int64)
        for dx, dy, b in feats[rest]:
            total += padded[b, ay + dy + pad, ax + dx + pad]

        scores = total / (RESPONSE_SCALE * n)
        hit = scores >= score_threshold
        for x, y, s in zip(ax[hit], ay[hit], scores[hit]):
            dets.append(
                Detection(
                    image_id=image_id,
                    x=int(x),
                    y=int(y),
                    score=float(s),
                    template_id=tid,
                    bbox=t.bbox_in_image(int(x), int(y), w, h),
                )
            )
    dets.sort(key=_sort_key)
    return dets


def bbox_iou(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> float:
    ax0, ay0, aw, ah = a
    bx0, by0, bw, bh = b
    ix = min(ax0 + aw, bx0 + bw) - max(ax0, bx0)
    iy = min(ay0 + ah, by0 + bh) - max(ay0, by0)
    inter = max(ix, 0) * max(iy, 0)
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def nms(dets: list[Detection], iou_threshold: float = 0.15) -> list[Detection]:
    """Greedy non-max suppression on mask bounding boxes.

    Keeps the highest-scoring detection and drops any detection whose bbox
    IoU with a kept one reaches the threshold; the survivors are pairwise
    below it. Input is re-sorted by the canonical (score, template, location)
    key, so equal-score ties resolve independently of input order.
    """
    ordered = sorted(dets, key=_sort_key)
    if not ordered:
        return []
    boxes = np.array([d.bbox for d in ordered], dtype=np.float64)
    x0, y0 = boxes[:, 0], boxes[:, 1]
    x1, y1 = boxes[:, 0] + boxes[:, 2], boxes[:, 1] + boxes[:, 3]
    areas = boxes[:, 2] * boxes[:, 3]

    keep: list[int] = []
    alive = np.arange(len(ordered))
    while alive.size:
        i = alive[0]
        keep.append(int(i))
        alive = alive[1:]
        ix = np.minimum(x1[i], x1[alive]) - np.maximum(x0[i], x0[alive])
        iy = np.minimum(y1[i], y1[alive]) - np.maximum(y0[i], y0[alive])
        inter = np.maximum(ix, 0.0) * np.maximum(iy, 0.0)
        union = areas[i] + areas[alive] - inter
        iou = np.where(union > 0, inter / np.maximum(union, 1e-12), 0.0)
        alive = alive[iou < iou_threshold]
    return [ordered[i] for i in keep]


def pose_from_template(
    d: Detection, k: CameraIntrinsics, library: list[Template]
) -> PoseEstimate:
    """Coarse 6D pose from the matched template's generating viewpoint.

    Rotation comes straight from the viewpoint; translation back-projects the
    detection location and scales the ray so the range equals the template's
    distance.
    """
    if not 0 <= d.template_id < len(library):
        raise ValueError("invalid template_id")
    vp = library[d.template_id].viewpoint
    ray = np.array([(d.x - k.cx) / k.fx, (d.y - k.cy) / k.fy, 1.0])
    translation = vp.distance * ray / np.linalg.norm(ray)
    rot = quat_to_matrix(vp.rotation)
    return PoseEstimate(
        rotation=vp.rotation.copy(),
        translation=translation,
        axis_direction=rot @ np.array([1.0, 0.0, 0.0]),
    )


def materialize_detections(
    dets: list[Detection],
    library: list[Template],
    image_shape: tuple[int, int],
    intrinsics: CameraIntrinsics | None = None,
) -> list[Detection]:
    """Fill instance masks (and poses, when intrinsics are given) in place."""
    h, w = image_shape
    for d in dets:
        t = library[d.template_id]
        d.mask = t.mask_in_image(d.x, d.y, w, h)
        if intrinsics is not None:
            d.pose = pose_from_template(d, intrinsics, library)
    return dets


def detect_image(
    library: list[Template],
    image: np.ndarray,
    *,
    score_threshold: float = 0.80,
    stride: int = 2,
    n0: int = 8,
    spread_radius: int = 2,
    magnitude_threshold: float = 40.0,
    nms_iou: float = 0.15,
    max_detections: int = 100,
    channels: str = "gray",
    image_id: str = "",
    intrinsics: CameraIntrinsics | None = None,
) -> list[Detection]:
    """Full per-image pipeline: match, suppress, cap, attach masks and poses."""
    raw = match_templates(
        library,
        image,
        score_threshold,
        stride,
        n0=n0,
        spread_radius=spread_radius,
        magnitude_threshold=magnitude_threshold,
        channels=channels,
        image_id=image_id,
    )
    kept = nms(raw, nms_iou)[:max_detections]
    h, w = np.asarray(image).shape[:2]
    return materialize_detections(kept, library, (h, w), intrinsics)
