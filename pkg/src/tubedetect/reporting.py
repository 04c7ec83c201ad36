"""Report files, PR-curve plots, detection overlays and debug map dumps."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from PIL import Image

from .evaluation import EvalReport
from .matching import Detection

POSE_HIST_BINS = 18  # presentation-only binning of raw pose error lists


def save_png(path: str | Path, image: np.ndarray) -> None:
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = np.clip(np.round(arr), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(str(path))


def load_png(path: str | Path) -> np.ndarray:
    return np.asarray(Image.open(str(path)))


def write_report(report: EvalReport, out_dir: str | Path, extra_meta: dict | None = None) -> None:
    """EvalReport as JSON + CSV, PR curves as TSV and SVG, pose error SVG."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    doc = report.to_dict()
    if extra_meta:
        doc["meta"] = extra_meta
    (out / "report.json").write_text(json.dumps(doc, indent=1))

    with open(out / "report.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["Method", "AP [.5]", "AR [.5:.05:.95]"])
        method = (extra_meta or {}).get("detector", "detector")
        ap = "n/a" if report.ap50 is None else f"{report.ap50:.3f}"
        ar = "n/a" if report.ar_50_95 is None else f"{report.ar_50_95:.3f}"
        writer.writerow([method, ap, ar])

    for thr, (recalls, precisions) in sorted(report.pr_curves.items()):
        lines = ["recall\tprecision"]
        lines += [f"{r:.2f}\t{p:.6f}" for r, p in zip(recalls, precisions)]
        (out / f"pr_iou_{thr:.2f}.tsv").write_text("\n".join(lines) + "\n")

    fig, ax = plt.subplots(figsize=(5, 4))
    for thr, (recalls, precisions) in sorted(report.pr_curves.items()):
        ax.plot(recalls, precisions, label=f"IoU {thr:.2f}")
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=7, ncol=2)
    ax.set_title("precision-recall")
    fig.tight_layout()
    fig.savefig(out / "pr_curves.svg")
    plt.close(fig)

    if report.pose_errors:
        raw = [e.axis_error for e in report.pose_errors]
        flip = [e.flip_aware_axis_error for e in report.pose_errors]
        trans = [e.translation_error for e in report.pose_errors]
        fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
        axes[0].hist(raw, bins=POSE_HIST_BINS)
        axes[0].set_title("axis error (deg)")
        axes[1].hist(flip, bins=POSE_HIST_BINS)
        axes[1].set_title("flip-aware axis error (deg)")
        axes[2].hist(trans, bins=POSE_HIST_BINS)
        axes[2].set_title("translation error (m)")
        fig.tight_layout()
        fig.savefig(out / "pose_errors.svg")
        plt.close(fig)


def _mask_outline(mask: np.ndarray) -> np.ndarray:
    padded = np.pad(mask, 1, constant_values=False)
    eroded = np.ones_like(mask)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            eroded &= padded[1 + dy : 1 + dy + mask.shape[0], 1 + dx : 1 + dx + mask.shape[1]]
    return mask & ~eroded


def overlay_detections(image: np.ndarray, dets: list[Detection]) -> np.ndarray:
    """Draw detection mask outlines (and anchor dots) on an RGB copy."""
    img = np.asarray(image)
    if img.ndim == 2:
        rgb = np.stack([img] * 3, axis=2).astype(np.uint8)
    else:
        rgb = img.astype(np.uint8).copy()
    h, w = rgb.shape[:2]
    for d in dets:
        if d.mask is None:
            continue
        mask = d.mask[:h, :w]
        if not mask.any():
            continue
        outline = _mask_outline(mask)
        rgb[outline] = (255, 40, 40)
        if 0 <= d.y < h and 0 <= d.x < w:
            rgb[max(d.y - 1, 0) : d.y + 2, max(d.x - 1, 0) : d.x + 2] = (40, 255, 60)
    return rgb


def dump_debug_maps(out_dir: str | Path, image_id: str, quant, spread) -> None:
    """Quantized bins and spread-bit popcounts as grayscale PNGs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n0 = quant.n0
    q = np.where(quant.bins >= 0, (quant.bins + 1) * (255 // (n0 + 1)), 0).astype(np.uint8)
    save_png(out / f"{image_id}_quantized.png", q)
    pop = np.zeros_like(spread.bits, dtype=np.uint8)
    for b in range(n0):
        pop += ((spread.bits >> b) & 1).astype(np.uint8)
    save_png(out / f"{image_id}_spread.png", (pop * (255 // n0)).astype(np.uint8))
