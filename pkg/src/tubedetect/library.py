"""Template library persistence and batch generation.

File layout (little-endian throughout):

    header:
        magic            4 bytes  b"TUBT"
        format version   u32      currently 1
        n0               u32      orientation bin count
        spread radius T  u32
        fx, fy, cx, cy   f64 * 4  generating intrinsics
        width, height    u32 * 2
        template count   u32
    per template:
        quaternion wxyz  f64 * 4  camera-from-body
        distance         f64
        in-plane angle   f64      degrees
        anchor x, y      i32 * 2
        window offset    i32 * 2  silhouette window top-left minus anchor
        window h, w      u32 * 2
        run count        u32
        runs             u32 * n  column-major RLE, starts with background
        feature count    u32
        features         (i16 dx, i16 dy, u8 bin) * n
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .config import RunConfig
from .geometry import CameraIntrinsics, Template, TubeModel, Viewpoint, build_template, sample_viewpoints

MAGIC = b"TUBT"
FORMAT_VERSION = 1


def save_library(
    path: str | Path,
    templates: list[Template],
    n0: int,
    spread_radius: int,
    intrinsics: CameraIntrinsics,
) -> str:
    """Write the library; returns the sha256 digest (16 hex chars) of the file."""
    parts = [
        MAGIC,
        struct.pack(
            "<IIIddddIII",
            FORMAT_VERSION,
            n0,
            spread_radius,
            intrinsics.fx,
            intrinsics.fy,
            intrinsics.cx,
            intrinsics.cy,
            intrinsics.width,
            intrinsics.height,
            len(templates),
        ),
    ]
    for t in templates:
        vp = t.viewpoint
        parts.append(
            struct.pack(
                "<ddddddiiiiII",
                *[float(v) for v in vp.rotation],
                vp.distance,
                vp.in_plane_angle,
                t.anchor[0],
                t.anchor[1],
                t.silhouette_offset[0],
                t.silhouette_offset[1],
                t.silhouette.shape[0],
                t.silhouette.shape[1],
            )
        )
        runs = _mask_runs(t.silhouette)
        parts.append(struct.pack("<I", len(runs)))
        parts.append(np.asarray(runs, dtype="<u4").tobytes())
        parts.append(struct.pack("<I", t.feature_count))
        feat = np.zeros(t.feature_count, dtype=[("dx", "<i2"), ("dy", "<i2"), ("bin", "u1")])
        feat["dx"] = t.features[:, 0]
        feat["dy"] = t.features[:, 1]
        feat["bin"] = t.features[:, 2]
        parts.append(feat.tobytes())
    blob = b"".join(parts)
    Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()[:16]


def load_library(path: str | Path) -> tuple[list[Template], dict]:
    """Read a library file; returns (templates, metadata)."""
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise ValueError("not a template library file (bad magic)")
    off = 4
    (version, n0, spread, fx, fy, cx, cy, width, height, count) = struct.unpack_from(
        "<IIIddddIII", blob, off
    )
    off += struct.calcsize("<IIIddddIII")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported library format version {version}")
    intrinsics = CameraIntrinsics(fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height)

    templates: list[Template] = []
    for _ in range(count):
        vals = struct.unpack_from("<ddddddiiiiII", blob, off)
        off += struct.calcsize("<ddddddiiiiII")
        quat = np.array(vals[:4])
        distance, in_plane = vals[4], vals[5]
        anchor = (vals[6], vals[7])
        sil_off = (vals[8], vals[9])
        sh, sw = vals[10], vals[11]
        (n_runs,) = struct.unpack_from("<I", blob, off)
        off += 4
        runs = np.frombuffer(blob, dtype="<u4", count=n_runs, offset=off)
        off += 4 * n_runs
        sil = _runs_to_mask(runs, sh, sw)
        (n_feat,) = struct.unpack_from("<I", blob, off)
        off += 4
        feat = np.frombuffer(
            blob, dtype=[("dx", "<i2"), ("dy", "<i2"), ("bin", "u1")], count=n_feat, offset=off
        )
        off += 5 * n_feat
        features = np.stack(
            [feat["dx"].astype(np.int32), feat["dy"].astype(np.int32), feat["bin"].astype(np.int32)],
            axis=1,
        )
        templates.append(
            Template(
                features=features,
                anchor=anchor,
                viewpoint=Viewpoint(rotation=quat, distance=distance, in_plane_angle=in_plane),
                silhouette=sil,
                silhouette_offset=sil_off,
                feature_count=n_feat,
            )
        )
    meta = {
        "n0": n0,
        "spread_radius": spread,
        "intrinsics": intrinsics,
        "template_count": count,
        "digest": hashlib.sha256(blob).hexdigest()[:16],
    }
    return templates, meta


def _mask_runs(mask: np.ndarray) -> list[int]:
    flat = np.asarray(mask, dtype=bool).ravel(order="F")
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], changes, [flat.size]])
    counts = np.diff(bounds).tolist()
    if flat.size and flat[0]:
        counts = [0] + counts
    return [int(c) for c in counts]


def _runs_to_mask(runs: np.ndarray, h: int, w: int) -> np.ndarray:
    values = np.zeros(len(runs), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, runs)
    if flat.size != h * w:
        raise ValueError("corrupt silhouette runs in library file")
    return flat.reshape((h, w), order="F")


def build_library(config: RunConfig) -> tuple[list[Template], dict]:
    """Generate the template library described by a run configuration.

    Viewpoints are sampled, evenly thinned to the configured target count,
    and built one by one; viewpoints whose template is degenerate (too small
    or clipped at the configured distance) are substituted by the next
    unused viewpoint so the target count is met when possible.
    """
    model = TubeModel(length=config.tube_length, radius=config.tube_radius)
    k = config.camera_intrinsics()
    vps = sample_viewpoints(
        config.subdivision_level,
        tuple(config.elevation_band),
        config.in_plane_step,
        tuple(config.distance_range),
        config.distance_step,
        meridian_band=config.meridian_band,
    )
    target = config.target_template_count
    if target and target < len(vps):
        pick = np.unique(np.round(np.linspace(0, len(vps) - 1, target)).astype(int))
        chosen = set(pick.tolist())
        queue = [i for i in range(len(vps)) if i not in chosen]
        order = list(pick)
    else:
        order = list(range(len(vps)))
        queue = []

    templates: list[Template] = []
    skipped = 0
    qi = 0
    for idx in order:
        built = None
        j = idx
        while built is None:
            try:
                built = build_template(
                    model,
                    vps[j],
                    k,
                    config.max_features,
                    n0=config.n0,
                    spread_radius=config.spread_radius,
                    magnitude_threshold=config.magnitude_threshold,
                    min_features=config.min_features,
                )
            except ValueError:
                skipped += 1
                if qi >= len(queue):
                    built = False
                    break
                j = queue[qi]
                qi += 1
        if built:
            templates.append(built)
    stats = {
        "viewpoints": len(vps),
        "requested": len(order),
        "built": len(templates),
        "skipped": skipped,
    }
    return templates, stats
