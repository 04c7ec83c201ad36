"""Run configuration: every tunable in one place, with a content digest
recorded in all outputs for provenance."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .geometry import CameraIntrinsics


@dataclass
class RunConfig:
    # orientation features
    n0: int = 8
    spread_radius: int = 2
    magnitude_threshold: float = 40.0
    # matching
    score_threshold: float = 0.80
    nms_iou: float = 0.15
    stride: int = 2
    max_detections: int = 100
    channels: str = "gray"
    # template generation
    max_features: int = 63
    min_features: int = 20
    subdivision_level: int = 3
    elevation_band: tuple[float, float] = (15.0, 75.0)
    meridian_band: float | None = None
    in_plane_step: float = 10.0
    distance_range: tuple[float, float] = (1.5, 3.0)
    distance_step: float = 0.1
    target_template_count: int = 7000
    # tube model
    tube_length: float = 0.15
    tube_radius: float = 0.015
    # camera
    fx: float = 2400.0
    fy: float = 2400.0
    cx: float = 127.5
    cy: float = 127.5
    image_width: int = 256
    image_height: int = 256
    # misc
    seed: int = 0
    jobs: int = 1

    def camera_intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(
            fx=self.fx, fy=self.fy, cx=self.cx, cy=self.cy,
            width=self.image_width, height=self.image_height,
        )

    def digest(self) -> str:
        doc = asdict(self)
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_overrides(self, overrides: dict) -> "RunConfig":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        doc = asdict(self)
        doc.update(overrides)
        return RunConfig(**_coerce(doc))

    @staticmethod
    def from_file(path: str | Path) -> "RunConfig":
        doc = json.loads(Path(path).read_text())
        return RunConfig().with_overrides(doc)


def _coerce(doc: dict) -> dict:
    # JSON round-trips tuples as lists
    for key in ("elevation_band", "distance_range"):
        if key in doc and doc[key] is not None:
            doc[key] = tuple(doc[key])
    return doc
