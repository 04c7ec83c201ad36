#!/usr/bin/env python3
"""Walk through template generation: icosphere viewpoints, silhouette
rendering, contour extraction and feature subsampling.

Writes a contact sheet of rendered templates to demos/out/.
"""

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from tubedetect import (
    CameraIntrinsics,
    TubeModel,
    build_template,
    icosphere_vertices,
    render_silhouette,
    sample_viewpoints,
)
from pathlib import Path

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

# --- viewpoint sampling -----------------------------------------------------
# Subdividing an icosahedron gives near-uniform view directions: 10*4^s + 2
# vertices at level s. Level 3 spaces adjacent directions ~8 degrees apart.
for level in range(4):
    print(f"icosphere level {level}: {len(icosphere_vertices(level))} vertices")

vps = sample_viewpoints(
    subdivision_level=3,
    elevation_band=(15.0, 75.0),
    in_plane_step=10.0,
    distance_range=(1.0, 3.0),
    distance_step=0.1,
    meridian_band=None,
)
print(f"default sampling grid: {len(vps)} viewpoints (before thinning)")

# --- render a handful of templates -------------------------------------------
model = TubeModel()  # 15 cm x 3 cm capped cylinder
k = CameraIntrinsics(fx=1200.0, fy=1200.0, cx=127.5, cy=127.5, width=256, height=256)
subset = sample_viewpoints(3, (20.0, 80.0), 45.0, (2.0, 2.0), 0.1, meridian_band=25.0)
picks = subset[:: max(1, len(subset) // 9)][:9]

fig, axes = plt.subplots(3, 3, figsize=(8, 8))
for ax, vp in zip(axes.ravel(), picks):
    t = build_template(model, vp, k)
    sil = render_silhouette(model, vp, k)
    ax.imshow(sil, cmap="gray")
    fx = [t.anchor[0] + f[0] for f in t.features]
    fy = [t.anchor[1] + f[1] for f in t.features]
    ax.scatter(fx, fy, s=4, c=t.features[:, 2], cmap="hsv", vmin=0, vmax=7)
    ax.set_title(f"d={vp.distance:.1f} m, {t.feature_count} features", fontsize=8)
    ax.axis("off")
fig.suptitle("templates: silhouettes with orientation-coded contour features")
fig.tight_layout()
fig.savefig(out / "templates.png", dpi=110)
print(f"wrote {out / 'templates.png'}")
