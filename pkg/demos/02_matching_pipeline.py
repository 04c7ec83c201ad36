#!/usr/bin/env python3
"""Show the matching internals on one synthetic scene: gradient quantization,
orientation spreading, response planes, and the similarity landscape of the
best template.
"""

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from pathlib import Path

from tubedetect import RunConfig, make_scene_spec, synth_scene
from tubedetect.features import spread_orientations
from tubedetect.library import build_library
from tubedetect.matching import detect_image, prepare_response_maps, similarity

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

cfg = RunConfig(
    elevation_band=(30.0, 90.0),
    meridian_band=8.0,
    distance_range=(1.9, 2.1),
    distance_step=0.1,
    in_plane_step=15.0,
    target_template_count=0,
)
print("building a small library ...")
templates, stats = build_library(cfg)
print(f"  {stats['built']} templates")

spec = make_scene_spec(seed=31, distance_range=(1.95, 2.05), elevation_range=(35.0, 50.0))
image, gt = synth_scene(spec)

quant, rmaps = prepare_response_maps(image)
spread = spread_orientations(quant, 2)

dets = detect_image(templates, image, image_id=gt.images[0][0], intrinsics=cfg.camera_intrinsics())
top = dets[0]
print(f"top detection: score {top.score:.3f} at ({top.x}, {top.y}), template {top.template_id}")

# similarity landscape of the winning template over the whole image
t = templates[top.template_id]
landscape = np.zeros((rmaps.planes.shape[1] // 4, rmaps.planes.shape[2] // 4))
for yi, y in enumerate(range(0, rmaps.planes.shape[1], 4)):
    for xi, x in enumerate(range(0, rmaps.planes.shape[2], 4)):
        landscape[yi, xi] = similarity(t, rmaps, (x, y))

fig, axes = plt.subplots(2, 3, figsize=(12, 7))
axes[0, 0].imshow(image, cmap="gray")
axes[0, 0].set_title("scene")
axes[0, 1].imshow(np.where(quant.bins >= 0, quant.bins, np.nan), cmap="hsv")
axes[0, 1].set_title("quantized orientations")
pop = sum(((spread.bits >> b) & 1) for b in range(8))
axes[0, 2].imshow(pop, cmap="viridis")
axes[0, 2].set_title("spread bin count")
axes[1, 0].imshow(rmaps.planes[0], cmap="magma")
axes[1, 0].set_title("response plane, bin 0")
axes[1, 1].imshow(landscape, cmap="magma")
axes[1, 1].set_title("similarity of best template")
over = np.stack([image] * 3, axis=2)
outline = top.mask & ~np.roll(top.mask, 1, axis=0)
over[top.mask] = (over[top.mask] * 0.6 + np.array([90, 20, 20])).astype(np.uint8)
axes[1, 2].imshow(over)
axes[1, 2].set_title(f"detection (score {top.score:.2f})")
for ax in axes.ravel():
    ax.axis("off")
fig.tight_layout()
fig.savefig(out / "matching_pipeline.png", dpi=110)
print(f"wrote {out / 'matching_pipeline.png'}")
