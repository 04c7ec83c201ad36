"""Batch command-line front end.

Subcommands: gen-templates, detect, evaluate, synth, overlay. Every command
is deterministic given its config and inputs, and outputs record the config
digest. Exit codes: 0 success, 1 usage error, 2 data error. The only
environment override is TUBEDETECT_OUT_DIR, which redirects output paths.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import shutil
import sys
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from . import dataset, library, reporting
from .config import RunConfig
from .evaluation import evaluate
from .matching import detect_image, prepare_response_maps
from .synth import SceneSpec, make_scene_spec, synth_scene

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _out_path(path: str | Path) -> Path:
    override = os.environ.get("TUBEDETECT_OUT_DIR")
    p = Path(path)
    if override:
        return Path(override) / p.name
    return p


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "jobs", None) is not None:
        overrides["jobs"] = args.jobs
    return cfg.with_overrides(overrides) if overrides else cfg


def _image_paths(spec: str) -> list[Path]:
    p = Path(spec)
    if p.is_dir():
        return sorted(p.glob("*.png"))
    if p.exists():
        return [p]
    raise FileNotFoundError(f"no such image or directory: {spec}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_templates(args) -> int:
    cfg = _load_config(args)
    templates, stats = library.build_library(cfg)
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    digest = library.save_library(out, templates, cfg.n0, cfg.spread_radius, cfg.camera_intrinsics())
    manifest = {
        "template_count": len(templates),
        "library_digest": digest,
        "config_digest": cfg.digest(),
        **stats,
    }
    manifest_path = out.with_suffix(out.suffix + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=1))
    print(f"wrote {len(templates)} templates to {out} (digest {digest})")
    return 0


_WORKER_STATE: dict = {}


def _detect_worker_init(library_path: str, cfg_doc: dict) -> None:
    templates, meta = library.load_library(library_path)
    _WORKER_STATE["templates"] = templates
    _WORKER_STATE["meta"] = meta
    _WORKER_STATE["cfg"] = RunConfig().with_overrides(cfg_doc)


def _detect_one(img_path_str: str) -> list:
    from dataclasses import asdict

    cfg: RunConfig = _WORKER_STATE["cfg"]
    templates = _WORKER_STATE["templates"]
    meta = _WORKER_STATE["meta"]
    img_path = Path(img_path_str)
    image = reporting.load_png(img_path)
    dets = detect_image(
        templates,
        image,
        score_threshold=cfg.score_threshold,
        stride=cfg.stride,
        n0=meta["n0"],
        spread_radius=meta["spread_radius"],
        magnitude_threshold=cfg.magnitude_threshold,
        nms_iou=cfg.nms_iou,
        max_detections=cfg.max_detections,
        channels=cfg.channels,
        image_id=img_path.stem,
        intrinsics=meta["intrinsics"],
    )
    return dets


def cmd_detect(args) -> int:
    from dataclasses import asdict

    cfg = _load_config(args)
    paths = _image_paths(args.images)
    cfg_doc = asdict(cfg)

    if cfg.jobs > 1:
        with Pool(cfg.jobs, initializer=_detect_worker_init, initargs=(args.library, cfg_doc)) as pool:
            per_image = pool.map(_detect_one, [str(p) for p in paths])
    else:
        _detect_worker_init(args.library, cfg_doc)
        per_image = [_detect_one(str(p)) for p in paths]

    if args.debug_maps:
        meta = _WORKER_STATE.get("meta")
        if meta is None:
            _detect_worker_init(args.library, cfg_doc)
            meta = _WORKER_STATE["meta"]
        for p in paths:
            image = reporting.load_png(p)
            quant, _ = prepare_response_maps(
                image, meta["n0"], meta["spread_radius"], cfg.magnitude_threshold, cfg.channels
            )
            from .features import spread_orientations

            spread = spread_orientations(quant, meta["spread_radius"])
            reporting.dump_debug_maps(args.debug_maps, p.stem, quant, spread)

    all_dets = [d for dets in per_image for d in dets]
    meta = _WORKER_STATE["meta"]
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset.write_detections(
        out,
        all_dets,
        detector="tube-template-matcher",
        config_digest=cfg.digest(),
        library_digest=meta["digest"],
    )
    print(f"wrote {len(all_dets)} detections for {len(paths)} images to {out}")
    return 0


def cmd_evaluate(args) -> int:
    gt = dataset.load_annotations(args.annotations)
    meta, dets = dataset.load_detections(args.detections)
    dataset.validate_detections_against(gt, dets)
    report = evaluate(dets, gt)
    out_dir = _out_path(args.out_dir)
    reporting.write_report(report, out_dir, extra_meta={"detector": meta["detector"], **meta})
    ap = "n/a" if report.ap50 is None else f"{report.ap50:.3f}"
    ar = "n/a" if report.ar_50_95 is None else f"{report.ar_50_95:.3f}"
    print(f"AP [.5] {ap}  AR [.5:.05:.95] {ar}  -> {out_dir}")
    return 0


def _expand_scene_specs(doc: dict, n_scenes: int, seed: int) -> list[SceneSpec]:
    base = dict(doc.get("base", {}))
    factors = doc.get("factors")
    specs = []
    if factors:
        keys = sorted(factors)
        for i, combo in enumerate(itertools.product(*[factors[k] for k in keys])):
            params = dict(base)
            params.update(dict(zip(keys, combo)))
            specs.append(make_scene_spec(seed=seed + i, **params))
    else:
        for i in range(n_scenes):
            specs.append(make_scene_spec(seed=seed + i, **base))
    return specs


def cmd_synth(args) -> int:
    out_dir = _out_path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = json.loads(Path(args.spec).read_text()) if args.spec else {}
    if "scenes" in doc:
        specs = [SceneSpec.from_dict(s) for s in doc["scenes"]]
    else:
        specs = _expand_scene_specs(doc, args.n, args.seed if args.seed is not None else 0)

    all_images = []
    all_instances = []
    for spec in specs:
        image, gt = synth_scene(spec)
        image_id = gt.images[0][0]
        reporting.save_png(out_dir / f"{image_id}.png", image)
        all_images.extend(gt.images)
        all_instances.extend(gt.instances)
    from .evaluation import GroundTruthSet

    dataset.write_annotations(out_dir / "annotations.json", GroundTruthSet(all_images, all_instances))
    print(f"wrote {len(specs)} scenes to {out_dir}")
    return 0


def cmd_overlay(args) -> int:
    _, dets = dataset.load_detections(args.detections)
    by_image: dict[str, list] = {}
    for d in dets:
        by_image.setdefault(d.image_id, []).append(d)
    out_dir = _out_path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    count = 0
    for p in _image_paths(args.images):
        image_dets = by_image.get(p.stem, [])
        if not image_dets:
            shutil.copyfile(p, out_dir / p.name)
            continue
        rgb = reporting.overlay_detections(reporting.load_png(p), image_dets)
        reporting.save_png(out_dir / p.name, rgb)
        count += 1
    print(f"overlaid detections on {count} images -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tubedetect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--seed", type=int, help="override config seed")
        p.add_argument("--jobs", type=int, help="worker processes")

    p = sub.add_parser("gen-templates", help="generate and save a template library")
    common(p)
    p.add_argument("--out", required=True, help="library output path (.tubt)")
    p.set_defaults(func=cmd_gen_templates)

    p = sub.add_parser("detect", help="run the matcher over images")
    common(p)
    p.add_argument("--library", required=True)
    p.add_argument("--images", required=True, help="PNG file or directory")
    p.add_argument("--out", required=True, help="detection JSON output")
    p.add_argument("--debug-maps", help="dump quantized/spread maps as PNGs here")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="score detections against annotations")
    common(p)
    p.add_argument("--detections", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="render synthetic depot scenes")
    common(p)
    p.add_argument("--spec", help="scene spec JSON (base/factors or explicit scenes)")
    p.add_argument("--n", type=int, default=1, help="number of seeded scenes without factors")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("overlay", help="draw detection outlines on images")
    common(p)
    p.add_argument("--detections", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_overlay)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (FileNotFoundError, dataset.DatasetError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
