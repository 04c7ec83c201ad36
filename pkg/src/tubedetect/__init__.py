"""Template-matching sample-tube detector, evaluator and scene generator."""

from .config import RunConfig
from .evaluation import (
    EvalReport,
    GroundTruthSet,
    GtInstance,
    average_precision,
    average_recall,
    evaluate,
    mask_iou,
    match_detections,
    pose_errors,
    pr_curve,
)
from .features import (
    GradientImage,
    QuantizedOrientationImage,
    ResponseMaps,
    SpreadOrientationImage,
    build_response_maps,
    compute_gradients,
    quantize_orientations,
    spread_orientations,
)
from .geometry import (
    CameraIntrinsics,
    Template,
    TubeModel,
    Viewpoint,
    build_template,
    extract_contour,
    icosphere_vertices,
    render_silhouette,
    sample_viewpoints,
)
from .matching import (
    Detection,
    PoseEstimate,
    detect_image,
    match_templates,
    nms,
    pose_from_template,
    similarity,
    similarity_naive,
)
from .synth import SceneSpec, TubePlacement, make_scene_spec, synth_scene

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics",
    "Detection",
    "EvalReport",
    "GradientImage",
    "GroundTruthSet",
    "GtInstance",
    "PoseEstimate",
    "QuantizedOrientationImage",
    "ResponseMaps",
    "RunConfig",
    "SceneSpec",
    "SpreadOrientationImage",
    "Template",
    "TubeModel",
    "TubePlacement",
    "Viewpoint",
    "average_precision",
    "average_recall",
    "build_response_maps",
    "build_template",
    "compute_gradients",
    "detect_image",
    "evaluate",
    "extract_contour",
    "icosphere_vertices",
    "mask_iou",
    "match_detections",
    "match_templates",
    "make_scene_spec",
    "nms",
    "pose_errors",
    "pose_from_template",
    "pr_curve",
    "quantize_orientations",
    "render_silhouette",
    "sample_viewpoints",
    "similarity",
    "similarity_naive",
    "spread_orientations",
    "synth_scene",
]
