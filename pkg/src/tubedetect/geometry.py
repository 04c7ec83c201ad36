"""Tube geometry, viewpoint sampling, silhouette rendering and templates.

The tube is a procedurally generated capped cylinder whose long axis is the
body x-axis and whose origin is the centroid. Viewpoints come from the
vertices of a recursively subdivided icosahedron restricted to an elevation
band, crossed with in-plane rotations and distances. Silhouettes are
rasterized with a pure-numpy scanline/coverage test (pixel center inside a
projected triangle), which keeps re-renders bit-identical.

Camera convention: +z is the optical axis, +x right, +y down; a point
X_body maps to X_cam = R @ X_body + (0, 0, distance), and projects to
u = fx*x/z + cx, v = fy*y/z + cy with (u, v) measured at pixel centers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .features import compute_gradients, quantize_orientations
from .rotation import (
    look_at_rotation,
    matrix_to_quat,
    quat_normalize,
    quat_to_matrix,
)

# Directional light for template shading, fixed in the body frame so an
# in-plane camera rotation rotates the rendered image rigidly.
_LIGHT_BODY = np.array([0.35, 0.5, 0.8]) / np.linalg.norm([0.35, 0.5, 0.8])
_AMBIENT = 0.45
_TUBE_ALBEDO = 220.0
_BACKGROUND = 32.0


@dataclass
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass
class TubeModel:
    """Capped cylinder, long axis along body x, origin at the centroid."""

    length: float = 0.15
    radius: float = 0.015
    segments: int = 32
    vertices: np.ndarray = field(init=False, repr=False)
    triangles: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.length <= 0 or self.radius <= 0:
            raise ValueError("tube dimensions must be positive")
        self.vertices, self.triangles = tube_mesh(self.length, self.radius, self.segments)


def tube_mesh(length: float, radius: float, segments: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Watertight capped-cylinder triangle mesh along the x-axis."""
    half = length / 2.0
    ang = 2.0 * np.pi * np.arange(segments) / segments
    ring = np.stack([np.cos(ang), np.sin(ang)], axis=1) * radius  # (S, 2) in (y, z)

    verts = [np.array([-half, 0.0, 0.0]), np.array([half, 0.0, 0.0])]
    for x in (-half, half):
        for y, z in ring:
            verts.append(np.array([x, y, z]))
    verts = np.asarray(verts)

    left = 2 + np.arange(segments)
    right = 2 + segments + np.arange(segments)
    tris = []
    for i in range(segments):
        j = (i + 1) % segments
        tris.append([0, left[j], left[i]])  # left cap fan
        tris.append([1, right[i], right[j]])  # right cap fan
        tris.append([left[i], left[j], right[i]])  # side quad
        tris.append([left[j], right[j], right[i]])
    return verts, np.asarray(tris, dtype=np.int64)


@dataclass
class Viewpoint:
    """Camera-from-body rotation plus range and in-plane angle."""

    rotation: np.ndarray  # unit quaternion (w, x, y, z)
    distance: float
    in_plane_angle: float  # degrees in [0, 360)

    def __post_init__(self) -> None:
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        if abs(np.linalg.norm(self.rotation) - 1.0) > 1e-9:
            raise ValueError("viewpoint quaternion must be normalized")
        if self.distance <= 0:
            raise ValueError("viewpoint distance must be positive")
        self.in_plane_angle = float(self.in_plane_angle) % 360.0


@dataclass
class Template:
    """Sparse contour features from one rendered viewpoint.

    features rows are (dx, dy, orientation_bin) with offsets relative to the
    anchor (the rounded silhouette centroid in the render). The silhouette is
    stored as a tight window whose top-left corner sits at anchor +
    silhouette_offset.
    """

    features: np.ndarray  # (N, 3) int32
    anchor: tuple[int, int]  # (x, y) in the reference render
    viewpoint: Viewpoint
    silhouette: np.ndarray  # 2-D bool window
    silhouette_offset: tuple[int, int]  # window top-left relative to anchor (dx, dy)
    feature_count: int

    def mask_in_image(self, cx: int, cy: int, width: int, height: int) -> np.ndarray:
        """Silhouette translated so the anchor lands at (cx, cy), clipped."""
        out = np.zeros((height, width), dtype=bool)
        x0 = cx + self.silhouette_offset[0]
        y0 = cy + self.silhouette_offset[1]
        sh, sw = self.silhouette.shape
        ix0, iy0 = max(x0, 0), max(y0, 0)
        ix1, iy1 = min(x0 + sw, width), min(y0 + sh, height)
        if ix0 < ix1 and iy0 < iy1:
            out[iy0:iy1, ix0:ix1] = self.silhouette[iy0 - y0 : iy1 - y0, ix0 - x0 : ix1 - x0]
        return out

    def bbox_in_image(self, cx: int, cy: int, width: int, height: int) -> tuple[int, int, int, int]:
        """Clipped (x0, y0, w, h) of the translated silhouette window."""
        sh, sw = self.silhouette.shape
        x0 = max(cx + self.silhouette_offset[0], 0)
        y0 = max(cy + self.silhouette_offset[1], 0)
        x1 = min(cx + self.silhouette_offset[0] + sw, width)
        y1 = min(cy + self.silhouette_offset[1] + sh, height)
        return (x0, y0, max(x1 - x0, 0), max(y1 - y0, 0))


# ---------------------------------------------------------------------------
# viewpoint sampling


def icosphere_vertices(subdivision_level: int) -> np.ndarray:
    """Unit vertices of a recursively subdivided icosahedron.

    Vertex count is exactly 10 * 4**level + 2.
    """
    if not 0 <= subdivision_level <= 5:
        raise ValueError("subdivision level must be in [0, 5]")
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )

    verts_list = [v for v in verts]
    for _ in range(subdivision_level):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(i: int, j: int) -> int:
            key = (i, j) if i < j else (j, i)
            if key not in midpoint:
                m = verts_list[i] + verts_list[j]
                m /= np.linalg.norm(m)
                midpoint[key] = len(verts_list)
                verts_list.append(m)
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.asarray(new_faces, dtype=np.int64)
    return np.asarray(verts_list)


def sample_viewpoints(
    subdivision_level: int,
    elevation_band: tuple[float, float],
    in_plane_step: float,
    distance_range: tuple[float, float],
    distance_step: float,
    meridian_band: float | None = None,
) -> list[Viewpoint]:
    """Viewpoints from icosphere vertices in the elevation band, crossed with
    in-plane rotations and distances.

    Ordering is deterministic: (elevation, azimuth, in-plane angle,
    distance). meridian_band, when given, keeps only view directions within
    that angular distance (degrees) of the body x-z plane: for an object
    symmetric about its x-axis, a meridian arc of directions plus in-plane
    rotations already covers every appearance, which shrinks the library by
    an order of magnitude.
    """
    if in_plane_step <= 0 or in_plane_step > 360:
        raise ValueError("in-plane step must be in (0, 360]")
    if distance_step <= 0:
        raise ValueError("distance step must be positive")
    lo, hi = distance_range
    if lo > hi or lo <= 0:
        raise ValueError("invalid distance range")

    verts = icosphere_vertices(subdivision_level)
    elev = np.degrees(np.arcsin(np.clip(verts[:, 2], -1.0, 1.0)))
    azim = np.degrees(np.arctan2(verts[:, 1], verts[:, 0])) % 360.0

    keep = (elev >= elevation_band[0] - 1e-9) & (elev <= elevation_band[1] + 1e-9)
    if meridian_band is not None:
        keep &= np.abs(verts[:, 1]) <= math.sin(math.radians(meridian_band)) + 1e-12
    if not np.any(keep):
        raise ValueError("no viewpoints in the requested bands")

    order = np.lexsort((azim[keep], elev[keep]))
    directions = verts[keep][order]

    n_dist = int(math.floor((hi - lo) / distance_step + 1e-9)) + 1
    distances = lo + distance_step * np.arange(n_dist)
    in_planes = np.arange(0.0, 360.0, in_plane_step)

    out: list[Viewpoint] = []
    for v in directions:
        base = look_at_rotation(v, np.zeros(3), up=np.array([0.0, 0.0, 1.0]))
        for theta in in_planes:
            rad = math.radians(theta)
            rz = np.array(
                [
                    [math.cos(rad), -math.sin(rad), 0.0],
                    [math.sin(rad), math.cos(rad), 0.0],
                    [0.0, 0.0, 1.0],
                ]
            )
            q = quat_normalize(matrix_to_quat(rz @ base))
            for d in distances:
                out.append(Viewpoint(rotation=q, distance=float(d), in_plane_angle=float(theta)))
    return out


def view_direction(vp: Viewpoint) -> np.ndarray:
    """Unit direction from the body origin toward the camera, in body frame."""
    r = quat_to_matrix(vp.rotation)
    return -r.T @ np.array([0.0, 0.0, 1.0])


# ---------------------------------------------------------------------------
# rendering


def project_vertices(
    model: TubeModel, vp: Viewpoint, k: CameraIntrinsics
) -> tuple[np.ndarray, np.ndarray]:
    """Camera-frame vertices and their (u, v) pixel projections."""
    r = quat_to_matrix(vp.rotation)
    cam = model.vertices @ r.T
    cam[:, 2] += vp.distance
    if np.any(cam[:, 2] <= 0):
        raise ValueError("silhouette clipped: geometry behind the camera")
    uv = np.stack(
        [k.fx * cam[:, 0] / cam[:, 2] + k.cx, k.fy * cam[:, 1] / cam[:, 2] + k.cy], axis=1
    )
    return cam, uv


def _rasterize(
    uv: np.ndarray,
    triangles: np.ndarray,
    x0: int,
    y0: int,
    width: int,
    height: int,
    weights: np.ndarray | None = None,
    background: float = 0.0,
) -> np.ndarray:
    """Coverage rasterization over a pixel window with top-left (x0, y0).

    A pixel is covered when its center lies inside the projected triangle
    (boundary inclusive). With weights given, covered pixels take the
    triangle's weight (later triangles overwrite); otherwise a boolean
    coverage mask is returned.
    """
    if weights is None:
        out = np.zeros((height, width), dtype=bool)
    else:
        out = np.full((height, width), background, dtype=np.float64)

    for ti, (a, b, c) in enumerate(triangles):
        pa, pb, pc = uv[a], uv[b], uv[c]
        area = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0])
        if area == 0.0:
            continue
        xmin = max(int(math.ceil(min(pa[0], pb[0], pc[0]) - x0)), 0)
        xmax = min(int(math.floor(max(pa[0], pb[0], pc[0]) - x0)), width - 1)
        ymin = max(int(math.ceil(min(pa[1], pb[1], pc[1]) - y0)), 0)
        ymax = min(int(math.floor(max(pa[1], pb[1], pc[1]) - y0)), height - 1)
        if xmin > xmax or ymin > ymax:
            continue
        xs = x0 + np.arange(xmin, xmax + 1, dtype=np.float64)
        ys = y0 + np.arange(ymin, ymax + 1, dtype=np.float64)
        px, py = np.meshgrid(xs, ys)
        w0 = (pb[0] - pa[0]) * (py - pa[1]) - (pb[1] - pa[1]) * (px - pa[0])
        w1 = (pc[0] - pb[0]) * (py - pb[1]) - (pc[1] - pb[1]) * (px - pb[0])
        w2 = (pa[0] - pc[0]) * (py - pc[1]) - (pa[1] - pc[1]) * (px - pc[0])
        if area > 0:
            inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        else:
            inside = (w0 <= 0) & (w1 <= 0) & (w2 <= 0)
        if weights is None:
            out[ymin : ymax + 1, xmin : xmax + 1] |= inside
        else:
            block = out[ymin : ymax + 1, xmin : xmax + 1]
            block[inside] = weights[ti]
    return out


def render_silhouette(model: TubeModel, vp: Viewpoint, k: CameraIntrinsics) -> np.ndarray:
    """Full-frame binary silhouette of the tube under the viewpoint.

    Raises if any part of the tube projects outside the image.
    """
    _, uv = project_vertices(model, vp, k)
    if (
        uv[:, 0].min() < 0
        or uv[:, 0].max() > k.width - 1
        or uv[:, 1].min() < 0
        or uv[:, 1].max() > k.height - 1
    ):
        raise ValueError("silhouette clipped: tube projects outside the image")
    return _rasterize(uv, model.triangles, 0, 0, k.width, k.height)


def _shaded_window(
    model: TubeModel, vp: Viewpoint, k: CameraIntrinsics, x0: int, y0: int, width: int, height: int
) -> np.ndarray:
    """Flat-shaded Lambertian render of front-facing triangles into a window."""
    r = quat_to_matrix(vp.rotation)
    cam, uv = project_vertices(model, vp, k)
    tris = model.triangles
    va, vb, vc = cam[tris[:, 0]], cam[tris[:, 1]], cam[tris[:, 2]]
    normals = np.cross(vb - va, vc - va)
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    normals /= norms
    centers = (va + vb + vc) / 3.0
    front = np.einsum("ij,ij->i", normals, -centers) > 0

    light_cam = r @ _LIGHT_BODY
    lambert = np.clip(normals @ light_cam, 0.0, None)
    shade = _TUBE_ALBEDO * (_AMBIENT + (1.0 - _AMBIENT) * lambert)
    return _rasterize(
        uv, tris[front], x0, y0, width, height, weights=shade[front], background=_BACKGROUND
    )


def extract_contour(mask: np.ndarray) -> np.ndarray:
    """Contour pixels of a binary mask: the mask minus its 3x3 erosion.

    Returns an (N, 2) array of (y, x) in row-major order. Out-of-image
    neighbors count as background, so border pixels of the mask are contour.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("empty mask")
    padded = np.pad(mask, 1, constant_values=False)
    eroded = np.ones_like(mask)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            eroded &= padded[1 + dy : 1 + dy + mask.shape[0], 1 + dx : 1 + dx + mask.shape[1]]
    return np.argwhere(mask & ~eroded)


def build_template(
    model: TubeModel,
    vp: Viewpoint,
    k: CameraIntrinsics,
    max_features: int = 63,
    *,
    n0: int = 8,
    spread_radius: int = 2,
    magnitude_threshold: float = 40.0,
    min_features: int = 20,
) -> Template:
    """Render the tube, quantize contour gradients and subsample features.

    The render happens in a tight window (silhouette bbox plus a margin
    large enough for Sobel support, the 3x3 vote and spreading), which is
    pixel-identical to the full-frame render over that window. Features are
    contour pixels that carry a quantized bin, ordered by angle around the
    silhouette centroid and thinned evenly to at most max_features.
    """
    if max_features < min_features:
        raise ValueError("max_features must be at least min_features")
    _, uv = project_vertices(model, vp, k)
    if (
        uv[:, 0].min() < 0
        or uv[:, 0].max() > k.width - 1
        or uv[:, 1].min() < 0
        or uv[:, 1].max() > k.height - 1
    ):
        raise ValueError("silhouette clipped: tube projects outside the image")

    margin = spread_radius + 3
    wx0 = max(int(math.floor(uv[:, 0].min())) - margin, 0)
    wy0 = max(int(math.floor(uv[:, 1].min())) - margin, 0)
    wx1 = min(int(math.ceil(uv[:, 0].max())) + margin, k.width - 1)
    wy1 = min(int(math.ceil(uv[:, 1].max())) + margin, k.height - 1)
    ww, wh = wx1 - wx0 + 1, wy1 - wy0 + 1

    sil = _rasterize(uv, model.triangles, wx0, wy0, ww, wh)
    if not sil.any():
        raise ValueError("degenerate template: empty silhouette")
    shaded = _shaded_window(model, vp, k, wx0, wy0, ww, wh)
    quant = quantize_orientations(compute_gradients(shaded), magnitude_threshold, n0)

    contour = extract_contour(sil)
    bins = quant.bins[contour[:, 0], contour[:, 1]]
    strong = contour[bins >= 0]
    strong_bins = bins[bins >= 0]
    if len(strong) < min_features:
        raise ValueError("degenerate template: too few strong contour gradients")

    ys, xs = np.nonzero(sil)
    centroid_y, centroid_x = float(ys.mean()), float(xs.mean())
    dy = strong[:, 0] - centroid_y
    dx = strong[:, 1] - centroid_x
    angles = np.arctan2(dy, dx)
    order = np.lexsort((strong[:, 1], strong[:, 0], angles))
    strong = strong[order]
    strong_bins = strong_bins[order]
    # start the traversal at the farthest contour point so that the feature
    # subsample is equivariant under in-plane rotations of the render
    radii = (strong[:, 0] - centroid_y) ** 2 + (strong[:, 1] - centroid_x) ** 2
    start = int(np.argmax(radii))
    strong = np.roll(strong, -start, axis=0)
    strong_bins = np.roll(strong_bins, -start)

    n_take = min(max_features, len(strong))
    pick = np.unique(np.round(np.linspace(0, len(strong) - 1, n_take)).astype(int))
    sel = strong[pick]
    sel_bins = strong_bins[pick]

    anchor_x = int(round(centroid_x)) + wx0
    anchor_y = int(round(centroid_y)) + wy0
    feats = np.stack(
        [sel[:, 1] + wx0 - anchor_x, sel[:, 0] + wy0 - anchor_y, sel_bins], axis=1
    ).astype(np.int32)

    return Template(
        features=feats,
        anchor=(anchor_x, anchor_y),
        viewpoint=vp,
        silhouette=sil,
        silhouette_offset=(wx0 - anchor_x, wy0 - anchor_y),
        feature_count=len(feats),
    )
