"""Synthetic depot scenes: procedural terrain, tubes with cast shadows, dust
occlusion, and pixel-exact ground truth.

Scenes stand in for outdoor depot imagery at desk scale. A scene is a pure
function of its SceneSpec (terrain kind, tube placements, sun, camera,
seed): the same spec renders bit-identically. Ground-truth masks are the
rendered tube pixels that survive occlusion (dust, contact rocks), recorded
before the final Gaussian pixel noise so consistency checks stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .evaluation import GroundTruthSet, GtInstance
from .geometry import CameraIntrinsics, TubeModel, _rasterize
from .matching import PoseEstimate
from .rotation import look_at_rotation, matrix_to_quat

TERRAIN_KINDS = ("plain", "flagstone", "cfa_rocks", "ditch", "riverbed")

_TUBE_ALBEDO = 230.0
_TUBE_AMBIENT = 0.5
_SHADOW_FACTOR = 0.55


@dataclass
class TubePlacement:
    """Tube resting on the ground plane: center at (x, y, radius), yaw about
    world z, roll free about the long axis."""

    x: float
    y: float
    yaw_deg: float
    roll_deg: float = 0.0
    dust_coverage: float = 0.0
    occluder_contact: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.dust_coverage < 1.0:
            raise ValueError("dust coverage must be in [0, 1)")


@dataclass
class CameraPose:
    position: tuple[float, float, float]
    look_at: tuple[float, float, float]


@dataclass
class SceneSpec:
    tubes: list[TubePlacement]
    intrinsics: CameraIntrinsics
    camera: CameraPose
    terrain: str = "plain"
    rock_density: float = 0.0  # fraction of ground pixels covered by rocks
    sun_azimuth_deg: float = 135.0
    sun_elevation_deg: float = 50.0
    noise_sigma: float = 2.0  # gray levels, added last
    rng_seed: int = 0
    tube_length: float = 0.15
    tube_radius: float = 0.015

    def __post_init__(self) -> None:
        if self.terrain not in TERRAIN_KINDS:
            raise ValueError(f"unknown terrain '{self.terrain}'")
        if not 0.0 <= self.rock_density < 1.0:
            raise ValueError("rock density must be in [0, 1)")

    def to_dict(self) -> dict:
        k = self.intrinsics
        return {
            "terrain": self.terrain,
            "rock_density": self.rock_density,
            "sun_azimuth_deg": self.sun_azimuth_deg,
            "sun_elevation_deg": self.sun_elevation_deg,
            "noise_sigma": self.noise_sigma,
            "rng_seed": self.rng_seed,
            "tube_length": self.tube_length,
            "tube_radius": self.tube_radius,
            "intrinsics": {
                "fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy,
                "width": k.width, "height": k.height,
            },
            "camera": {"position": list(self.camera.position), "look_at": list(self.camera.look_at)},
            "tubes": [
                {
                    "x": t.x, "y": t.y, "yaw_deg": t.yaw_deg, "roll_deg": t.roll_deg,
                    "dust_coverage": t.dust_coverage, "occluder_contact": t.occluder_contact,
                }
                for t in self.tubes
            ],
        }

    @staticmethod
    def from_dict(d: dict) -> "SceneSpec":
        ki = d["intrinsics"]
        return SceneSpec(
            tubes=[TubePlacement(**t) for t in d["tubes"]],
            intrinsics=CameraIntrinsics(
                fx=ki["fx"], fy=ki["fy"], cx=ki["cx"], cy=ki["cy"],
                width=ki["width"], height=ki["height"],
            ),
            camera=CameraPose(tuple(d["camera"]["position"]), tuple(d["camera"]["look_at"])),
            terrain=d.get("terrain", "plain"),
            rock_density=d.get("rock_density", 0.0),
            sun_azimuth_deg=d.get("sun_azimuth_deg", 135.0),
            sun_elevation_deg=d.get("sun_elevation_deg", 50.0),
            noise_sigma=d.get("noise_sigma", 2.0),
            rng_seed=d.get("rng_seed", 0),
            tube_length=d.get("tube_length", 0.15),
            tube_radius=d.get("tube_radius", 0.015),
        )


# ---------------------------------------------------------------------------
# texture helpers


def _value_noise(rng: np.random.Generator, shape: tuple[int, int], cell: int, amp: float) -> np.ndarray:
    """Smooth value noise: coarse normal grid bilinearly upsampled."""
    gh = shape[0] // cell + 2
    gw = shape[1] // cell + 2
    coarse = rng.normal(0.0, 1.0, size=(gh, gw))
    fine = ndimage.zoom(coarse, cell, order=1)
    return amp * fine[: shape[0], : shape[1]]


def _sun_image_dir(spec: SceneSpec, r_cw: np.ndarray) -> np.ndarray:
    """Unit 2D image-space direction pointing toward the sun (for fake rock
    shading); falls back to +x when the sun is at the zenith."""
    az = math.radians(spec.sun_azimuth_deg)
    el = math.radians(spec.sun_elevation_deg)
    sun_world = np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])
    v = r_cw @ sun_world
    n = math.hypot(v[0], v[1])
    if n < 1e-9:
        return np.array([1.0, 0.0])
    return np.array([v[0] / n, v[1] / n])


def _draw_ellipse(
    img: np.ndarray,
    cx: float,
    cy: float,
    ra: float,
    rb: float,
    angle_rad: float,
    base: float,
    relief: float,
    light_dir: np.ndarray,
) -> np.ndarray:
    """Draw a shaded ellipse blob; returns its coverage mask."""
    h, w = img.shape
    x0 = max(int(cx - ra - rb) - 1, 0)
    x1 = min(int(cx + ra + rb) + 2, w)
    y0 = max(int(cy - ra - rb) - 1, 0)
    y1 = min(int(cy + ra + rb) + 2, h)
    cov = np.zeros((h, w), dtype=bool)
    if x0 >= x1 or y0 >= y1:
        return cov
    ys, xs = np.mgrid[y0:y1, x0:x1]
    dx = xs - cx
    dy = ys - cy
    ca, sa = math.cos(angle_rad), math.sin(angle_rad)
    u = (dx * ca + dy * sa) / ra
    v = (-dx * sa + dy * ca) / rb
    r2 = u * u + v * v
    inside = r2 <= 1.0
    nz = np.sqrt(np.clip(1.0 - r2, 0.0, 1.0))
    lam = np.clip(-(dx * light_dir[0] + dy * light_dir[1]) / max(ra, rb), -1.0, 1.0)
    shade = base + relief * (0.5 * nz + 0.5 * (-lam))
    img[y0:y1, x0:x1][inside] = shade[inside]
    cov[y0:y1, x0:x1] = inside
    return cov


def _terrain_image(spec: SceneSpec, rng: np.random.Generator, r_cw: np.ndarray) -> np.ndarray:
    h, w = spec.intrinsics.height, spec.intrinsics.width
    img = 85.0 + _value_noise(rng, (h, w), 16, 6.0) + _value_noise(rng, (h, w), 3, 2.0)
    light2d = _sun_image_dir(spec, r_cw)

    if spec.terrain == "flagstone":
        # fractured slabs: dark cracks along random chords
        img += _value_noise(rng, (h, w), 32, 5.0)
        for _ in range(14):
            p0 = rng.uniform(0, [w, h])
            ang = rng.uniform(0, 2 * math.pi)
            length = rng.uniform(0.3, 1.0) * max(h, w)
            t = np.linspace(0.0, 1.0, int(length * 2))
            xs = np.clip(p0[0] + t * length * math.cos(ang), 0, w - 1).astype(int)
            ys = np.clip(p0[1] + t * length * math.sin(ang), 0, h - 1).astype(int)
            for ox in (0, 1):
                for oy in (0, 1):
                    img[np.clip(ys + oy, 0, h - 1), np.clip(xs + ox, 0, w - 1)] = 55.0
    elif spec.terrain in ("ditch", "riverbed"):
        # smooth surface depression: a darker valley band across the frame
        ang = rng.uniform(0, math.pi)
        ys, xs = np.mgrid[0:h, 0:w]
        axis = (xs - w / 2) * math.cos(ang) + (ys - h / 2) * math.sin(ang)
        width = rng.uniform(0.15, 0.3) * max(h, w)
        img -= 25.0 * np.exp(-0.5 * (axis / width) ** 2)

    density = spec.rock_density
    if spec.terrain == "riverbed":
        density = max(density, 0.03)  # pebbles
    if spec.terrain == "cfa_rocks" and density == 0.0:
        density = 0.06  # CFA6-like default
    if density > 0.0:
        covered = np.zeros((h, w), dtype=bool)
        target = density * h * w
        for _ in range(2000):
            if covered.sum() >= target:
                break
            ra = rng.uniform(2.0, 9.0)
            rb = ra * rng.uniform(0.6, 1.0)
            cx = rng.uniform(0, w)
            cy = rng.uniform(0, h)
            ang = rng.uniform(0, math.pi)
            shadow_off = light2d * -(ra * 0.5)
            _draw_ellipse(img, cx + shadow_off[0], cy + shadow_off[1], ra, rb, ang, 55.0, 5.0, light2d)
            cov = _draw_ellipse(img, cx, cy, ra, rb, ang, 105.0, 55.0, light2d)
            covered |= cov
    return img


# ---------------------------------------------------------------------------
# geometry helpers


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns hull vertices counter-clockwise."""
    pts = np.unique(points, axis=0)
    if len(pts) <= 2:
        return pts
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def half(seq):
        out: list[np.ndarray] = []
        for p in seq:
            while len(out) >= 2:
                a = out[-1] - out[-2]
                b = p - out[-2]
                if a[0] * b[1] - a[1] * b[0] > 0:
                    break
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.asarray(lower[:-1] + upper[:-1])


def _fill_convex(shape: tuple[int, int], hull: np.ndarray) -> np.ndarray:
    """Pixel-center coverage of a convex CCW polygon."""
    h, w = shape
    mask = np.zeros(shape, dtype=bool)
    if len(hull) < 3:
        return mask
    x0 = max(int(math.floor(hull[:, 0].min())), 0)
    x1 = min(int(math.ceil(hull[:, 0].max())), w - 1)
    y0 = max(int(math.floor(hull[:, 1].min())), 0)
    y1 = min(int(math.ceil(hull[:, 1].max())), h - 1)
    if x0 > x1 or y0 > y1:
        return mask
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    inside = np.ones(ys.shape, dtype=bool)
    for i in range(len(hull)):
        a = hull[i]
        b = hull[(i + 1) % len(hull)]
        inside &= (b[0] - a[0]) * (ys - a[1]) - (b[1] - a[1]) * (xs - a[0]) >= 0
    mask[y0 : y1 + 1, x0 : x1 + 1] = inside
    return mask


def _segment_distance(p0, p1, q0, q1) -> float:
    """Min distance between two 2D segments."""

    def pt_seg(p, a, b):
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom == 0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
        return float(np.linalg.norm(p - (a + t * ab)))

    def ccw(a, b, c):
        return (c[1] - a[1]) * (b[0] - a[0]) > (b[1] - a[1]) * (c[0] - a[0])

    if (ccw(p0, q0, q1) != ccw(p1, q0, q1)) and (ccw(p0, p1, q0) != ccw(p0, p1, q1)):
        return 0.0
    return min(pt_seg(p0, q0, q1), pt_seg(p1, q0, q1), pt_seg(q0, p0, p1), pt_seg(q1, p0, p1))


def tube_world_transform(placement: TubePlacement, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Body-to-world rotation and translation for a resting tube."""
    yaw = math.radians(placement.yaw_deg)
    roll = math.radians(placement.roll_deg)
    rz = np.array(
        [[math.cos(yaw), -math.sin(yaw), 0.0], [math.sin(yaw), math.cos(yaw), 0.0], [0.0, 0.0, 1.0]]
    )
    rx = np.array(
        [[1.0, 0.0, 0.0], [0.0, math.cos(roll), -math.sin(roll)], [0.0, math.sin(roll), math.cos(roll)]]
    )
    return rz @ rx, np.array([placement.x, placement.y, radius])


def camera_world_rotation(camera: CameraPose) -> np.ndarray:
    """Camera-from-world rotation, +z optical axis, world z as up reference."""
    return look_at_rotation(
        np.asarray(camera.position, dtype=np.float64),
        np.asarray(camera.look_at, dtype=np.float64),
        up=np.array([0.0, 0.0, 1.0]),
    )


def tube_pose_in_camera(spec: SceneSpec, placement: TubePlacement) -> PoseEstimate:
    """Ground-truth camera-frame pose of a placed tube."""
    r_cw = camera_world_rotation(spec.camera)
    r_wb, p = tube_world_transform(placement, spec.tube_radius)
    r_cb = r_cw @ r_wb
    t_cb = r_cw @ (p - np.asarray(spec.camera.position, dtype=np.float64))
    return PoseEstimate(
        rotation=matrix_to_quat(r_cb),
        translation=t_cb,
        axis_direction=r_cb @ np.array([1.0, 0.0, 0.0]),
    )


# ---------------------------------------------------------------------------
# scene rendering


def synth_scene(spec: SceneSpec) -> tuple[np.ndarray, GroundTruthSet]:
    """Render one scene and its pixel-exact ground truth.

    Returns the 8-bit grayscale image and a single-image GroundTruthSet whose
    instances carry the visible tube masks and camera-frame poses.
    """
    k = spec.intrinsics
    h, w = k.height, k.width
    rng = np.random.default_rng(spec.rng_seed)
    model = TubeModel(length=spec.tube_length, radius=spec.tube_radius)

    # collisions: tubes live on the ground plane, keep their axes apart
    half = spec.tube_length / 2.0
    segs = []
    for t in spec.tubes:
        d = np.array([math.cos(math.radians(t.yaw_deg)), math.sin(math.radians(t.yaw_deg))])
        c = np.array([t.x, t.y])
        segs.append((c - half * d, c + half * d))
    for i in range(len(segs)):
        for j in range(i + 1, len(segs)):
            if _segment_distance(*segs[i], *segs[j]) < 2.0 * spec.tube_radius + 0.005:
                raise ValueError("tube collision")

    r_cw = camera_world_rotation(spec.camera)
    cam_pos = np.asarray(spec.camera.position, dtype=np.float64)
    img = _terrain_image(spec, rng, r_cw)
    light2d = _sun_image_dir(spec, r_cw)

    az = math.radians(spec.sun_azimuth_deg)
    el = math.radians(spec.sun_elevation_deg)
    sun_world = np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])

    def to_image(points_world: np.ndarray) -> np.ndarray:
        cam = (points_world - cam_pos) @ r_cw.T
        if np.any(cam[:, 2] <= 0):
            raise ValueError("geometry behind the camera")
        return np.stack(
            [k.fx * cam[:, 0] / cam[:, 2] + k.cx, k.fy * cam[:, 1] / cam[:, 2] + k.cy], axis=1
        )

    instances: list[GtInstance] = []
    image_id = f"scene_{spec.rng_seed:08d}"

    # cast shadows first so tubes overdraw their own shadow roots; the
    # penumbra blur keeps shadow outlines from reading as a second tube
    shadow_polys = []
    for t in spec.tubes:
        r_wb, p = tube_world_transform(t, spec.tube_radius)
        verts_w = model.vertices @ r_wb.T + p
        drop = verts_w[:, 2] / sun_world[2]
        ground = verts_w - np.outer(drop, sun_world)
        shadow_polys.append(_convex_hull(to_image(ground)))
    shade = np.ones((h, w), dtype=np.float64)
    for hull in shadow_polys:
        sh = _fill_convex((h, w), hull)
        shade[sh] = _SHADOW_FACTOR
    shade = ndimage.gaussian_filter(shade, sigma=1.8)
    img *= shade

    tube_layers = []
    for t in spec.tubes:
        r_wb, p = tube_world_transform(t, spec.tube_radius)
        verts_w = model.vertices @ r_wb.T + p
        cam = (verts_w - cam_pos) @ r_cw.T
        if np.any(cam[:, 2] <= 0):
            raise ValueError("geometry behind the camera")
        uv = np.stack(
            [k.fx * cam[:, 0] / cam[:, 2] + k.cx, k.fy * cam[:, 1] / cam[:, 2] + k.cy], axis=1
        )
        tris = model.triangles
        va, vb, vc = cam[tris[:, 0]], cam[tris[:, 1]], cam[tris[:, 2]]
        normals = np.cross(vb - va, vc - va)
        norms = np.linalg.norm(normals, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        normals /= norms
        centers = (va + vb + vc) / 3.0
        front = np.einsum("ij,ij->i", normals, -centers) > 0
        lam = np.clip(normals @ (r_cw @ sun_world), 0.0, None)
        shade = _TUBE_ALBEDO * (_TUBE_AMBIENT + (1.0 - _TUBE_AMBIENT) * lam)

        full = _rasterize(uv, tris, 0, 0, w, h)
        shaded = _rasterize(uv, tris[front], 0, 0, w, h, weights=shade[front], background=0.0)
        img[full] = shaded[full]
        tube_layers.append((t, full))

    # later overlays can hide earlier tubes too
    visible = [layer[1].copy() for layer in tube_layers]

    for ti, (t, full) in enumerate(tube_layers):
        if t.occluder_contact and full.any():
            contour = np.argwhere(full)
            cy, cx = contour[rng.integers(len(contour))]
            ra = rng.uniform(5.0, 9.0)
            rb = ra * rng.uniform(0.7, 1.0)
            cov = _draw_ellipse(img, float(cx), float(cy), ra, rb, rng.uniform(0, math.pi), 110.0, 55.0, light2d)
            for vmask in visible:
                vmask &= ~cov

        if t.dust_coverage > 0.0 and full.any():
            ang = rng.uniform(0, 2 * math.pi)
            u = np.array([math.cos(ang), math.sin(ang)])
            pix = np.argwhere(full)  # (y, x)
            proj = pix[:, 1] * u[0] + pix[:, 0] * u[1]
            extent = proj.max() - proj.min() + 1e-9
            jitter = _value_noise(rng, (h, w), 4, 1.0)[pix[:, 0], pix[:, 1]]
            score = (proj - proj.min()) / extent + 0.08 * jitter
            thr = np.quantile(score, 1.0 - t.dust_coverage)
            covered_idx = pix[score >= thr]
            cov = np.zeros((h, w), dtype=bool)
            cov[covered_idx[:, 0], covered_idx[:, 1]] = True
            spill = ndimage.binary_dilation(cov, iterations=2) & ~full
            sand_region = cov | spill
            sand = 170.0 + _value_noise(rng, (h, w), 4, 10.0)
            img[sand_region] = sand[sand_region]
            for vmask in visible:
                vmask &= ~cov

    for (t, _), vmask in zip(tube_layers, visible):
        instances.append(
            GtInstance(
                image_id=image_id,
                mask=vmask,
                pose=tube_pose_in_camera(spec, t),
                annotation_id=len(instances) + 1,
            )
        )

    if spec.noise_sigma > 0:
        img = img + rng.normal(0.0, spec.noise_sigma, size=img.shape)
    image = np.clip(np.round(img), 0, 255).astype(np.uint8)

    gt = GroundTruthSet(images=[(image_id, w, h)], instances=instances)
    return image, gt


# ---------------------------------------------------------------------------
# spec construction helpers


DEFAULT_INTRINSICS = CameraIntrinsics(fx=2400.0, fy=2400.0, cx=127.5, cy=127.5, width=256, height=256)


def make_scene_spec(
    seed: int,
    terrain: str = "plain",
    dust_coverage: float = 0.0,
    occluder_contact: bool = False,
    distance_range: tuple[float, float] = (1.55, 2.45),
    elevation_range: tuple[float, float] = (30.0, 55.0),
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS,
    rock_density: float = 0.0,
) -> SceneSpec:
    """Single-tube scene with a randomized but seed-determined layout.

    The camera orbits the tube at a range and elevation drawn from the given
    intervals, always looking at the tube, which keeps the tube centered and
    fully in frame.
    """
    rng = np.random.default_rng(seed * 2654435761 % (2**32) + 17)
    rng_range = rng.uniform(*distance_range)
    elev = math.radians(rng.uniform(*elevation_range))
    azim = rng.uniform(0.0, 2 * math.pi)
    tube = TubePlacement(
        x=0.0,
        y=0.0,
        yaw_deg=rng.uniform(0.0, 360.0),
        roll_deg=rng.uniform(0.0, 360.0),
        dust_coverage=dust_coverage,
        occluder_contact=occluder_contact,
    )
    cam_pos = (
        rng_range * math.cos(elev) * math.cos(azim),
        rng_range * math.cos(elev) * math.sin(azim),
        rng_range * math.sin(elev) + 0.015,
    )
    return SceneSpec(
        tubes=[tube],
        intrinsics=intrinsics,
        camera=CameraPose(position=cam_pos, look_at=(0.0, 0.0, 0.015)),
        terrain=terrain,
        rock_density=rock_density,
        sun_azimuth_deg=rng.uniform(0.0, 360.0),
        sun_elevation_deg=rng.uniform(40.0, 70.0),
        rng_seed=seed,
    )
