"""Gradient orientation features for texture-less matching.

The pipeline is: Sobel gradients -> orientation quantization into n0 bins
over [0, 180) with a 3x3 dominant-bin vote -> orientation spreading into a
(2T+1)^2 neighborhood as per-pixel bitsets -> precomputed response planes
holding max |cos| against each template bin, in 8-bit fixed point.

All similarity arithmetic downstream is integer: response values are
round(|cos| * 255) and sums accumulate in int64, so the optimized matcher
and the naive reference can agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

RESPONSE_SCALE = 255  # fixed-point one


@dataclass
class GradientImage:
    """Per-pixel gradient orientation in degrees [0, 180) and magnitude."""

    orientation: np.ndarray
    magnitude: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.magnitude.shape


@dataclass
class QuantizedOrientationImage:
    """Per-pixel orientation bin in [0, n0), or -1 where no bin is assigned."""

    bins: np.ndarray
    n0: int


@dataclass
class SpreadOrientationImage:
    """Per-pixel bitset over orientation bins, spread over a window of half-width T."""

    bits: np.ndarray
    n0: int
    spread_radius: int


@dataclass
class ResponseMaps:
    """Per-bin planes of the best fixed-point |cos| response at every pixel.

    planes[b][y, x] = max over bins j present at (x, y) of round(255 * |cos|)
    of the bin-center angle difference between b and j; 0 where no bin is
    present.
    """

    planes: np.ndarray  # (n0, H, W) uint8
    n0: int


@lru_cache(maxsize=None)
def cos_fixed_table(n0: int) -> np.ndarray:
    """Fixed-point |cos| of k bin widths, k = 0..n0-1, as round(255*|cos|)."""
    k = np.arange(n0)
    vals = np.abs(np.cos(np.deg2rad(k * (180.0 / n0))))
    return np.round(vals * RESPONSE_SCALE).astype(np.int64)


def compute_gradients(image: np.ndarray) -> GradientImage:
    """3x3 Sobel gradients; for multi-channel input the channel with the
    largest magnitude wins per pixel.

    Orientation is folded into [0, 180): gradient direction sign is
    irrelevant under the |cos| similarity. Magnitude is the unnormalized
    Sobel magnitude (a step of h gray levels gives 4h on a straight edge).
    The outermost pixel ring has no full Sobel support and gets magnitude 0.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3:
        raise ValueError("expected a 2-D or 3-D (H, W, C) raster")
    h, w = img.shape[:2]
    if h < 3 or w < 3:
        raise ValueError("image must be at least 3x3")

    gx = np.zeros_like(img)
    gy = np.zeros_like(img)
    # 3x3 Sobel as shifted sums over the interior
    c = img
    gx[1:-1, 1:-1] = (
        (c[:-2, 2:] + 2.0 * c[1:-1, 2:] + c[2:, 2:])
        - (c[:-2, :-2] + 2.0 * c[1:-1, :-2] + c[2:, :-2])
    )
    gy[1:-1, 1:-1] = (
        (c[2:, :-2] + 2.0 * c[2:, 1:-1] + c[2:, 2:])
        - (c[:-2, :-2] + 2.0 * c[:-2, 1:-1] + c[:-2, 2:])
    )

    mag = np.hypot(gx, gy)
    best = np.argmax(mag, axis=2)
    iy, ix = np.indices((h, w))
    gx_sel = gx[iy, ix, best]
    gy_sel = gy[iy, ix, best]
    mag_sel = mag[iy, ix, best]

    ori = np.degrees(np.arctan2(gy_sel, gx_sel)) % 180.0
    ori[mag_sel == 0.0] = 0.0
    return GradientImage(orientation=ori, magnitude=mag_sel)


def quantize_orientations(
    g: GradientImage, magnitude_threshold: float, n0: int
) -> QuantizedOrientationImage:
    """Quantize orientations into n0 equal bins and stabilize with a 3x3
    dominant-bin vote.

    A pixel keeps a bin only if it is at or above the magnitude threshold and
    the most frequent bin among above-threshold pixels in its 3x3 window
    occurs at least twice; ties go to the pixel's own bin, else the lowest
    bin index. Isolated strong pixels are dropped.
    """
    if n0 < 2:
        raise ValueError("n0 must be at least 2")
    strong = g.magnitude >= magnitude_threshold
    base = np.floor(g.orientation / (180.0 / n0)).astype(np.int16)
    np.clip(base, 0, n0 - 1, out=base)
    base[~strong] = -1

    h, w = base.shape
    counts = np.zeros((n0, h, w), dtype=np.int16)
    for b in range(n0):
        m = (base == b).astype(np.int16)
        acc = counts[b]
        for dy in (-1, 0, 1):
            ys = slice(max(0, -dy), h - max(0, dy))
            yd = slice(max(0, dy), h - max(0, -dy))
            for dx in (-1, 0, 1):
                xs = slice(max(0, -dx), w - max(0, dx))
                xd = slice(max(0, dx), w - max(0, -dx))
                acc[yd, xd] += m[ys, xs]

    max_count = counts.max(axis=0)
    winner = counts.argmax(axis=0).astype(np.int16)  # lowest index on ties
    iy, ix = np.indices((h, w))
    own_count = np.where(base >= 0, counts[np.maximum(base, 0), iy, ix], 0)

    out = np.full_like(base, -1)
    voted = strong & (max_count >= 2)
    out[voted] = winner[voted]
    keep_own = voted & (own_count == max_count)
    out[keep_own] = base[keep_own]
    return QuantizedOrientationImage(bins=out, n0=n0)


def spread_orientations(q: QuantizedOrientationImage, spread_radius: int) -> SpreadOrientationImage:
    """Union of orientation bins over the (2T+1)x(2T+1) window around each
    pixel, realized as shifted bitwise ORs. T=0 degenerates to the pixel's
    own singleton bin."""
    if spread_radius < 0:
        raise ValueError("spread radius must be non-negative")
    t = spread_radius
    h, w = q.bins.shape
    own = np.zeros((h, w), dtype=np.uint32)
    assigned = q.bins >= 0
    own[assigned] = np.uint32(1) << q.bins[assigned].astype(np.uint32)

    bits = np.zeros_like(own)
    for dy in range(-t, t + 1):
        ys = slice(max(0, -dy), h - max(0, dy))
        yd = slice(max(0, dy), h - max(0, -dy))
        for dx in range(-t, t + 1):
            xs = slice(max(0, -dx), w - max(0, dx))
            xd = slice(max(0, dx), w - max(0, -dx))
            bits[yd, xd] |= own[ys, xs]
    return SpreadOrientationImage(bits=bits, n0=q.n0, spread_radius=t)


@lru_cache(maxsize=None)
def _response_lut(n0: int) -> np.ndarray:
    """(n0, 2^n0) lookup: best fixed-point |cos| response of every bitset
    against every template bin. Row 0 of each table (empty bitset) is 0."""
    codes = np.arange(1 << n0, dtype=np.uint32)
    present = ((codes[:, None] >> np.arange(n0)[None, :]) & 1).astype(bool)  # (codes, j)
    cf = cos_fixed_table(n0)
    lut = np.zeros((n0, 1 << n0), dtype=np.uint8)
    for b in range(n0):
        vals = cf[(b - np.arange(n0)) % n0]  # response of bin b to each present bin j
        scored = np.where(present, vals[None, :], -1)
        best = scored.max(axis=1)
        lut[b] = np.where(best < 0, 0, best).astype(np.uint8)
    return lut


def build_response_maps(s: SpreadOrientationImage) -> ResponseMaps:
    """Precompute the per-bin response planes from a spread image.

    Bitsets index an offline 2^n0-entry table per bin, so n0 must be at most
    8 for the index to fit one byte.
    """
    if s.n0 > 8:
        raise ValueError("bin count exceeds lookup width")
    lut = _response_lut(s.n0)
    planes = lut[:, s.bits]  # (n0, H, W)
    return ResponseMaps(planes=planes, n0=s.n0)


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma; no-op for single-channel input."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 1:
        return img[:, :, 0]
    if img.ndim == 3 and img.shape[2] == 3:
        return img[:, :, 0] * 0.299 + img[:, :, 1] * 0.587 + img[:, :, 2] * 0.114
    raise ValueError("expected a grayscale or RGB raster")
