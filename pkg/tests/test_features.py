import numpy as np
import pytest

from tubedetect.features import (
    RESPONSE_SCALE,
    build_response_maps,
    compute_gradients,
    cos_fixed_table,
    quantize_orientations,
    spread_orientations,
    to_grayscale,
)


def quantize_oracle(g, threshold, n0):
    """Direct per-pixel 3x3 histogram vote."""
    h, w = g.magnitude.shape
    base = np.full((h, w), -1, dtype=int)
    for y in range(h):
        for x in range(w):
            if g.magnitude[y, x] >= threshold:
                base[y, x] = min(int(g.orientation[y, x] // (180.0 / n0)), n0 - 1)
    out = np.full((h, w), -1, dtype=int)
    for y in range(h):
        for x in range(w):
            if base[y, x] < 0:
                continue
            hist = np.zeros(n0, dtype=int)
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and base[yy, xx] >= 0:
                        hist[base[yy, xx]] += 1
            m = hist.max()
            if m < 2:
                continue
            if hist[base[y, x]] == m:
                out[y, x] = base[y, x]
            else:
                out[y, x] = int(np.argmax(hist))
    return out


class TestComputeGradients:
    def test_vertical_step_edge_is_zero_degrees(self):
        img = np.zeros((9, 9))
        img[:, 5:] = 200.0
        g = compute_gradients(img)
        col = g.orientation[1:-1, 4:6][g.magnitude[1:-1, 4:6] > 0]
        assert np.allclose(col, 0.0)
        assert g.magnitude[4, 4] > 0

    def test_horizontal_edge_is_ninety_degrees(self):
        img = np.zeros((9, 9))
        img[5:, :] = 200.0
        g = compute_gradients(img)
        mid = g.orientation[4:6, 1:-1][g.magnitude[4:6, 1:-1] > 0]
        assert np.allclose(mid, 90.0)

    def test_constant_image_has_zero_magnitude(self):
        g = compute_gradients(np.full((12, 12), 37.0))
        assert np.all(g.magnitude == 0)

    def test_max_magnitude_channel_wins(self):
        rgb = np.zeros((9, 9, 3))
        rgb[:, 5:, 1] = 150.0  # edge only in green
        g3 = compute_gradients(rgb)
        g1 = compute_gradients(rgb[:, :, 1])
        assert np.array_equal(g3.magnitude, g1.magnitude)
        assert np.array_equal(g3.orientation, g1.orientation)

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            compute_gradients(np.zeros((2, 5)))

    def test_orientation_range(self):
        rng = np.random.default_rng(3)
        g = compute_gradients(rng.uniform(0, 255, size=(24, 24)))
        assert np.all(g.orientation >= 0.0)
        assert np.all(g.orientation < 180.0)


class TestQuantizeOrientations:
    def test_bin_widths(self):
        for ori, expected in ((10.0, 0), (95.0, 4)):
            class G:
                orientation = np.full((3, 3), ori)
                magnitude = np.full((3, 3), 50.0)

            q = quantize_orientations(G(), 40.0, 8)
            assert q.bins[1, 1] == expected

    def test_dominant_vote_reassigns(self):
        class G:
            orientation = np.full((3, 3), 5.0 + 5 * 22.5)  # bin 5
            magnitude = np.full((3, 3), 50.0)

        G.orientation[1, 1] = 3 * 22.5 + 5.0  # center pixel bin 3
        q = quantize_orientations(G(), 40.0, 8)
        assert q.bins[1, 1] == 5

    def test_isolated_pixel_dropped(self):
        class G:
            orientation = np.zeros((5, 5))
            magnitude = np.zeros((5, 5))

        G.magnitude[2, 2] = 100.0
        q = quantize_orientations(G(), 40.0, 8)
        assert q.bins[2, 2] == -1

    def test_matches_histogram_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            img = rng.uniform(0, 255, size=(16, 16))
            g = compute_gradients(img)
            q = quantize_orientations(g, 40.0, 8)
            assert np.array_equal(q.bins, quantize_oracle(g, 40.0, 8))

    def test_contrast_inversion_invariance(self):
        # inversion is exact on integer-valued rasters (the operational
        # domain); float images can flip exact-boundary bins by one ulp
        rng = np.random.default_rng(5)
        img = np.round(rng.uniform(0, 255, size=(20, 20)))
        qa = quantize_orientations(compute_gradients(img), 40.0, 8)
        qb = quantize_orientations(compute_gradients(255.0 - img), 40.0, 8)
        assert np.array_equal(qa.bins, qb.bins)

    def test_partition_of_orientations(self):
        # every orientation in [0, 180) lands in exactly one bin
        n0 = 8
        oris = np.linspace(0.0, 180.0, 1441, endpoint=False)
        bins = np.floor(oris / (180.0 / n0)).astype(int)
        assert bins.min() == 0 and bins.max() == n0 - 1
        assert np.all(np.bincount(bins, minlength=n0) > 0)


class TestSpreadOrientations:
    def _quant(self, bins, n0=8):
        from tubedetect.features import QuantizedOrientationImage

        return QuantizedOrientationImage(bins=np.asarray(bins, dtype=np.int16), n0=n0)

    def test_single_pixel_spreads_to_block(self):
        bins = np.full((7, 7), -1)
        bins[3, 3] = 2
        s = spread_orientations(self._quant(bins), 1)
        expect = np.zeros((7, 7), dtype=np.uint32)
        expect[2:5, 2:5] = 1 << 2
        assert np.array_equal(s.bits, expect)

    def test_spread_zero_is_identity(self):
        rng = np.random.default_rng(8)
        bins = rng.integers(-1, 8, size=(10, 10))
        s = spread_orientations(self._quant(bins), 0)
        own = np.where(bins >= 0, np.left_shift(1, np.maximum(bins, 0)), 0)
        assert np.array_equal(s.bits, own.astype(np.uint32))

    def test_matches_window_union_oracle(self):
        rng = np.random.default_rng(21)
        bins = rng.integers(-1, 8, size=(18, 18))
        t = 4
        s = spread_orientations(self._quant(bins), t)
        h, w = bins.shape
        for y in range(h):
            for x in range(w):
                expect = 0
                for yy in range(max(0, y - t), min(h, y + t + 1)):
                    for xx in range(max(0, x - t), min(w, x + t + 1)):
                        if bins[yy, xx] >= 0:
                            expect |= 1 << int(bins[yy, xx])
                assert s.bits[y, x] == expect

    def test_spread_monotone_in_radius(self):
        rng = np.random.default_rng(2)
        bins = rng.integers(-1, 8, size=(16, 16))
        q = self._quant(bins)
        prev = spread_orientations(q, 0).bits
        for t in (1, 2, 3, 5):
            cur = spread_orientations(q, t).bits
            assert np.all(np.bitwise_and(prev, cur) == prev)  # subset
            prev = cur


class TestResponseMaps:
    def _spread(self, bits, n0=8, t=1):
        from tubedetect.features import SpreadOrientationImage

        return SpreadOrientationImage(bits=np.asarray(bits, dtype=np.uint32), n0=n0, spread_radius=t)

    def test_own_bin_gives_one(self):
        bits = np.zeros((3, 3), dtype=np.uint32)
        bits[1, 1] = 1 << 5
        r = build_response_maps(self._spread(bits))
        assert r.planes[5, 1, 1] == RESPONSE_SCALE

    def test_orthogonal_bin_gives_zero(self):
        bits = np.zeros((1, 1), dtype=np.uint32)
        bits[0, 0] = 1 << 6
        r = build_response_maps(self._spread(bits))
        assert r.planes[2, 0, 0] == 0  # |6 - 2| = 4 -> cos 90

    def test_empty_bitset_gives_zero(self):
        r = build_response_maps(self._spread(np.zeros((4, 4), dtype=np.uint32)))
        assert np.all(r.planes == 0)

    def test_n0_limit(self):
        with pytest.raises(ValueError, match="lookup width"):
            build_response_maps(self._spread(np.zeros((2, 2), dtype=np.uint32), n0=9))

    def test_matches_direct_max_cos(self):
        rng = np.random.default_rng(17)
        bits = rng.integers(0, 256, size=(12, 12)).astype(np.uint32)
        r = build_response_maps(self._spread(bits))
        cf = cos_fixed_table(8)
        for b in range(8):
            for y in range(12):
                for x in range(12):
                    present = [j for j in range(8) if bits[y, x] >> j & 1]
                    expect = max((cf[(b - j) % 8] for j in present), default=0)
                    assert r.planes[b, y, x] == expect

    def test_values_come_from_fixed_point_set(self):
        rng = np.random.default_rng(4)
        bits = rng.integers(0, 256, size=(20, 20)).astype(np.uint32)
        r = build_response_maps(self._spread(bits))
        allowed = set(int(v) for v in cos_fixed_table(8)) | {0}
        assert set(np.unique(r.planes)).issubset(allowed)


def test_to_grayscale_passthrough_and_luma():
    img = np.random.default_rng(0).uniform(0, 255, size=(6, 6))
    assert np.array_equal(to_grayscale(img), img)
    rgb = np.stack([img, img * 0, img * 0], axis=2)
    assert np.allclose(to_grayscale(rgb), img * 0.299)
