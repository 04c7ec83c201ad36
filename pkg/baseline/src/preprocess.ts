/**
 * The one preprocessing pipeline shared verbatim by training and inference:
 * grayscale conversion (ITU-R 601 luma), 3x3 box filter, [0, 1] scaling.
 * A checksum over a fixed probe image pins the transform; the checkpoint
 * stores it and prediction refuses to run if it drifts.
 */

export interface GrayImage {
  data: Float32Array; // row-major, [0, 255]
  width: number;
  height: number;
}

export function toGrayscale(rgba: Uint8Array, width: number, height: number, channels: number): GrayImage {
  const out = new Float32Array(width * height);
  for (let i = 0; i < width * height; i++) {
    if (channels === 1) {
      out[i] = rgba[i];
    } else {
      const o = i * channels;
      out[i] = 0.299 * rgba[o] + 0.587 * rgba[o + 1] + 0.114 * rgba[o + 2];
    }
  }
  return { data: out, width, height };
}

/** Mean over the in-bounds part of the k x k window (k odd). */
export function boxFilter(img: GrayImage, kernel: number): GrayImage {
  if (kernel % 2 !== 1 || kernel < 1) {
    throw new Error("box filter kernel must be odd and positive");
  }
  const r = (kernel - 1) / 2;
  const { width, height, data } = img;
  const out = new Float32Array(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      let sum = 0;
      let n = 0;
      for (let dy = -r; dy <= r; dy++) {
        const yy = y + dy;
        if (yy < 0 || yy >= height) continue;
        for (let dx = -r; dx <= r; dx++) {
          const xx = x + dx;
          if (xx < 0 || xx >= width) continue;
          sum += data[yy * width + xx];
          n += 1;
        }
      }
      out[y * width + x] = sum / n;
    }
  }
  return { data: out, width, height };
}

/** Full transform: grayscale assumed done, box filter then scale to [0, 1]. */
export function preprocess(img: GrayImage, kernel: number): GrayImage {
  const filtered = boxFilter(img, kernel);
  const out = new Float32Array(filtered.data.length);
  for (let i = 0; i < out.length; i++) out[i] = filtered.data[i] / 255.0;
  return { data: out, width: img.width, height: img.height };
}

/** Deterministic 64x64 probe pattern (ramp plus two sinusoids). */
export function probeImage(): GrayImage {
  const w = 64;
  const h = 64;
  const data = new Float32Array(w * h);
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      data[y * w + x] =
        96 + x + 40 * Math.sin(x * 0.37) + 30 * Math.cos(y * 0.53 + 1.0) - y * 0.5;
    }
  }
  return { data, width: w, height: h };
}

/** FNV-1a over the transform of the probe, quantized to micro-units. */
export function preprocessChecksum(kernel: number): string {
  const t = preprocess(probeImage(), kernel);
  let hash = 0xcbf29ce484222325n;
  const prime = 0x100000001b3n;
  for (let i = 0; i < t.data.length; i++) {
    const q = BigInt(Math.round(t.data[i] * 1e6));
    hash ^= q & 0xffffffffffffffffn;
    hash = (hash * prime) & 0xffffffffffffffffn;
  }
  return hash.toString(16).padStart(16, "0");
}
