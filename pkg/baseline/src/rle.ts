/**
 * Column-major run-length codec for binary masks, wire-compatible with the
 * detector's interchange files: counts alternate background/foreground runs
 * starting with background (an all-foreground mask starts with a 0 count).
 */

export interface Rle {
  size: [number, number]; // [height, width]
  counts: number[];
}

/** Encode a row-major binary mask (h*w, values 0/1). */
export function encodeRle(mask: Uint8Array, height: number, width: number): Rle {
  if (mask.length !== height * width) {
    throw new Error("mask length does not match dimensions");
  }
  const counts: number[] = [];
  let current = 0;
  let run = 0;
  for (let x = 0; x < width; x++) {
    for (let y = 0; y < height; y++) {
      const v = mask[y * width + x] ? 1 : 0;
      if (v === current) {
        run += 1;
      } else {
        counts.push(run);
        current = v;
        run = 1;
      }
    }
  }
  counts.push(run);
  return { size: [height, width], counts };
}

/** Decode back to a row-major binary mask. */
export function decodeRle(rle: Rle): { mask: Uint8Array; height: number; width: number } {
  const [height, width] = rle.size;
  const total = rle.counts.reduce((a, b) => a + b, 0);
  if (total !== height * width) {
    throw new Error("corrupt RLE: run sum does not match the mask size");
  }
  const mask = new Uint8Array(height * width);
  let idx = 0;
  let value = 0;
  for (const count of rle.counts) {
    for (let i = 0; i < count; i++) {
      const y = idx % height;
      const x = Math.floor(idx / height);
      mask[y * width + x] = value;
      idx += 1;
    }
    value = value ? 0 : 1;
  }
  return { mask, height, width };
}
