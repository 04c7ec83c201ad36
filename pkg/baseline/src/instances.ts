/**
 * Instance extraction from the per-pixel probability map: threshold,
 * 4-connected components, mean-probability scores. Bounding boxes are kept
 * internally but the downstream consumer scores masks only.
 */

export interface Instance {
  mask: Uint8Array; // row-major h*w
  score: number;
  bbox: [number, number, number, number]; // x, y, w, h
  centroid: [number, number]; // x, y
}

export function extractInstances(
  prob: Float32Array,
  width: number,
  height: number,
  probThreshold = 0.5,
  minArea = 25,
  maxAreaFraction = 0.25
): Instance[] {
  const maxArea = maxAreaFraction * width * height;
  const labels = new Int32Array(width * height).fill(-1);
  const instances: Instance[] = [];
  const stack: number[] = [];
  let next = 0;
  for (let start = 0; start < prob.length; start++) {
    if (prob[start] < probThreshold || labels[start] >= 0) continue;
    const pixels: number[] = [];
    stack.push(start);
    labels[start] = next;
    while (stack.length) {
      const p = stack.pop()!;
      pixels.push(p);
      const y = Math.floor(p / width);
      const x = p % width;
      const neighbors = [
        x > 0 ? p - 1 : -1,
        x < width - 1 ? p + 1 : -1,
        y > 0 ? p - width : -1,
        y < height - 1 ? p + width : -1,
      ];
      for (const q of neighbors) {
        if (q >= 0 && labels[q] < 0 && prob[q] >= probThreshold) {
          labels[q] = next;
          stack.push(q);
        }
      }
    }
    next += 1;
    if (pixels.length < minArea || pixels.length > maxArea) continue;
    const mask = new Uint8Array(width * height);
    let sum = 0;
    let x0 = width, x1 = 0, y0 = height, y1 = 0;
    let cx = 0, cy = 0;
    for (const p of pixels) {
      mask[p] = 1;
      sum += prob[p];
      const y = Math.floor(p / width);
      const x = p % width;
      x0 = Math.min(x0, x);
      x1 = Math.max(x1, x);
      y0 = Math.min(y0, y);
      y1 = Math.max(y1, y);
      cx += x;
      cy += y;
    }
    instances.push({
      mask,
      score: sum / pixels.length,
      bbox: [x0, y0, x1 - x0 + 1, y1 - y0 + 1],
      centroid: [Math.round(cx / pixels.length), Math.round(cy / pixels.length)],
    });
  }
  instances.sort((a, b) => b.score - a.score);
  return instances.slice(0, 100);
}
