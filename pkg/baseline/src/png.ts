import * as fs from "fs";
import { PNG } from "pngjs";

import { GrayImage, toGrayscale } from "./preprocess";

/** Load a PNG and convert to grayscale [0, 255] floats. */
export function loadPngGray(path: string): GrayImage {
  const png = PNG.sync.read(fs.readFileSync(path));
  // pngjs always expands to RGBA
  return toGrayscale(new Uint8Array(png.data), png.width, png.height, 4);
}

export function savePngGray(path: string, img: GrayImage): void {
  const png = new PNG({ width: img.width, height: img.height });
  for (let i = 0; i < img.width * img.height; i++) {
    const v = Math.max(0, Math.min(255, Math.round(img.data[i])));
    png.data[i * 4] = v;
    png.data[i * 4 + 1] = v;
    png.data[i * 4 + 2] = v;
    png.data[i * 4 + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png));
}
