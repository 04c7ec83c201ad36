/**
 * COCO-style annotation loading and seeded training-batch assembly.
 * Only the single "tube" category is expected; instance masks are unioned
 * into a binary segmentation target per image.
 */

import * as fs from "fs";
import * as path from "path";
import { z } from "zod";

import { GrayImage, preprocess } from "./preprocess";
import { loadPngGray } from "./png";
import { decodeRle } from "./rle";

const RleSchema = z.object({ size: z.tuple([z.number(), z.number()]), counts: z.array(z.number()) });

const AnnotationFileSchema = z.object({
  schema_version: z.literal("1"),
  images: z.array(
    z.object({ id: z.number(), file_name: z.string(), width: z.number(), height: z.number() })
  ),
  annotations: z.array(
    z.object({
      id: z.number(),
      image_id: z.number(),
      category_id: z.number(),
      segmentation: RleSchema,
      bbox: z.array(z.number()).length(4),
      area: z.number(),
    })
  ),
  categories: z.array(z.object({ id: z.number(), name: z.string() })),
});

export interface TrainSample {
  imageId: string;
  input: GrayImage; // preprocessed, [0, 1]
  target: Uint8Array; // row-major binary union of instance masks
}

export function categoryNames(annPath: string): string[] {
  const doc = AnnotationFileSchema.parse(JSON.parse(fs.readFileSync(annPath, "utf-8")));
  return doc.categories.map((c) => c.name);
}

export function loadTrainingSet(annPath: string, imageDir: string, boxKernel: number): TrainSample[] {
  const doc = AnnotationFileSchema.parse(JSON.parse(fs.readFileSync(annPath, "utf-8")));
  const byId = new Map(doc.images.map((im) => [im.id, im]));
  const targets = new Map<number, Uint8Array>();
  for (const ann of doc.annotations) {
    const im = byId.get(ann.image_id);
    if (!im) throw new Error(`annotation ${ann.id} references unknown image ${ann.image_id}`);
    const { mask } = decodeRle(ann.segmentation as { size: [number, number]; counts: number[] });
    let t = targets.get(ann.image_id);
    if (!t) {
      t = new Uint8Array(im.width * im.height);
      targets.set(ann.image_id, t);
    }
    for (let i = 0; i < mask.length; i++) if (mask[i]) t[i] = 1;
  }
  const samples: TrainSample[] = [];
  for (const im of doc.images) {
    const gray = loadPngGray(path.join(imageDir, im.file_name));
    samples.push({
      imageId: im.file_name.replace(/\.png$/, ""),
      input: preprocess(gray, boxKernel),
      target: targets.get(im.id) ?? new Uint8Array(im.width * im.height),
    });
  }
  return samples;
}

/** Deterministic 32-bit PRNG so the data order is reproducible per seed. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function shuffled<T>(items: T[], rand: () => number): T[] {
  const out = items.slice();
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [out[i], out[j]] = [out[j], out[i]];
  }
  return out;
}

export interface Crop {
  input: Float32Array;
  target: Float32Array;
  size: number;
}

/** Random square crop of a sample (biased to keep the tube in view). */
export function randomCrop(sample: TrainSample, size: number, rand: () => number): Crop {
  const { width, height } = sample.input;
  if (size > width || size > height) throw new Error("crop size exceeds image size");
  let x0 = Math.floor(rand() * (width - size + 1));
  let y0 = Math.floor(rand() * (height - size + 1));
  // with probability 1/2 center the crop on a random foreground pixel
  if (rand() < 0.5) {
    const fg: number[] = [];
    for (let i = 0; i < sample.target.length; i++) if (sample.target[i]) fg.push(i);
    if (fg.length > 0) {
      const pick = fg[Math.floor(rand() * fg.length)];
      const cy = Math.floor(pick / width);
      const cx = pick % width;
      x0 = Math.max(0, Math.min(width - size, cx - Math.floor(size / 2)));
      y0 = Math.max(0, Math.min(height - size, cy - Math.floor(size / 2)));
    }
  }
  const input = new Float32Array(size * size);
  const target = new Float32Array(size * size);
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      input[y * size + x] = sample.input.data[(y0 + y) * width + (x0 + x)];
      target[y * size + x] = sample.target[(y0 + y) * width + (x0 + x)];
    }
  }
  return { input, target, size };
}
