/**
 * Batch inference: preprocess with the exact training transform (checksum
 * enforced), run the network, extract instances, and emit detections in the
 * shared interchange schema (version "1") with column-major RLE masks and
 * no poses.
 */

import * as fs from "fs";
import * as path from "path";
import * as tf from "@tensorflow/tfjs";

import { loadModel } from "./model";
import { loadPngGray } from "./png";
import { preprocess, preprocessChecksum } from "./preprocess";
import { extractInstances } from "./instances";
import { encodeRle } from "./rle";

export interface PredictOptions {
  checkpointDir: string;
  imageDir: string;
  outPath: string;
  scoreFloor: number;
}

/** Inference runs fine on the wasm backend (forward kernels only). */
async function fastestBackend(): Promise<void> {
  try {
    require("@tensorflow/tfjs-backend-wasm");
    await tf.setBackend("wasm");
    await tf.ready();
  } catch {
    await tf.setBackend("cpu");
  }
}

export async function predict(opts: PredictOptions): Promise<number> {
  await fastestBackend();
  const meta = JSON.parse(fs.readFileSync(path.join(opts.checkpointDir, "meta.json"), "utf-8"));
  const expected = preprocessChecksum(meta.box_filter_kernel);
  if (expected !== meta.preprocess_checksum) {
    throw new Error(
      `preprocessing drift: checkpoint expects ${meta.preprocess_checksum}, current transform is ${expected}`
    );
  }
  const model = await loadModel(opts.checkpointDir);

  const files = fs
    .readdirSync(opts.imageDir)
    .filter((f) => f.endsWith(".png"))
    .sort();
  const records: object[] = [];
  for (const file of files) {
    const gray = loadPngGray(path.join(opts.imageDir, file));
    const pre = preprocess(gray, meta.box_filter_kernel);
    // pad to a multiple of 4 for the two pooling stages
    const ph = Math.ceil(pre.height / 4) * 4;
    const pw = Math.ceil(pre.width / 4) * 4;
    const padded = new Float32Array(ph * pw);
    for (let y = 0; y < pre.height; y++) {
      padded.set(pre.data.subarray(y * pre.width, (y + 1) * pre.width), y * pw);
    }
    const x = tf.tensor4d(padded, [1, ph, pw, 1]);
    const logits = model.predict(x) as tf.Tensor4D;
    const probT = tf.sigmoid(logits);
    const probPadded = (await probT.data()) as Float32Array;
    tf.dispose([x, logits, probT]);
    const prob = new Float32Array(pre.width * pre.height);
    for (let y = 0; y < pre.height; y++) {
      prob.set(probPadded.subarray(y * pw, y * pw + pre.width), y * pre.width);
    }
    for (const inst of extractInstances(prob, pre.width, pre.height)) {
      if (inst.score < opts.scoreFloor) continue;
      records.push({
        image_id: file.replace(/\.png$/, ""),
        location: inst.centroid,
        score: inst.score,
        bbox: inst.bbox,
        segmentation: encodeRle(inst.mask, pre.height, pre.width),
        pose: null,
      });
    }
  }
  const doc = {
    schema_version: "1",
    detector: "tube-baseline-cnn",
    config_digest: String(meta.preprocess_checksum),
    library_digest: "",
    detections: records,
  };
  fs.mkdirSync(path.dirname(opts.outPath), { recursive: true });
  fs.writeFileSync(opts.outPath, JSON.stringify(doc, null, 1));
  model.dispose();
  return records.length;
}
