/**
 * Fine-tuning loop for the segmentation baseline: seeded data order, random
 * crops, sigmoid cross-entropy on the mask target, per-epoch loss log.
 */

import * as fs from "fs";
import * as path from "path";
import * as tf from "@tensorflow/tfjs";
import { z } from "zod";

import { loadTrainingSet, mulberry32, randomCrop, shuffled, TrainSample } from "./data";
import { buildModel, saveModel } from "./model";
import { preprocessChecksum } from "./preprocess";

export const TrainSpecSchema = z.object({
  train_annotations: z.string(),
  image_dir: z.string(),
  checkpoint_dir: z.string(),
  epochs: z.number().int().positive().default(30),
  learning_rate: z.number().positive().default(3e-3),
  batch_size: z.number().int().positive().default(1),
  crop_size: z.number().int().positive().default(64),
  box_filter_kernel: z.number().int().default(3),
  // tube pixels are a small minority of each crop; weighting them keeps the
  // mask loss from stalling at the background base rate
  foreground_weight: z.number().positive().default(4.0),
  seed: z.number().int().default(0),
});

export type TrainSpec = z.infer<typeof TrainSpecSchema>;

export interface TrainResult {
  lossLog: number[];
  dataOrderLog: string[][];
  checkpointDir: string;
}

export async function train(spec: TrainSpec): Promise<TrainResult> {
  const samples = loadTrainingSet(spec.train_annotations, spec.image_dir, spec.box_filter_kernel);
  if (samples.length === 0) throw new Error("no training samples");
  for (const s of samples) {
    if (s.input.width < spec.crop_size || s.input.height < spec.crop_size) {
      throw new Error("crop size must not exceed the image size");
    }
  }

  const model = buildModel(spec.seed + 7);
  const optimizer = tf.train.adam(spec.learning_rate);
  const rand = mulberry32(spec.seed + 1);

  const lossLog: number[] = [];
  const dataOrderLog: string[][] = [];

  for (let epoch = 0; epoch < spec.epochs; epoch++) {
    const order = shuffled(samples, rand);
    dataOrderLog.push(order.map((s) => s.imageId));
    let epochLoss = 0;
    let batches = 0;
    for (let i = 0; i < order.length; i += spec.batch_size) {
      const batch = order.slice(i, i + spec.batch_size);
      const crops = batch.map((s: TrainSample) => randomCrop(s, spec.crop_size, rand));
      const n = crops.length;
      const sz = spec.crop_size;
      const xData = new Float32Array(n * sz * sz);
      const yData = new Float32Array(n * sz * sz);
      crops.forEach((c, ci) => {
        xData.set(c.input, ci * sz * sz);
        yData.set(c.target, ci * sz * sz);
      });
      const x = tf.tensor4d(xData, [n, sz, sz, 1]);
      const y = tf.tensor4d(yData, [n, sz, sz, 1]);
      const weights = tf.add(tf.mul(y, spec.foreground_weight - 1), 1);
      const lossVal = optimizer.minimize(
        () => {
          const logits = model.apply(x, { training: true }) as tf.Tensor4D;
          return tf.losses.sigmoidCrossEntropy(y, logits, weights) as tf.Scalar;
        },
        true
      ) as tf.Scalar;
      epochLoss += (await lossVal.data())[0];
      batches += 1;
      tf.dispose([x, y, weights, lossVal]);
    }
    lossLog.push(epochLoss / batches);
  }

  await saveModel(model, spec.checkpoint_dir);
  const meta = {
    preprocess_checksum: preprocessChecksum(spec.box_filter_kernel),
    box_filter_kernel: spec.box_filter_kernel,
    crop_size: spec.crop_size,
    seed: spec.seed,
    epochs: spec.epochs,
    learning_rate: spec.learning_rate,
    loss_log: lossLog,
  };
  fs.writeFileSync(path.join(spec.checkpoint_dir, "meta.json"), JSON.stringify(meta, null, 1));
  fs.writeFileSync(
    path.join(spec.checkpoint_dir, "training_log.json"),
    JSON.stringify({ loss: lossLog, data_order: dataOrderLog }, null, 1)
  );
  model.dispose();
  optimizer.dispose();
  return { lossLog, dataOrderLog, checkpointDir: spec.checkpoint_dir };
}
