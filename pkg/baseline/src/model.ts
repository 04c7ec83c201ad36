/**
 * Small fully-convolutional segmentation network built from stock tf.layers
 * blocks, trained from scratch (no pretrained weights are reachable in this
 * environment). The final layer emits logits; prediction applies a sigmoid.
 */

import * as fs from "fs";
import * as path from "path";
import * as tf from "@tensorflow/tfjs";

export function buildModel(seed = 7): tf.LayersModel {
  // channel widths sized for the pure-JS training backend; the receptive
  // field after two pool stages covers a tube cross-section
  const conv = (filters: number, s: number) =>
    tf.layers.conv2d({
      filters,
      kernelSize: 3,
      padding: "same",
      activation: "relu",
      kernelInitializer: tf.initializers.glorotUniform({ seed: s }),
    });
  const model = tf.sequential();
  model.add(tf.layers.inputLayer({ inputShape: [null, null, 1] as unknown as number[] }));
  model.add(conv(4, seed));
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
  model.add(conv(8, seed + 1));
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
  model.add(conv(16, seed + 2));
  model.add(conv(16, seed + 3));
  model.add(tf.layers.upSampling2d({ size: [2, 2] }));
  model.add(conv(8, seed + 4));
  model.add(tf.layers.upSampling2d({ size: [2, 2] }));
  model.add(conv(4, seed + 5));
  model.add(
    tf.layers.conv2d({
      filters: 1,
      kernelSize: 1,
      padding: "same",
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 6 }),
    })
  );
  return model;
}

export async function saveModel(model: tf.LayersModel, dir: string): Promise<void> {
  fs.mkdirSync(dir, { recursive: true });
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      fs.writeFileSync(
        path.join(dir, "model.json"),
        JSON.stringify({
          modelTopology: artifacts.modelTopology,
          weightSpecs: artifacts.weightSpecs,
        })
      );
      const data = artifacts.weightData as ArrayBuffer;
      fs.writeFileSync(path.join(dir, "weights.bin"), Buffer.from(data));
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: "JSON" } };
    })
  );
}

export async function loadModel(dir: string): Promise<tf.LayersModel> {
  const doc = JSON.parse(fs.readFileSync(path.join(dir, "model.json"), "utf-8"));
  const weightData = fs.readFileSync(path.join(dir, "weights.bin"));
  return tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: doc.modelTopology,
      weightSpecs: doc.weightSpecs,
      weightData: weightData.buffer.slice(
        weightData.byteOffset,
        weightData.byteOffset + weightData.byteLength
      ),
    })
  );
}
