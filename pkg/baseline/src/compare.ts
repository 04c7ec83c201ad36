/**
 * Two-method comparison on an occlusion-heavy synthetic split: trains the
 * baseline (if needed), predicts, runs the template matcher through its CLI
 * on the same images, evaluates both with the shared evaluator, and writes
 * out/comparison.json with the two AP values.
 *
 * The template matcher is exercised strictly through its public CLI; all
 * data flows through the interchange files.
 */

import { execFileSync } from "child_process";
import * as fs from "fs";
import * as path from "path";

import { train, TrainSpecSchema } from "./train";
import { predict } from "./predict";

const ROOT = path.resolve(__dirname, "..");
const OUT = path.join(ROOT, "out");
const TRAIN_DIR = path.join(OUT, "train");
const EVAL_DIR = path.join(OUT, "eval");
const PRIMARY = ["-m", "tubedetect.cli"];

function py(args: string[], cwd?: string): string {
  return execFileSync("python3", [...PRIMARY, ...args], {
    cwd: cwd ?? path.resolve(ROOT, ".."),
    encoding: "utf-8",
  });
}

function synthSplit(dir: string, spec: object, seed: number): void {
  if (fs.existsSync(path.join(dir, "annotations.json"))) return;
  fs.mkdirSync(dir, { recursive: true });
  const specPath = path.join(dir, "scenespec.json");
  fs.writeFileSync(specPath, JSON.stringify(spec));
  py(["synth", "--spec", specPath, "--out-dir", dir, "--seed", String(seed)]);
}

async function main(): Promise<void> {
  // two disjoint synthetic splits; the eval one is occlusion-heavy
  synthSplit(
    TRAIN_DIR,
    {
      factors: {
        dust_coverage: [0.0, 0.15, 0.3, 0.45],
        terrain: ["plain", "cfa_rocks"],
        distance_range: [[1.7, 2.3]],
        elevation_range: [[32.0, 52.0]],
      },
    },
    9000
  );
  // repeat the grid at different seeds for more training data
  if (fs.readdirSync(TRAIN_DIR).filter((f) => f.endsWith(".png")).length < 16) {
    const extra = path.join(OUT, "train_extra");
    synthSplit(
      extra,
      {
        factors: {
          dust_coverage: [0.05, 0.2, 0.35, 0.5],
          terrain: ["plain", "cfa_rocks"],
          distance_range: [[1.7, 2.3]],
          elevation_range: [[32.0, 52.0]],
        },
      },
      9100
    );
    // merge extra split into the train dir
    const extraAnn = JSON.parse(fs.readFileSync(path.join(extra, "annotations.json"), "utf-8"));
    const mainAnn = JSON.parse(fs.readFileSync(path.join(TRAIN_DIR, "annotations.json"), "utf-8"));
    const idOffset = Math.max(...mainAnn.images.map((i: { id: number }) => i.id));
    const annOffset = Math.max(0, ...mainAnn.annotations.map((a: { id: number }) => a.id));
    for (const im of extraAnn.images) {
      fs.copyFileSync(path.join(extra, im.file_name), path.join(TRAIN_DIR, im.file_name));
      im.id += idOffset;
      mainAnn.images.push(im);
    }
    for (const ann of extraAnn.annotations) {
      ann.id += annOffset;
      ann.image_id += idOffset;
      mainAnn.annotations.push(ann);
    }
    fs.writeFileSync(path.join(TRAIN_DIR, "annotations.json"), JSON.stringify(mainAnn));
  }
  synthSplit(
    EVAL_DIR,
    {
      factors: {
        dust_coverage: [0.25, 0.3, 0.35, 0.4, 0.45],
        terrain: ["plain", "cfa_rocks"],
        distance_range: [[1.7, 2.3]],
        elevation_range: [[32.0, 52.0]],
        occluder_contact: [false, true],
      },
    },
    9500
  );

  const ckpt = path.join(OUT, "checkpoint");
  if (!fs.existsSync(path.join(ckpt, "meta.json"))) {
    const spec = TrainSpecSchema.parse({
      train_annotations: path.join(TRAIN_DIR, "annotations.json"),
      image_dir: TRAIN_DIR,
      checkpoint_dir: ckpt,
      epochs: 24,
      learning_rate: 3e-3,
      batch_size: 1,
      crop_size: 64,
      seed: 1,
    });
    console.log("training baseline ...");
    const result = await train(spec);
    console.log(`loss ${result.lossLog[0].toFixed(4)} -> ${result.lossLog.at(-1)!.toFixed(4)}`);
  }

  const predPath = path.join(OUT, "predictions.json");
  const n = await predict({
    checkpointDir: ckpt,
    imageDir: EVAL_DIR,
    outPath: predPath,
    scoreFloor: 0.5,
  });
  console.log(`baseline wrote ${n} detections`);

  // template matcher via its CLI on the same images
  const libCfg = path.join(OUT, "template_cfg.json");
  fs.writeFileSync(
    libCfg,
    JSON.stringify({
      elevation_band: [27.0, 90.0],
      meridian_band: 7.0,
      distance_range: [1.5, 2.5],
      distance_step: 0.1,
      target_template_count: 0,
    })
  );
  const lib = path.join(OUT, "library.tubt");
  if (!fs.existsSync(lib)) {
    console.log("generating template library ...");
    py(["gen-templates", "--config", libCfg, "--out", lib]);
  }
  const templateDets = path.join(OUT, "template_detections.json");
  if (!fs.existsSync(templateDets)) {
    console.log("running template matcher ...");
    py(["detect", "--config", libCfg, "--library", lib, "--images", EVAL_DIR, "--out", templateDets]);
  }

  py(["evaluate", "--detections", predPath, "--annotations", path.join(EVAL_DIR, "annotations.json"), "--out-dir", path.join(OUT, "eval_baseline")]);
  py(["evaluate", "--detections", templateDets, "--annotations", path.join(EVAL_DIR, "annotations.json"), "--out-dir", path.join(OUT, "eval_template")]);

  const apOf = (dir: string) =>
    JSON.parse(fs.readFileSync(path.join(OUT, dir, "report.json"), "utf-8"))["AP [.5]"];
  const comparison = {
    baseline_ap: apOf("eval_baseline"),
    template_ap: apOf("eval_template"),
    split: "occlusion-heavy synthetic (dust 0.25-0.45, contact occluders)",
    note: "directional check: learned baseline expected at or above the template matcher on heavy occlusion",
  };
  fs.writeFileSync(path.join(OUT, "comparison.json"), JSON.stringify(comparison, null, 1));
  console.log(JSON.stringify(comparison, null, 1));
}

main().catch((err) => {
  console.error(err.stack ?? String(err));
  process.exit(2);
});
