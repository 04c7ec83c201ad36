/**
 * Global test setup: synthesize the small training/eval splits through the
 * primary detector's CLI if they are not already present.
 */

import { execFileSync } from "child_process";
import * as fs from "fs";
import * as path from "path";

const ROOT = path.resolve(__dirname, "..");
const OUT = path.join(ROOT, "out");

function synth(dir: string, spec: object, seed: number): void {
  if (fs.existsSync(path.join(dir, "annotations.json"))) return;
  fs.mkdirSync(dir, { recursive: true });
  const specPath = path.join(dir, "scenespec.json");
  fs.writeFileSync(specPath, JSON.stringify(spec));
  execFileSync(
    "python3",
    ["-m", "tubedetect.cli", "synth", "--spec", specPath, "--out-dir", dir, "--seed", String(seed)],
    { cwd: path.resolve(ROOT, ".."), stdio: "inherit" }
  );
}

export default function setup(): void {
  synth(
    path.join(OUT, "overfit"),
    {
      factors: {
        dust_coverage: [0.0, 0.2],
        terrain: ["plain"],
        distance_range: [[1.8, 2.2]],
        elevation_range: [[35.0, 50.0]],
      },
    },
    4000
  );
  // 2 x 1 x 1 x 1 grid gives 2 scenes; add 8 more seeded scenes for 10 total
  const overfit = path.join(OUT, "overfit");
  if (fs.readdirSync(overfit).filter((f) => f.endsWith(".png")).length < 10) {
    const extra = path.join(OUT, "overfit_extra");
    synth(
      extra,
      {
        factors: {
          dust_coverage: [0.0, 0.1, 0.25, 0.4],
          terrain: ["plain", "cfa_rocks"],
          distance_range: [[1.8, 2.2]],
          elevation_range: [[35.0, 50.0]],
        },
      },
      4100
    );
    const extraAnn = JSON.parse(fs.readFileSync(path.join(extra, "annotations.json"), "utf-8"));
    const mainAnn = JSON.parse(fs.readFileSync(path.join(overfit, "annotations.json"), "utf-8"));
    const idOffset = Math.max(...mainAnn.images.map((i: { id: number }) => i.id));
    const annOffset = Math.max(0, ...mainAnn.annotations.map((a: { id: number }) => a.id));
    for (const im of extraAnn.images) {
      fs.copyFileSync(path.join(extra, im.file_name), path.join(overfit, im.file_name));
      im.id += idOffset;
      mainAnn.images.push(im);
    }
    for (const ann of extraAnn.annotations) {
      ann.id += annOffset;
      ann.image_id += idOffset;
      mainAnn.annotations.push(ann);
    }
    fs.writeFileSync(path.join(overfit, "annotations.json"), JSON.stringify(mainAnn));
  }

  synth(
    path.join(OUT, "interop"),
    {
      factors: {
        dust_coverage: [0.0, 0.1, 0.2, 0.3, 0.4],
        terrain: ["plain", "cfa_rocks"],
        occluder_contact: [false, true],
        distance_range: [[1.7, 2.3]],
        elevation_range: [[32.0, 52.0]],
      },
    },
    5000
  );
}
