/**
 * baseline train --spec <file>
 * baseline predict --ckpt <dir> --images <dir> --out <file> [--score-floor f]
 */

import * as fs from "fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { train, TrainSpecSchema } from "./train";
import { predict } from "./predict";

async function main(): Promise<number> {
  const argv = yargs(hideBin(process.argv))
    .command("train", "fine-tune the segmentation baseline", (y) =>
      y.option("spec", { type: "string", demandOption: true, describe: "TrainSpec JSON file" })
    )
    .command("predict", "run inference and write interchange detections", (y) =>
      y
        .option("ckpt", { type: "string", demandOption: true })
        .option("images", { type: "string", demandOption: true })
        .option("out", { type: "string", demandOption: true })
        .option("score-floor", { type: "number", default: 0.5 })
    )
    .demandCommand(1)
    .strict()
    .parseSync();

  const cmd = argv._[0];
  if (cmd === "train") {
    const spec = TrainSpecSchema.parse(JSON.parse(fs.readFileSync(argv.spec as string, "utf-8")));
    const result = await train(spec);
    const first = result.lossLog[0];
    const last = result.lossLog[result.lossLog.length - 1];
    console.log(
      `trained ${spec.epochs} epochs: loss ${first.toFixed(4)} -> ${last.toFixed(4)}; checkpoint at ${result.checkpointDir}`
    );
    return 0;
  }
  if (cmd === "predict") {
    const n = await predict({
      checkpointDir: argv.ckpt as string,
      imageDir: argv.images as string,
      outPath: argv.out as string,
      scoreFloor: argv["score-floor"] as number,
    });
    console.log(`wrote ${n} detections to ${argv.out}`);
    return 0;
  }
  console.error(`unknown command ${cmd}`);
  return 1;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(`error: ${err.message}`);
    process.exit(2);
  }
);
