/** Train / export entry points.
 *
 *   node dist/cli.js train --config cfg.json --out ckpt.json [--steps N]
 *                          [--seed S] [--lr X] [--data DIR]
 *   node dist/cli.js export --checkpoint ckpt.json --input img.pgm --out DIR
 *
 * The config JSON carries the architecture (levels, base_channels, ...) plus
 * optional "weights" (one per exit) or "schedule" (a named preset such as
 * QF10); flags override steps/seed/lr.
 */
import { readFileSync, writeFileSync } from "node:fs";
import { parseArgs } from "node:util";

import { exportExits, loadPairs, syntheticPairs } from "./data";
import { WEIGHT_SCHEDULES, configFromJson, TOY_CONFIG } from "./network";
import { readPgm } from "./pgm";
import { exitGains, loadCheckpoint, saveCheckpoint, trainToy } from "./train";

function fail(message: string): never {
  console.error(`error: ${message}`);
  process.exit(2);
}

function cmdTrain(argv: string[]): void {
  const { values } = parseArgs({
    args: argv,
    options: {
      config: { type: "string" },
      out: { type: "string" },
      data: { type: "string" },
      steps: { type: "string" },
      seed: { type: "string", default: "0" },
      lr: { type: "string" },
      patches: { type: "string", default: "8" },
    },
  });
  if (!values.out) fail("--out is required");
  const doc = values.config
    ? (JSON.parse(readFileSync(values.config, "utf8")) as Record<string, unknown>)
    : {};
  const cfg = values.config ? configFromJson(doc) : TOY_CONFIG;
  let w = (doc.weights as number[] | undefined) ?? null;
  if (!w && typeof doc.schedule === "string") {
    const preset = WEIGHT_SCHEDULES[doc.schedule];
    if (!preset) fail(`unknown schedule ${doc.schedule}`);
    w = preset;
  }
  if (!w) w = new Array(cfg.levels - 1).fill(1);
  const steps = values.steps ? Number(values.steps) : Number(doc.steps ?? 300);
  const seed = Number(values.seed);
  const lr = values.lr ? Number(values.lr) : Number(doc.lr ?? 1e-4);
  const pairs = values.data
    ? loadPairs(values.data)
    : syntheticPairs(Number(values.patches), 32, seed);
  try {
    const { net, losses } = trainToy(pairs, cfg, { w }, steps, { seed, lr, logEvery: 50 });
    const ckpt = saveCheckpoint(net, steps, losses.length ? losses[losses.length - 1] : null);
    writeFileSync(values.out, JSON.stringify(ckpt));
    const gains = exitGains(net, pairs);
    console.log(
      JSON.stringify({
        schema_version: "1",
        steps,
        seed,
        final_loss: ckpt.finalLoss,
        exit_gains_db: gains.map((g) => Number(g.toFixed(4))),
        checkpoint: values.out,
      }),
    );
  } catch (err) {
    fail((err as Error).message);
  }
}

function cmdExport(argv: string[]): void {
  const { values } = parseArgs({
    args: argv,
    options: {
      checkpoint: { type: "string" },
      input: { type: "string" },
      out: { type: "string" },
    },
  });
  if (!values.checkpoint || !values.input || !values.out) {
    fail("--checkpoint, --input and --out are required");
  }
  try {
    const net = loadCheckpoint(JSON.parse(readFileSync(values.checkpoint, "utf8")));
    const image = readPgm(values.input);
    const written = exportExits(net, image, values.out);
    console.log(JSON.stringify({ schema_version: "1", files: written }));
  } catch (err) {
    fail((err as Error).message);
  }
}

const [command, ...rest] = process.argv.slice(2);
if (command === "train") cmdTrain(rest);
else if (command === "export") cmdExport(rest);
else fail(`usage: cli.js <train|export> ...  (got ${command ?? "nothing"})`);
