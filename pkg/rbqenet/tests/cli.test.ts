import { execFileSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

import { describe, expect, it } from "vitest";

import { degrade, toyScene } from "../src/data";
import { readPgm, writePgm16 } from "../src/pgm";

const CLI = resolve(__dirname, "..", "dist", "cli.js");

function runCli(args: string[]): string {
  return execFileSync("node", [CLI, ...args], { encoding: "utf8" });
}

describe("cli", () => {
  it("trains on synthetic patches and exports exit files", () => {
    const dir = mkdtempSync(join(tmpdir(), "rbqenet-cli-"));
    const cfgPath = join(dir, "config.json");
    writeFileSync(
      cfgPath,
      JSON.stringify({ levels: 3, base_channels: 4, input_channels: 1, weights: [1, 1] }),
    );
    const ckptPath = join(dir, "ckpt.json");
    const trainOut = runCli([
      "train", "--config", cfgPath, "--out", ckptPath, "--steps", "5", "--seed", "4",
    ]);
    const lastLine = trainOut.trim().split("\n").pop()!;
    const summary = JSON.parse(lastLine);
    expect(summary.schema_version).toBe("1");
    expect(summary.steps).toBe(5);
    expect(existsSync(ckptPath)).toBe(true);
    const ckpt = JSON.parse(readFileSync(ckptPath, "utf8"));
    expect(ckpt.config.levels).toBe(3);

    // export against a fresh 32x32 input
    const inputPath = join(dir, "input.pgm");
    writePgm16(inputPath, degrade(toyScene(9, 32)));
    const outDir = join(dir, "exits");
    const exportOut = JSON.parse(
      runCli(["export", "--checkpoint", ckptPath, "--input", inputPath, "--out", outDir]),
    );
    expect(exportOut.files).toHaveLength(2);
    for (const f of exportOut.files) {
      const img = readPgm(f);
      expect([img.h, img.w]).toEqual([32, 32]);
    }
  });

  it("fails with exit code 2 on bad usage", () => {
    let code = 0;
    try {
      execFileSync("node", [CLI, "train"], { encoding: "utf8", stdio: "pipe" });
    } catch (err) {
      code = (err as { status: number }).status;
    }
    expect(code).toBe(2);
  });
});
