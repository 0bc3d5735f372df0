import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { readPgm, writePgm16 } from "../src/pgm";
import { Rng } from "../src/rng";
import { Tensor } from "../src/tensor";

const dir = mkdtempSync(join(tmpdir(), "rbqenet-pgm-"));

describe("pgm", () => {
  it("round trips 16-bit within one quantization step", () => {
    const rng = new Rng(1);
    const img = new Tensor(1, 1, 12, 9);
    for (let i = 0; i < img.data.length; i++) img.data[i] = rng.uniform(0, 1);
    const path = join(dir, "a.pgm");
    writePgm16(path, img);
    const back = readPgm(path);
    expect(back.h).toBe(12);
    expect(back.w).toBe(9);
    for (let i = 0; i < img.data.length; i++) {
      expect(Math.abs(back.data[i] - img.data[i])).toBeLessThanOrEqual(0.5 / 65535 + 1e-12);
    }
  });

  it("clamps out-of-range samples on write", () => {
    const img = new Tensor(1, 1, 1, 2);
    img.data[0] = -0.25;
    img.data[1] = 1.75;
    const path = join(dir, "clamp.pgm");
    writePgm16(path, img);
    const back = readPgm(path);
    expect(back.data[0]).toBe(0);
    expect(back.data[1]).toBe(1);
  });

  it("reads 8-bit files scaled by 255", () => {
    const path = join(dir, "b.pgm");
    writeFileSync(path, Buffer.concat([Buffer.from("P5\n2 1\n255\n", "ascii"), Buffer.from([0, 128])]));
    const img = readPgm(path);
    expect(img.data[0]).toBe(0);
    expect(img.data[1]).toBeCloseTo(128 / 255, 12);
  });

  it("rejects truncated or foreign files", () => {
    const path = join(dir, "bad.pgm");
    writeFileSync(path, Buffer.from("P5\n4 4\n255\nxy", "ascii"));
    expect(() => readPgm(path)).toThrow(/truncated/);
    const other = join(dir, "other.bin");
    writeFileSync(other, Buffer.from("hello"));
    expect(() => readPgm(other)).toThrow(/not a binary PGM/);
  });
});
