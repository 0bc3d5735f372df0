/** Synthetic toy patches and per-exit candidate export. */
import { mkdirSync, readdirSync } from "node:fs";
import { join } from "node:path";

import { DynamicNet } from "./network";
import { readPgm, writePgm16 } from "./pgm";
import { Rng } from "./rng";
import { Pair } from "./train";
import { Tensor } from "./tensor";

/** A smooth ramp with soft blobs and faint grain; stands in for raw content. */
export function toyScene(seed: number, size = 32): Tensor {
  const rng = new Rng(seed + 101);
  const out = new Tensor(1, 1, size, size);
  const theta = rng.uniform(0, Math.PI);
  const cx = rng.uniform(0.2, 0.8) * size;
  const cy = rng.uniform(0.2, 0.8) * size;
  const radius = rng.uniform(0.2, 0.4) * size;
  const amp = rng.uniform(-0.3, 0.3);
  for (let i = 0; i < size; i++) {
    for (let j = 0; j < size; j++) {
      const ramp = (Math.cos(theta) * j + Math.sin(theta) * i) / size;
      const d2 = (i - cy) * (i - cy) + (j - cx) * (j - cx);
      const blob = amp * Math.exp(-d2 / (radius * radius));
      let v = 0.35 + 0.3 * ramp + blob + 0.02 * rng.gauss();
      v = Math.min(Math.max(v, 0.02), 0.98);
      out.data[i * size + j] = v;
    }
  }
  return out;
}

/** Blur plus per-block flattening: a cheap stand-in for codec damage. */
export function degrade(raw: Tensor, block = 8): Tensor {
  const { h, w } = raw;
  const blurred = new Tensor(1, 1, h, w);
  for (let i = 0; i < h; i++) {
    for (let j = 0; j < w; j++) {
      let acc = 0;
      let cnt = 0;
      for (let di = -1; di <= 1; di++) {
        for (let dj = -1; dj <= 1; dj++) {
          const ii = i + di;
          const jj = j + dj;
          if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
          acc += raw.data[ii * w + jj];
          cnt += 1;
        }
      }
      blurred.data[i * w + j] = acc / cnt;
    }
  }
  const out = new Tensor(1, 1, h, w);
  for (let bi = 0; bi < h; bi += block) {
    for (let bj = 0; bj < w; bj += block) {
      let mean = 0;
      const bh = Math.min(block, h - bi);
      const bw = Math.min(block, w - bj);
      for (let i = 0; i < bh; i++) {
        for (let j = 0; j < bw; j++) mean += blurred.data[(bi + i) * w + bj + j];
      }
      mean /= bh * bw;
      for (let i = 0; i < bh; i++) {
        for (let j = 0; j < bw; j++) {
          const p = (bi + i) * w + bj + j;
          out.data[p] = 0.65 * blurred.data[p] + 0.35 * mean;
        }
      }
    }
  }
  return out;
}

export function syntheticPairs(count: number, size = 32, seed = 0): Pair[] {
  const pairs: Pair[] = [];
  for (let k = 0; k < count; k++) {
    const raw = toyScene(seed * 1000 + k, size);
    pairs.push({ input: degrade(raw), target: raw });
  }
  return pairs;
}

/** Load `<stem>.comp.pgm` / `<stem>.raw.pgm` pairs from a directory. */
export function loadPairs(dir: string): Pair[] {
  const stems = readdirSync(dir)
    .filter((f) => f.endsWith(".raw.pgm"))
    .map((f) => f.slice(0, -".raw.pgm".length))
    .sort();
  const pairs: Pair[] = [];
  for (const stem of stems) {
    pairs.push({
      input: readPgm(join(dir, `${stem}.comp.pgm`)),
      target: readPgm(join(dir, `${stem}.raw.pgm`)),
    });
  }
  if (!pairs.length) throw new Error(`no *.raw.pgm/*.comp.pgm pairs in ${dir}`);
  return pairs;
}

/** Run every exit on one image and write exit_2.pgm .. exit_I.pgm, clamped. */
export function exportExits(net: DynamicNet, image: Tensor, outDir: string): string[] {
  mkdirSync(outDir, { recursive: true });
  const { outputs } = net.forward(image);
  const written: string[] = [];
  for (let j = 0; j < outputs.length; j++) {
    const path = join(outDir, `exit_${j + 2}.pgm`);
    writePgm16(path, outputs[j]);
    written.push(path);
  }
  return written;
}
