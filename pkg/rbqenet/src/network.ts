/** The dynamic multi-exit backbone at toy scale.
 *
 * A nested-UNet family: encoder column c{i}_1 of two full 3x3 convs per
 * level with stride-2 downsampling between levels; decoder nodes c{i}_{k}
 * (k >= 2, i + k <= levels + 1) consuming the dense concatenation of their
 * same-level predecessors plus one upsampled feed (c*k channels) through two
 * separable convolutions; channel attention on every node output; one 3x3
 * head per exit producing a residual added onto the input. Exit j therefore
 * reproduces the sub-network the analytical cost model counts, node id by
 * node id.
 */
import {
  Conv3x3,
  ConvTranspose2x2,
  Depthwise3x3,
  Eca,
  Layer,
  Param,
  Pointwise,
  Relu,
} from "./layers";
import { Rng } from "./rng";
import { add, mse, mseGrad, Tensor } from "./tensor";

export interface NetConfig {
  levels: number;
  baseChannels: number;
  inputChannels: number;
  kEca: number;
  separableDecoders: boolean;
  eca: boolean;
}

export const TOY_CONFIG: NetConfig = {
  levels: 3,
  baseChannels: 8,
  inputChannels: 1,
  kEca: 3,
  separableDecoders: true,
  eca: true,
};

/** Accepts the cost model's JSON spelling (snake_case) as well as camelCase. */
export function configFromJson(doc: Record<string, unknown>): NetConfig {
  const pick = (a: string, b: string, fallback: unknown) =>
    doc[a] !== undefined ? doc[a] : doc[b] !== undefined ? doc[b] : fallback;
  const cfg: NetConfig = {
    levels: Number(pick("levels", "levels", 3)),
    baseChannels: Number(pick("base_channels", "baseChannels", 8)),
    inputChannels: Number(pick("input_channels", "inputChannels", 1)),
    kEca: Number(pick("k_eca", "kEca", 3)),
    separableDecoders: Boolean(pick("separable_decoders", "separableDecoders", true)),
    eca: Boolean(pick("eca", "eca", true)),
  };
  validateConfig(cfg);
  return cfg;
}

export function configToJson(cfg: NetConfig): Record<string, unknown> {
  return {
    levels: cfg.levels,
    base_channels: cfg.baseChannels,
    input_channels: cfg.inputChannels,
    k_eca: cfg.kEca,
    separable_decoders: cfg.separableDecoders,
    eca: cfg.eca,
  };
}

export function validateConfig(cfg: NetConfig): void {
  if (!Number.isInteger(cfg.levels) || cfg.levels < 2 || cfg.levels > 6) {
    throw new Error(`levels must be an integer in 2..6, got ${cfg.levels}`);
  }
  if (cfg.baseChannels < 1 || cfg.inputChannels < 1 || cfg.kEca < 1) {
    throw new Error("channel counts and k_eca must be positive");
  }
}

export interface LossWeights {
  w: number[]; // one per exit, length levels - 1
}

/** Per-quality loss-weight schedules for the full 6-level model: early exits
 * carry the weight for high-quality inputs, late exits for low-quality ones. */
export const WEIGHT_SCHEDULES: Record<string, number[]> = {
  QP22: [2, 1, 1, 0.5, 0.5],
  QP27: [1, 2, 1, 0.5, 0.5],
  QP32: [0.5, 1, 2, 1, 0.5],
  QP37: [0.5, 0.5, 1, 2, 1],
  QP42: [0.5, 0.5, 1, 1, 2],
  QF50: [2, 1, 1, 0.5, 0.5],
  QF40: [1, 2, 1, 0.5, 0.5],
  QF30: [0.5, 1, 2, 1, 0.5],
  QF20: [0.5, 0.5, 1, 2, 1],
  QF10: [0.5, 0.5, 1, 1, 2],
};

export function validateWeights(weights: LossWeights, cfg: NetConfig): void {
  if (weights.w.length !== cfg.levels - 1) {
    throw new Error(
      `need ${cfg.levels - 1} exit weights for ${cfg.levels} levels, got ${weights.w.length}`,
    );
  }
  if (weights.w.some((v) => !(v > 0))) throw new Error("exit weights must be positive");
}

type TapeEntry =
  | { kind: "layer"; layer: Layer; x: Tensor; y: Tensor }
  | { kind: "concat"; xs: Tensor[]; y: Tensor }
  | { kind: "add"; a: Tensor; b: Tensor; y: Tensor };

function concat(xs: Tensor[]): Tensor {
  const { n, h, w } = xs[0];
  let c = 0;
  for (const x of xs) {
    if (x.n !== n || x.h !== h || x.w !== w) throw new Error("concat shape mismatch");
    c += x.c;
  }
  const y = new Tensor(n, c, h, w);
  const hw = h * w;
  for (let b = 0; b < n; b++) {
    let cOut = 0;
    for (const x of xs) {
      for (let ci = 0; ci < x.c; ci++, cOut++) {
        y.data.set(
          x.data.subarray((b * x.c + ci) * hw, (b * x.c + ci + 1) * hw),
          (b * c + cOut) * hw,
        );
      }
    }
  }
  return y;
}

function splitGrad(dy: Tensor, xs: Tensor[]): Tensor[] {
  const hw = dy.h * dy.w;
  const grads = xs.map((x) => Tensor.zerosLike(x));
  for (let b = 0; b < dy.n; b++) {
    let cIn = 0;
    for (let k = 0; k < xs.length; k++) {
      const x = xs[k];
      for (let ci = 0; ci < x.c; ci++, cIn++) {
        grads[k].data.set(
          dy.data.subarray((b * dy.c + cIn) * hw, (b * dy.c + cIn + 1) * hw),
          (b * x.c + ci) * hw,
        );
      }
    }
  }
  return grads;
}

export class DynamicNet {
  readonly cfg: NetConfig;
  readonly layers = new Map<string, Layer>();
  private readonly relu = new Relu();

  constructor(cfg: NetConfig, rng: Rng | null) {
    validateConfig(cfg);
    this.cfg = cfg;
    const c = cfg.baseChannels;
    const I = cfg.levels;
    const reg = (layer: Layer) => {
      this.layers.set(layer.id, layer);
      return layer;
    };
    for (let i = 1; i <= I; i++) {
      reg(new Conv3x3(`c${i}_1.conv1`, i === 1 ? cfg.inputChannels : c, c, 1, rng));
      reg(new Conv3x3(`c${i}_1.conv2`, c, c, 1, rng));
      if (cfg.eca) reg(new Eca(`c${i}_1.eca`, c, cfg.kEca));
      if (i < I) reg(new Conv3x3(`down${i}`, c, c, 2, rng));
    }
    for (let k = 2; k <= I; k++) {
      for (let i = 1; i <= I + 1 - k; i++) {
        reg(new ConvTranspose2x2(`up${i}_${k}`, c, c, rng));
        const width = c * k;
        if (cfg.separableDecoders) {
          reg(new Depthwise3x3(`c${i}_${k}.dw1`, width, rng));
          reg(new Pointwise(`c${i}_${k}.pw1`, width, c, rng));
          reg(new Depthwise3x3(`c${i}_${k}.dw2`, c, rng));
          reg(new Pointwise(`c${i}_${k}.pw2`, c, c, rng));
        } else {
          reg(new Conv3x3(`c${i}_${k}.conv1`, width, c, 1, rng));
          reg(new Conv3x3(`c${i}_${k}.conv2`, c, c, 1, rng));
        }
        if (cfg.eca) reg(new Eca(`c${i}_${k}.eca`, c, cfg.kEca));
      }
    }
    for (let j = 2; j <= I; j++) {
      // zero init: every exit starts as the identity mapping
      reg(new Conv3x3(`head${j}`, c, 1, 1, null));
    }
  }

  nodeIds(): string[] {
    return [...this.layers.keys()].sort();
  }

  params(): Param[] {
    const out: Param[] = [];
    for (const id of this.nodeIds()) out.push(...this.layers.get(id)!.params());
    return out;
  }

  zeroGrads(): void {
    for (const p of this.params()) p.grad.fill(0);
  }

  private get(id: string): Layer {
    const layer = this.layers.get(id);
    if (!layer) throw new Error(`missing layer ${id}`);
    return layer;
  }

  /** Run every exit; returns the residual-corrected outputs and the tape
   * needed to backpropagate. Input spatial dims must divide by 2^(levels-1). */
  forward(x: Tensor): { outputs: Tensor[]; tape: TapeEntry[] } {
    const I = this.cfg.levels;
    const div = 1 << (I - 1);
    if (x.h % div || x.w % div) {
      throw new Error(`input ${x.h}x${x.w} not divisible by ${div}`);
    }
    if (x.c !== this.cfg.inputChannels) {
      throw new Error(`expected ${this.cfg.inputChannels} input channels, got ${x.c}`);
    }
    const tape: TapeEntry[] = [];
    const applyLayer = (layer: Layer, input: Tensor): Tensor => {
      const y = layer.forward(input);
      tape.push({ kind: "layer", layer, x: input, y });
      return y;
    };
    const act = (input: Tensor) => applyLayer(this.relu, input);
    const attended: Tensor[][] = [];
    for (let i = 0; i <= I; i++) attended.push(new Array(I + 1));

    let carry = x;
    for (let i = 1; i <= I; i++) {
      if (i > 1) carry = act(applyLayer(this.get(`down${i - 1}`), carry));
      let f = act(applyLayer(this.get(`c${i}_1.conv1`), carry));
      f = act(applyLayer(this.get(`c${i}_1.conv2`), f));
      attended[i][1] = this.cfg.eca ? applyLayer(this.get(`c${i}_1.eca`), f) : f;
      carry = attended[i][1];
    }
    for (let k = 2; k <= I; k++) {
      for (let i = 1; i <= I + 1 - k; i++) {
        const up = act(applyLayer(this.get(`up${i}_${k}`), attended[i + 1][k - 1]));
        const feeds: Tensor[] = [];
        for (let p = 1; p < k; p++) feeds.push(attended[i][p]);
        feeds.push(up);
        const cat = concat(feeds);
        tape.push({ kind: "concat", xs: feeds, y: cat });
        let f: Tensor;
        if (this.cfg.separableDecoders) {
          const t1 = applyLayer(this.get(`c${i}_${k}.dw1`), cat);
          const t2 = act(applyLayer(this.get(`c${i}_${k}.pw1`), t1));
          const t3 = applyLayer(this.get(`c${i}_${k}.dw2`), t2);
          f = act(applyLayer(this.get(`c${i}_${k}.pw2`), t3));
        } else {
          const t1 = act(applyLayer(this.get(`c${i}_${k}.conv1`), cat));
          f = act(applyLayer(this.get(`c${i}_${k}.conv2`), t1));
        }
        attended[i][k] = this.cfg.eca ? applyLayer(this.get(`c${i}_${k}.eca`), f) : f;
      }
    }
    const outputs: Tensor[] = [];
    for (let j = 2; j <= I; j++) {
      const residual = applyLayer(this.get(`head${j}`), attended[1][j]);
      const out = add(x, residual);
      tape.push({ kind: "add", a: x, b: residual, y: out });
      outputs.push(out);
    }
    return { outputs, tape };
  }

  /** Weighted deep-supervision loss over all exits. */
  loss(outputs: Tensor[], target: Tensor, weights: LossWeights): number {
    if (outputs.length !== weights.w.length) {
      throw new Error(`${outputs.length} outputs but ${weights.w.length} weights`);
    }
    let total = 0;
    for (let j = 0; j < outputs.length; j++) total += weights.w[j] * mse(outputs[j], target);
    return total;
  }

  /** Backpropagate the weighted loss; parameter grads accumulate in place. */
  backward(
    outputs: Tensor[],
    tape: TapeEntry[],
    target: Tensor,
    weights: LossWeights,
  ): void {
    const grads = new Map<Tensor, Tensor>();
    const accumulate = (t: Tensor, g: Tensor) => {
      const existing = grads.get(t);
      if (existing) {
        for (let i = 0; i < existing.data.length; i++) existing.data[i] += g.data[i];
      } else {
        grads.set(t, g);
      }
    };
    for (let j = 0; j < outputs.length; j++) {
      accumulate(outputs[j], mseGrad(outputs[j], target, weights.w[j]));
    }
    for (let idx = tape.length - 1; idx >= 0; idx--) {
      const entry = tape[idx];
      const dy = grads.get(entry.y);
      if (!dy) continue;
      if (entry.kind === "layer") {
        accumulate(entry.x, entry.layer.backward(entry.x, entry.y, dy));
      } else if (entry.kind === "concat") {
        const parts = splitGrad(dy, entry.xs);
        for (let k = 0; k < parts.length; k++) accumulate(entry.xs[k], parts[k]);
      } else {
        accumulate(entry.a, dy.clone());
        accumulate(entry.b, dy.clone());
      }
    }
  }
}
