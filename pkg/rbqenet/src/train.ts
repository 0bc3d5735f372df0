/** Adam training loop, checkpointing, and per-exit gain accounting. */
import { DynamicNet, LossWeights, NetConfig, configFromJson, configToJson, validateWeights } from "./network";
import { Rng } from "./rng";
import { psnr, Tensor } from "./tensor";

export interface Pair {
  input: Tensor; // compressed, [1, c, h, w]
  target: Tensor; // raw
}

export interface Checkpoint {
  schema_version: string;
  config: Record<string, unknown>;
  steps: number;
  finalLoss: number | null;
  params: Record<string, number[]>;
}

export class Adam {
  private readonly m: Float64Array[];
  private readonly v: Float64Array[];
  private t = 0;

  constructor(
    private readonly net: DynamicNet,
    readonly lr: number = 1e-4,
    readonly beta1 = 0.9,
    readonly beta2 = 0.999,
    readonly eps = 1e-8,
  ) {
    const ps = net.params();
    this.m = ps.map((p) => new Float64Array(p.value.length));
    this.v = ps.map((p) => new Float64Array(p.value.length));
  }

  step(): void {
    this.t += 1;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    const ps = this.net.params();
    for (let k = 0; k < ps.length; k++) {
      const { value, grad } = ps[k];
      const m = this.m[k];
      const v = this.v[k];
      for (let i = 0; i < value.length; i++) {
        const g = grad[i];
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g;
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g * g;
        value[i] -= (this.lr * (m[i] / c1)) / (Math.sqrt(v[i] / c2) + this.eps);
      }
    }
  }
}

function stack(pairs: Pair[], pick: (p: Pair) => Tensor): Tensor {
  const first = pick(pairs[0]);
  const out = new Tensor(pairs.length, first.c, first.h, first.w);
  for (let b = 0; b < pairs.length; b++) {
    const t = pick(pairs[b]);
    if (t.c !== first.c || t.h !== first.h || t.w !== first.w) {
      throw new Error("all training patches must share one shape");
    }
    out.data.set(t.data, b * t.c * t.h * t.w);
  }
  return out;
}

export interface TrainResult {
  net: DynamicNet;
  losses: number[];
}

export interface TrainOptions {
  seed?: number;
  lr?: number;
  batchSize?: number;
  logEvery?: number;
}

/** Overfit a small patch set. Full-batch by default; with a batchSize the
 * batch is resampled uniformly each step from the seeded stream. Aborts with
 * a diagnostic if the loss ever goes non-finite. */
export function trainToy(
  pairs: Pair[],
  cfg: NetConfig,
  weights: LossWeights,
  steps: number,
  opts: TrainOptions = {},
): TrainResult {
  if (!pairs.length) throw new Error("training needs at least one pair");
  validateWeights(weights, cfg);
  const seed = opts.seed ?? 0;
  const rng = new Rng(seed * 2654435761 + 1);
  const net = new DynamicNet(cfg, rng);
  const optimizer = new Adam(net, opts.lr ?? 1e-4);
  const losses: number[] = [];
  const batchSize = Math.min(opts.batchSize ?? pairs.length, pairs.length);
  for (let step = 0; step < steps; step++) {
    let batch = pairs;
    if (batchSize < pairs.length) {
      batch = Array.from({ length: batchSize }, () => pairs[rng.int(pairs.length)]);
    }
    const x = stack(batch, (p) => p.input);
    const y = stack(batch, (p) => p.target);
    net.zeroGrads();
    const { outputs, tape } = net.forward(x);
    const loss = net.loss(outputs, y, weights);
    if (!Number.isFinite(loss)) {
      throw new Error(
        `training diverged at step ${step}: loss=${loss} (lr=${optimizer.lr}, seed=${seed})`,
      );
    }
    net.backward(outputs, tape, y, weights);
    optimizer.step();
    losses.push(loss);
    if (opts.logEvery && step % opts.logEvery === 0) {
      console.log(`step ${step}: loss=${loss.toExponential(4)}`);
    }
  }
  return { net, losses };
}

/** Mean per-exit PSNR gain over `pairs` (enhanced vs compressed, against raw). */
export function exitGains(net: DynamicNet, pairs: Pair[]): number[] {
  const gains = new Array(net.cfg.levels - 1).fill(0);
  for (const pair of pairs) {
    const { outputs } = net.forward(pair.input);
    const base = psnr(pair.input, pair.target);
    for (let j = 0; j < outputs.length; j++) {
      gains[j] += psnr(outputs[j], pair.target) - base;
    }
  }
  return gains.map((g) => g / pairs.length);
}

export function saveCheckpoint(net: DynamicNet, steps: number, finalLoss: number | null): Checkpoint {
  const params: Record<string, number[]> = {};
  for (const p of net.params()) params[p.name] = Array.from(p.value);
  return {
    schema_version: "1",
    config: configToJson(net.cfg),
    steps,
    finalLoss,
    params,
  };
}

export function loadCheckpoint(doc: Checkpoint): DynamicNet {
  const cfg = configFromJson(doc.config);
  const net = new DynamicNet(cfg, null); // weights come from the checkpoint
  const seen = new Set<string>();
  for (const p of net.params()) {
    const stored = doc.params[p.name];
    if (!stored) throw new Error(`checkpoint missing parameter ${p.name}`);
    if (stored.length !== p.value.length) {
      throw new Error(
        `checkpoint parameter ${p.name} has ${stored.length} values, expected ${p.value.length}`,
      );
    }
    p.value.set(stored);
    seen.add(p.name);
  }
  for (const name of Object.keys(doc.params)) {
    if (!seen.has(name)) throw new Error(`checkpoint has unknown parameter ${name}`);
  }
  return net;
}
