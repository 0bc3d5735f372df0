import { execFileSync } from "node:child_process";

import { DynamicNet, LossWeights, NetConfig } from "../src/network";
import { Rng } from "../src/rng";
import { Tensor } from "../src/tensor";

/** Worst relative error between analytic and central-difference gradients.
 *
 * Heads and biases are given small random values first: zero biases park
 * dead units exactly on the relu kink, where central differences measure a
 * half-slope the (sub)gradient legitimately does not report. The relative
 * error uses a 1e-6 floor in the denominator so gradients at the numeric
 * differentiation noise floor do not register as disagreement. */
export function gradcheckWorst(cfg: NetConfig, weights: LossWeights, seed: number) {
  const net = new DynamicNet(cfg, new Rng(seed));
  const jitter = new Rng(seed + 50);
  for (const p of net.params()) {
    if (p.name.startsWith("head") || p.name.endsWith(".bias")) {
      for (let i = 0; i < p.value.length; i++) p.value[i] = 0.05 * jitter.gauss();
    }
  }
  const rng = new Rng(seed + 1);
  const x = new Tensor(1, cfg.inputChannels, 8, 8);
  for (let i = 0; i < x.data.length; i++) x.data[i] = rng.uniform(0.1, 0.9);
  const target = new Tensor(1, cfg.inputChannels, 8, 8);
  for (let i = 0; i < target.data.length; i++) target.data[i] = rng.uniform(0.1, 0.9);

  const lossAt = () => {
    const { outputs } = net.forward(x);
    return net.loss(outputs, target, weights);
  };

  net.zeroGrads();
  const { outputs, tape } = net.forward(x);
  net.loss(outputs, target, weights);
  net.backward(outputs, tape, target, weights);

  const eps = 1e-6;
  let worst = 0;
  let nParams = 0;
  let worstName = "";
  for (const p of net.params()) {
    nParams += p.value.length;
    for (let i = 0; i < p.value.length; i++) {
      const saved = p.value[i];
      p.value[i] = saved + eps;
      const up = lossAt();
      p.value[i] = saved - eps;
      const down = lossAt();
      p.value[i] = saved;
      const numeric = (up - down) / (2 * eps);
      const analytic = p.grad[i];
      const rel =
        Math.abs(analytic - numeric) / Math.max(1e-6, Math.abs(analytic) + Math.abs(numeric));
      if (rel > worst) {
        worst = rel;
        worstName = `${p.name}[${i}]`;
      }
    }
  }
  return { worst, nParams, worstName };
}

/** Invoke the primary component's CLI; returns stdout. */
export function pyRbqe(args: string[]): string {
  const python = process.env.PYTHON ?? "python3";
  return execFileSync(python, ["-m", "rbqe", ...args], { encoding: "utf8" });
}
