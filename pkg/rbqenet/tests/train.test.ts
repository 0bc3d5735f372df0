import { describe, expect, it } from "vitest";

import { degrade, syntheticPairs, toyScene } from "../src/data";
import { DynamicNet, TOY_CONFIG } from "../src/network";
import { Rng } from "../src/rng";
import { Tensor, mse } from "../src/tensor";
import { exitGains, loadCheckpoint, saveCheckpoint, trainToy } from "../src/train";

describe("training", () => {
  it("zero steps returns the seeded initialization", () => {
    const pairs = syntheticPairs(2, 32, 1);
    const { net } = trainToy(pairs, TOY_CONFIG, { w: [1, 1] }, 0, { seed: 5 });
    const reference = new DynamicNet(TOY_CONFIG, new Rng(5 * 2654435761 + 1));
    const got = net.params();
    const want = reference.params();
    expect(got).toHaveLength(want.length);
    for (let k = 0; k < got.length; k++) {
      expect(got[k].name).toBe(want[k].name);
      expect(got[k].value).toEqual(want[k].value);
    }
  });

  it("lowers the training loss over an 8-patch overfit", () => {
    const pairs = syntheticPairs(8, 32, 0);
    const { losses } = trainToy(pairs, TOY_CONFIG, { w: [1, 1] }, 40, { seed: 7 });
    expect(losses[losses.length - 1]).toBeLessThan(losses[0]);
  });

  it("is reproducible for a fixed seed", () => {
    const pairs = syntheticPairs(3, 32, 2);
    const a = trainToy(pairs, TOY_CONFIG, { w: [1, 1] }, 5, { seed: 9 });
    const b = trainToy(pairs, TOY_CONFIG, { w: [1, 1] }, 5, { seed: 9 });
    expect(a.losses).toEqual(b.losses);
  });

  it("aborts with a diagnostic when the loss goes non-finite", () => {
    const pairs = syntheticPairs(2, 32, 3);
    pairs[0].target.data[5] = Number.NaN;
    expect(() => trainToy(pairs, TOY_CONFIG, { w: [1, 1] }, 3, { seed: 1 })).toThrow(/diverged/);
  });

  it("rejects bad weight vectors", () => {
    const pairs = syntheticPairs(1, 32, 4);
    expect(() => trainToy(pairs, TOY_CONFIG, { w: [1] }, 1, {})).toThrow(/exit weights/);
    expect(() => trainToy(pairs, TOY_CONFIG, { w: [1, -1] }, 1, {})).toThrow(/positive/);
  });
});

describe("checkpoints", () => {
  it("round trips parameters and predictions", () => {
    const pairs = syntheticPairs(2, 32, 5);
    const { net } = trainToy(pairs, TOY_CONFIG, { w: [1, 1] }, 3, { seed: 2 });
    const restored = loadCheckpoint(JSON.parse(JSON.stringify(saveCheckpoint(net, 3, 0.1))));
    const x = pairs[0].input;
    const a = net.forward(x).outputs;
    const b = restored.forward(x).outputs;
    for (let j = 0; j < a.length; j++) expect(mse(a[j], b[j])).toBe(0);
  });

  it("rejects mismatched parameter sets", () => {
    const pairs = syntheticPairs(1, 32, 6);
    const { net } = trainToy(pairs, TOY_CONFIG, { w: [1, 1] }, 0, { seed: 3 });
    const doc = saveCheckpoint(net, 0, null);
    delete doc.params["head2.weight"];
    expect(() => loadCheckpoint(doc)).toThrow(/missing parameter/);
  });
});

describe("toy data", () => {
  it("degradation actually hurts fidelity", () => {
    const raw = toyScene(0);
    const damaged = degrade(raw);
    expect(mse(damaged, raw)).toBeGreaterThan(0);
  });

  it("exit gains start at exactly zero under zero heads", () => {
    const pairs = syntheticPairs(4, 32, 7);
    const net = new DynamicNet(TOY_CONFIG, new Rng(1));
    for (const g of exitGains(net, pairs)) expect(g).toBe(0);
  });
});

describe("batching", () => {
  it("supports sampled mini-batches", () => {
    const pairs = syntheticPairs(6, 32, 8);
    const { losses } = trainToy(pairs, TOY_CONFIG, { w: [1, 1] }, 4, {
      seed: 11,
      batchSize: 2,
    });
    expect(losses).toHaveLength(4);
  });

  it("stacks homogeneous shapes only", () => {
    const pairs = syntheticPairs(2, 32, 9);
    const odd = new Tensor(1, 1, 64, 64);
    pairs.push({ input: odd, target: odd });
    expect(() => trainToy(pairs, TOY_CONFIG, { w: [1, 1] }, 1, {})).toThrow(/shape/);
  });
});
