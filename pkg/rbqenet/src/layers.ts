/** Conv / attention primitives with explicit forward and backward passes.
 *
 * Every layer owns its parameters and their gradient buffers; backward takes
 * the forward input, the forward output and the output gradient, accumulates
 * parameter gradients, and returns the input gradient. Conventions follow
 * the analytical cost model: same padding, stride-2 halving, 2x2 stride-2
 * transposed upsampling, channel attention as pool + 1-d conv + gate.
 */
import { Rng } from "./rng";
import { Tensor } from "./tensor";

export interface Param {
  name: string;
  value: Float64Array;
  grad: Float64Array;
}

export interface Layer {
  readonly id: string;
  params(): Param[];
  forward(x: Tensor): Tensor;
  backward(x: Tensor, y: Tensor, dy: Tensor): Tensor;
}

function heFill(rng: Rng, arr: Float64Array, fanIn: number): void {
  const std = Math.sqrt(2.0 / fanIn);
  for (let i = 0; i < arr.length; i++) arr[i] = std * rng.gauss();
}

export class Conv3x3 implements Layer {
  readonly weight: Float64Array; // [cout, cin, 3, 3]
  readonly bias: Float64Array; // [cout]
  readonly gWeight: Float64Array;
  readonly gBias: Float64Array;

  constructor(
    readonly id: string,
    readonly cin: number,
    readonly cout: number,
    readonly stride: 1 | 2,
    rng: Rng | null,
  ) {
    this.weight = new Float64Array(cout * cin * 9);
    this.bias = new Float64Array(cout);
    this.gWeight = new Float64Array(this.weight.length);
    this.gBias = new Float64Array(cout);
    if (rng) heFill(rng, this.weight, cin * 9);
  }

  params(): Param[] {
    return [
      { name: `${this.id}.weight`, value: this.weight, grad: this.gWeight },
      { name: `${this.id}.bias`, value: this.bias, grad: this.gBias },
    ];
  }

  forward(x: Tensor): Tensor {
    if (x.c !== this.cin) throw new Error(`${this.id}: expected ${this.cin} channels, got ${x.c}`);
    const s = this.stride;
    if (s === 2 && (x.h % 2 || x.w % 2)) {
      throw new Error(`${this.id}: stride-2 needs even input, got ${x.h}x${x.w}`);
    }
    const oh = x.h / s;
    const ow = x.w / s;
    const y = new Tensor(x.n, this.cout, oh, ow);
    const { weight, bias } = this;
    for (let n = 0; n < x.n; n++) {
      for (let co = 0; co < this.cout; co++) {
        const yBase = (n * this.cout + co) * oh * ow;
        const b = bias[co];
        for (let i = 0; i < oh; i++) {
          for (let j = 0; j < ow; j++) {
            let acc = b;
            const ci0 = i * s - 1;
            const cj0 = j * s - 1;
            for (let ci = 0; ci < this.cin; ci++) {
              const xBase = (n * this.cin + ci) * x.h * x.w;
              const wBase = (co * this.cin + ci) * 9;
              for (let dy = 0; dy < 3; dy++) {
                const yy = ci0 + dy;
                if (yy < 0 || yy >= x.h) continue;
                const rowBase = xBase + yy * x.w;
                for (let dx = 0; dx < 3; dx++) {
                  const xx = cj0 + dx;
                  if (xx < 0 || xx >= x.w) continue;
                  acc += weight[wBase + dy * 3 + dx] * x.data[rowBase + xx];
                }
              }
            }
            y.data[yBase + i * ow + j] = acc;
          }
        }
      }
    }
    return y;
  }

  backward(x: Tensor, _y: Tensor, dy: Tensor): Tensor {
    const s = this.stride;
    const oh = dy.h;
    const ow = dy.w;
    const dx = Tensor.zerosLike(x);
    for (let n = 0; n < x.n; n++) {
      for (let co = 0; co < this.cout; co++) {
        const dyBase = (n * this.cout + co) * oh * ow;
        for (let i = 0; i < oh; i++) {
          for (let j = 0; j < ow; j++) {
            const g = dy.data[dyBase + i * ow + j];
            if (g === 0) continue;
            this.gBias[co] += g;
            const ci0 = i * s - 1;
            const cj0 = j * s - 1;
            for (let ci = 0; ci < this.cin; ci++) {
              const xBase = (n * this.cin + ci) * x.h * x.w;
              const wBase = (co * this.cin + ci) * 9;
              for (let dyk = 0; dyk < 3; dyk++) {
                const yy = ci0 + dyk;
                if (yy < 0 || yy >= x.h) continue;
                const rowBase = xBase + yy * x.w;
                for (let dxk = 0; dxk < 3; dxk++) {
                  const xx = cj0 + dxk;
                  if (xx < 0 || xx >= x.w) continue;
                  this.gWeight[wBase + dyk * 3 + dxk] += g * x.data[rowBase + xx];
                  dx.data[rowBase + xx] += g * this.weight[wBase + dyk * 3 + dxk];
                }
              }
            }
          }
        }
      }
    }
    return dx;
  }
}

export class Depthwise3x3 implements Layer {
  readonly weight: Float64Array; // [c, 3, 3]; bias lives on the pointwise half
  readonly gWeight: Float64Array;

  constructor(readonly id: string, readonly channels: number, rng: Rng | null) {
    this.weight = new Float64Array(channels * 9);
    this.gWeight = new Float64Array(this.weight.length);
    if (rng) heFill(rng, this.weight, 9);
  }

  params(): Param[] {
    return [{ name: `${this.id}.weight`, value: this.weight, grad: this.gWeight }];
  }

  forward(x: Tensor): Tensor {
    if (x.c !== this.channels) throw new Error(`${this.id}: channel mismatch`);
    const y = Tensor.zerosLike(x);
    for (let n = 0; n < x.n; n++) {
      for (let c = 0; c < x.c; c++) {
        const base = (n * x.c + c) * x.h * x.w;
        const wBase = c * 9;
        for (let i = 0; i < x.h; i++) {
          for (let j = 0; j < x.w; j++) {
            let acc = 0;
            for (let dy = 0; dy < 3; dy++) {
              const yy = i + dy - 1;
              if (yy < 0 || yy >= x.h) continue;
              for (let dx = 0; dx < 3; dx++) {
                const xx = j + dx - 1;
                if (xx < 0 || xx >= x.w) continue;
                acc += this.weight[wBase + dy * 3 + dx] * x.data[base + yy * x.w + xx];
              }
            }
            y.data[base + i * x.w + j] = acc;
          }
        }
      }
    }
    return y;
  }

  backward(x: Tensor, _y: Tensor, dy: Tensor): Tensor {
    const dx = Tensor.zerosLike(x);
    for (let n = 0; n < x.n; n++) {
      for (let c = 0; c < x.c; c++) {
        const base = (n * x.c + c) * x.h * x.w;
        const wBase = c * 9;
        for (let i = 0; i < x.h; i++) {
          for (let j = 0; j < x.w; j++) {
            const g = dy.data[base + i * x.w + j];
            if (g === 0) continue;
            for (let dyk = 0; dyk < 3; dyk++) {
              const yy = i + dyk - 1;
              if (yy < 0 || yy >= x.h) continue;
              for (let dxk = 0; dxk < 3; dxk++) {
                const xx = j + dxk - 1;
                if (xx < 0 || xx >= x.w) continue;
                this.gWeight[wBase + dyk * 3 + dxk] += g * x.data[base + yy * x.w + xx];
                dx.data[base + yy * x.w + xx] += g * this.weight[wBase + dyk * 3 + dxk];
              }
            }
          }
        }
      }
    }
    return dx;
  }
}

export class Pointwise implements Layer {
  readonly weight: Float64Array; // [cout, cin]
  readonly bias: Float64Array;
  readonly gWeight: Float64Array;
  readonly gBias: Float64Array;

  constructor(readonly id: string, readonly cin: number, readonly cout: number, rng: Rng | null) {
    this.weight = new Float64Array(cout * cin);
    this.bias = new Float64Array(cout);
    this.gWeight = new Float64Array(this.weight.length);
    this.gBias = new Float64Array(cout);
    if (rng) heFill(rng, this.weight, cin);
  }

  params(): Param[] {
    return [
      { name: `${this.id}.weight`, value: this.weight, grad: this.gWeight },
      { name: `${this.id}.bias`, value: this.bias, grad: this.gBias },
    ];
  }

  forward(x: Tensor): Tensor {
    if (x.c !== this.cin) throw new Error(`${this.id}: channel mismatch`);
    const hw = x.h * x.w;
    const y = new Tensor(x.n, this.cout, x.h, x.w);
    for (let n = 0; n < x.n; n++) {
      for (let co = 0; co < this.cout; co++) {
        const yBase = (n * this.cout + co) * hw;
        y.data.fill(this.bias[co], yBase, yBase + hw);
        for (let ci = 0; ci < this.cin; ci++) {
          const w = this.weight[co * this.cin + ci];
          const xBase = (n * this.cin + ci) * hw;
          for (let p = 0; p < hw; p++) y.data[yBase + p] += w * x.data[xBase + p];
        }
      }
    }
    return y;
  }

  backward(x: Tensor, _y: Tensor, dy: Tensor): Tensor {
    const hw = x.h * x.w;
    const dx = Tensor.zerosLike(x);
    for (let n = 0; n < x.n; n++) {
      for (let co = 0; co < this.cout; co++) {
        const dyBase = (n * this.cout + co) * hw;
        let bAcc = 0;
        for (let p = 0; p < hw; p++) bAcc += dy.data[dyBase + p];
        this.gBias[co] += bAcc;
        for (let ci = 0; ci < this.cin; ci++) {
          const xBase = (n * this.cin + ci) * hw;
          const w = this.weight[co * this.cin + ci];
          let wAcc = 0;
          for (let p = 0; p < hw; p++) {
            const g = dy.data[dyBase + p];
            wAcc += g * x.data[xBase + p];
            dx.data[xBase + p] += g * w;
          }
          this.gWeight[co * this.cin + ci] += wAcc;
        }
      }
    }
    return dx;
  }
}

export class ConvTranspose2x2 implements Layer {
  readonly weight: Float64Array; // [cin, cout, 2, 2]
  readonly bias: Float64Array;
  readonly gWeight: Float64Array;
  readonly gBias: Float64Array;

  constructor(readonly id: string, readonly cin: number, readonly cout: number, rng: Rng | null) {
    this.weight = new Float64Array(cin * cout * 4);
    this.bias = new Float64Array(cout);
    this.gWeight = new Float64Array(this.weight.length);
    this.gBias = new Float64Array(cout);
    if (rng) heFill(rng, this.weight, cin);
  }

  params(): Param[] {
    return [
      { name: `${this.id}.weight`, value: this.weight, grad: this.gWeight },
      { name: `${this.id}.bias`, value: this.bias, grad: this.gBias },
    ];
  }

  forward(x: Tensor): Tensor {
    if (x.c !== this.cin) throw new Error(`${this.id}: channel mismatch`);
    const oh = x.h * 2;
    const ow = x.w * 2;
    const y = new Tensor(x.n, this.cout, oh, ow);
    for (let n = 0; n < x.n; n++) {
      for (let co = 0; co < this.cout; co++) {
        const yBase = (n * this.cout + co) * oh * ow;
        y.data.fill(this.bias[co], yBase, yBase + oh * ow);
        for (let ci = 0; ci < this.cin; ci++) {
          const xBase = (n * this.cin + ci) * x.h * x.w;
          const wBase = (ci * this.cout + co) * 4;
          for (let i = 0; i < x.h; i++) {
            for (let j = 0; j < x.w; j++) {
              const v = x.data[xBase + i * x.w + j];
              const out0 = yBase + 2 * i * ow + 2 * j;
              y.data[out0] += this.weight[wBase] * v;
              y.data[out0 + 1] += this.weight[wBase + 1] * v;
              y.data[out0 + ow] += this.weight[wBase + 2] * v;
              y.data[out0 + ow + 1] += this.weight[wBase + 3] * v;
            }
          }
        }
      }
    }
    return y;
  }

  backward(x: Tensor, _y: Tensor, dy: Tensor): Tensor {
    const ow = dy.w;
    const dx = Tensor.zerosLike(x);
    for (let n = 0; n < x.n; n++) {
      for (let co = 0; co < this.cout; co++) {
        const dyBase = (n * this.cout + co) * dy.h * dy.w;
        let bAcc = 0;
        for (let p = 0; p < dy.h * dy.w; p++) bAcc += dy.data[dyBase + p];
        this.gBias[co] += bAcc;
        for (let ci = 0; ci < this.cin; ci++) {
          const xBase = (n * this.cin + ci) * x.h * x.w;
          const wBase = (ci * this.cout + co) * 4;
          for (let i = 0; i < x.h; i++) {
            for (let j = 0; j < x.w; j++) {
              const out0 = dyBase + 2 * i * ow + 2 * j;
              const g00 = dy.data[out0];
              const g01 = dy.data[out0 + 1];
              const g10 = dy.data[out0 + ow];
              const g11 = dy.data[out0 + ow + 1];
              const v = x.data[xBase + i * x.w + j];
              this.gWeight[wBase] += g00 * v;
              this.gWeight[wBase + 1] += g01 * v;
              this.gWeight[wBase + 2] += g10 * v;
              this.gWeight[wBase + 3] += g11 * v;
              dx.data[xBase + i * x.w + j] +=
                g00 * this.weight[wBase] +
                g01 * this.weight[wBase + 1] +
                g10 * this.weight[wBase + 2] +
                g11 * this.weight[wBase + 3];
            }
          }
        }
      }
    }
    return dx;
  }
}

/** Efficient channel attention: global average pool, a k-tap 1-d convolution
 * shared across channels (zero-padded), sigmoid gate, channel rescale. */
export class Eca implements Layer {
  readonly weight: Float64Array; // [k]
  readonly gWeight: Float64Array;

  constructor(readonly id: string, readonly channels: number, readonly k: number = 3) {
    this.weight = new Float64Array(k);
    this.weight[(k - 1) >> 1] = 1.0; // start as a pass-through of the pooled mean
    this.gWeight = new Float64Array(k);
  }

  params(): Param[] {
    return [{ name: `${this.id}.weight`, value: this.weight, grad: this.gWeight }];
  }

  private pooled(x: Tensor): Float64Array {
    const hw = x.h * x.w;
    const g = new Float64Array(x.n * x.c);
    for (let n = 0; n < x.n; n++) {
      for (let c = 0; c < x.c; c++) {
        const base = (n * x.c + c) * hw;
        let acc = 0;
        for (let p = 0; p < hw; p++) acc += x.data[base + p];
        g[n * x.c + c] = acc / hw;
      }
    }
    return g;
  }

  private gates(g: Float64Array, n: number): Float64Array {
    const off = (this.k - 1) >> 1;
    const s = new Float64Array(g.length);
    for (let b = 0; b < n; b++) {
      for (let c = 0; c < this.channels; c++) {
        let a = 0;
        for (let t = 0; t < this.k; t++) {
          const cc = c + t - off;
          if (cc < 0 || cc >= this.channels) continue;
          a += this.weight[t] * g[b * this.channels + cc];
        }
        s[b * this.channels + c] = 1.0 / (1.0 + Math.exp(-a));
      }
    }
    return s;
  }

  forward(x: Tensor): Tensor {
    if (x.c !== this.channels) throw new Error(`${this.id}: channel mismatch`);
    const s = this.gates(this.pooled(x), x.n);
    const y = Tensor.zerosLike(x);
    const hw = x.h * x.w;
    for (let n = 0; n < x.n; n++) {
      for (let c = 0; c < x.c; c++) {
        const base = (n * x.c + c) * hw;
        const gate = s[n * x.c + c];
        for (let p = 0; p < hw; p++) y.data[base + p] = x.data[base + p] * gate;
      }
    }
    return y;
  }

  backward(x: Tensor, _y: Tensor, dy: Tensor): Tensor {
    const hw = x.h * x.w;
    const off = (this.k - 1) >> 1;
    const g = this.pooled(x);
    const s = this.gates(g, x.n);
    const dx = Tensor.zerosLike(x);
    const dGate = new Float64Array(x.n * x.c);
    for (let n = 0; n < x.n; n++) {
      for (let c = 0; c < x.c; c++) {
        const base = (n * x.c + c) * hw;
        const gate = s[n * x.c + c];
        let acc = 0;
        for (let p = 0; p < hw; p++) {
          acc += dy.data[base + p] * x.data[base + p];
          dx.data[base + p] += dy.data[base + p] * gate;
        }
        dGate[n * x.c + c] = acc;
      }
    }
    // through the sigmoid and the 1-d conv back to the pooled means
    const dPool = new Float64Array(x.n * x.c);
    for (let n = 0; n < x.n; n++) {
      for (let c = 0; c < x.c; c++) {
        const idx = n * x.c + c;
        const da = dGate[idx] * s[idx] * (1.0 - s[idx]);
        for (let t = 0; t < this.k; t++) {
          const cc = c + t - off;
          if (cc < 0 || cc >= this.channels) continue;
          this.gWeight[t] += da * g[n * x.c + cc];
          dPool[n * x.c + cc] += da * this.weight[t];
        }
      }
    }
    for (let n = 0; n < x.n; n++) {
      for (let c = 0; c < x.c; c++) {
        const spread = dPool[n * x.c + c] / hw;
        if (spread === 0) continue;
        const base = (n * x.c + c) * hw;
        for (let p = 0; p < hw; p++) dx.data[base + p] += spread;
      }
    }
    return dx;
  }
}

export class Relu implements Layer {
  constructor(readonly id: string = "_relu") {}

  params(): Param[] {
    return [];
  }

  forward(x: Tensor): Tensor {
    const y = Tensor.zerosLike(x);
    for (let i = 0; i < x.data.length; i++) {
      const v = x.data[i];
      y.data[i] = v > 0 ? v : 0;
    }
    return y;
  }

  backward(x: Tensor, _y: Tensor, dy: Tensor): Tensor {
    const dx = Tensor.zerosLike(x);
    for (let i = 0; i < x.data.length; i++) {
      dx.data[i] = x.data[i] > 0 ? dy.data[i] : 0;
    }
    return dx;
  }
}
