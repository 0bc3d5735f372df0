/** Dense NCHW tensors on Float64Array. Double precision keeps the finite-
 * difference gradient checks meaningful. */

export class Tensor {
  readonly n: number;
  readonly c: number;
  readonly h: number;
  readonly w: number;
  readonly data: Float64Array;

  constructor(n: number, c: number, h: number, w: number, data?: Float64Array) {
    this.n = n;
    this.c = c;
    this.h = h;
    this.w = w;
    const size = n * c * h * w;
    if (data) {
      if (data.length !== size) {
        throw new Error(`data length ${data.length} does not match shape ${n}x${c}x${h}x${w}`);
      }
      this.data = data;
    } else {
      this.data = new Float64Array(size);
    }
  }

  get size(): number {
    return this.data.length;
  }

  shape(): [number, number, number, number] {
    return [this.n, this.c, this.h, this.w];
  }

  sameShape(other: Tensor): boolean {
    return (
      this.n === other.n && this.c === other.c && this.h === other.h && this.w === other.w
    );
  }

  clone(): Tensor {
    return new Tensor(this.n, this.c, this.h, this.w, this.data.slice());
  }

  static zerosLike(t: Tensor): Tensor {
    return new Tensor(t.n, t.c, t.h, t.w);
  }
}

export function addInto(dst: Tensor, src: Tensor): void {
  if (!dst.sameShape(src)) throw new Error("shape mismatch in addInto");
  const a = dst.data;
  const b = src.data;
  for (let i = 0; i < a.length; i++) a[i] += b[i];
}

export function add(a: Tensor, b: Tensor): Tensor {
  const out = a.clone();
  addInto(out, b);
  return out;
}

/** Mean squared error over every element, plus its gradient w.r.t. `pred`. */
export function mse(pred: Tensor, target: Tensor): number {
  if (!pred.sameShape(target)) throw new Error("shape mismatch in mse");
  let acc = 0;
  const p = pred.data;
  const t = target.data;
  for (let i = 0; i < p.length; i++) {
    const d = p[i] - t[i];
    acc += d * d;
  }
  return acc / p.length;
}

export function mseGrad(pred: Tensor, target: Tensor, scale: number): Tensor {
  const g = Tensor.zerosLike(pred);
  const p = pred.data;
  const t = target.data;
  const k = (2.0 * scale) / p.length;
  for (let i = 0; i < p.length; i++) g.data[i] = k * (p[i] - t[i]);
  return g;
}

export function psnr(a: Tensor, b: Tensor): number {
  const m = mse(a, b);
  if (m === 0) return Infinity;
  return 10.0 * Math.log10(1.0 / m);
}
