/**
 * Minimal reverse-mode autodiff over dense float64 tensors.
 *
 * Just enough machinery for a small decoder-only language model: 1-D and
 * 2-D tensors, a handful of ops with hand-written backward passes, and a
 * tape that replays them in reverse.  Every op takes an optional tape;
 * without one it is plain (cheaper) forward math.
 */

/** Replays recorded backward closures in reverse order. */
export class Tape {
  private nodes: Array<() => void> = [];

  record(backward: () => void): void {
    this.nodes.push(backward);
  }

  backprop(): void {
    for (let i = this.nodes.length - 1; i >= 0; i--) {
      this.nodes[i]();
    }
  }
}

/** A dense row-major tensor with an optional gradient buffer. */
export class Tensor {
  data: Float64Array;
  shape: number[];
  grad: Float64Array | null = null;

  constructor(data: Float64Array, shape: number[]) {
    const count = shape.reduce((acc, dim) => acc * dim, 1);
    if (data.length !== count) {
      throw new Error(`data length ${data.length} does not match shape [${shape}]`);
    }
    this.data = data;
    this.shape = shape;
  }

  static zeros(shape: number[]): Tensor {
    const count = shape.reduce((acc, dim) => acc * dim, 1);
    return new Tensor(new Float64Array(count), shape);
  }

  /** Build a float64 tensor from float32 storage values. */
  static fromFloat32(values: Float32Array, shape: number[]): Tensor {
    return new Tensor(Float64Array.from(values), shape);
  }

  /** Downcast to float32 storage; exact for values that began as float32. */
  toFloat32(): Float32Array {
    return Float32Array.from(this.data);
  }

  get rows(): number {
    if (this.shape.length !== 2) throw new Error(`expected a 2-D tensor, got [${this.shape}]`);
    return this.shape[0];
  }

  get cols(): number {
    if (this.shape.length !== 2) throw new Error(`expected a 2-D tensor, got [${this.shape}]`);
    return this.shape[1];
  }

  get size(): number {
    return this.data.length;
  }

  item(): number {
    if (this.size !== 1) throw new Error(`item() needs a single-element tensor, got [${this.shape}]`);
    return this.data[0];
  }

  ensureGrad(): Float64Array {
    if (this.grad === null) {
      this.grad = new Float64Array(this.data.length);
    }
    return this.grad;
  }

  zeroGrad(): void {
    if (this.grad !== null) this.grad.fill(0);
  }
}

/** Small deterministic PRNG (mulberry32) for dropout masks and sampling. */
export class Rng {
  private state: number;

  constructor(seed: number) {
    this.state = seed >>> 0;
  }

  /** Uniform float in [0, 1). */
  next(): number {
    this.state = (this.state + 0x6d2b79f5) >>> 0;
    let t = this.state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  }

  /** Uniform integer in [0, n). */
  nextInt(n: number): number {
    return Math.floor(this.next() * n);
  }
}

function assertSameShape(a: Tensor, b: Tensor, op: string): void {
  if (a.shape.length !== b.shape.length || a.shape.some((dim, i) => dim !== b.shape[i])) {
    throw new Error(`${op}: shape [${a.shape}] does not match [${b.shape}]`);
  }
}

/** Elementwise sum of two tensors of identical shape. */
export function add(a: Tensor, b: Tensor, tape?: Tape): Tensor {
  assertSameShape(a, b, 'add');
  const out = new Tensor(new Float64Array(a.size), a.shape);
  for (let i = 0; i < a.size; i++) out.data[i] = a.data[i] + b.data[i];
  if (tape) {
    tape.record(() => {
      const gy = out.grad;
      if (!gy) return;
      const ga = a.ensureGrad();
      const gb = b.ensureGrad();
      for (let i = 0; i < a.size; i++) {
        ga[i] += gy[i];
        gb[i] += gy[i];
      }
    });
  }
  return out;
}

/** Elementwise product of two tensors of identical shape. */
export function mul(a: Tensor, b: Tensor, tape?: Tape): Tensor {
  assertSameShape(a, b, 'mul');
  const out = new Tensor(new Float64Array(a.size), a.shape);
  for (let i = 0; i < a.size; i++) out.data[i] = a.data[i] * b.data[i];
  if (tape) {
    tape.record(() => {
      const gy = out.grad;
      if (!gy) return;
      const ga = a.ensureGrad();
      const gb = b.ensureGrad();
      for (let i = 0; i < a.size; i++) {
        ga[i] += gy[i] * b.data[i];
        gb[i] += gy[i] * a.data[i];
      }
    });
  }
  return out;
}

/** Multiply every element by a constant. */
export function scale(a: Tensor, factor: number, tape?: Tape): Tensor {
  const out = new Tensor(new Float64Array(a.size), a.shape);
  for (let i = 0; i < a.size; i++) out.data[i] = a.data[i] * factor;
  if (tape) {
    tape.record(() => {
      const gy = out.grad;
      if (!gy) return;
      const ga = a.ensureGrad();
      for (let i = 0; i < a.size; i++) ga[i] += gy[i] * factor;
    });
  }
  return out;
}

/**
 * Affine map with a stored `(out, in)` weight: `y[t,o] = sum_i x[t,i] w[o,i]`.
 *
 * This is the layout checkpoint linear layers use, so weights plug in
 * without transposition.
 */
export function linear(x: Tensor, w: Tensor, tape?: Tape): Tensor {
  const [rows, inDim] = [x.rows, x.cols];
  const [outDim, wIn] = [w.rows, w.cols];
  if (inDim !== wIn) {
    throw new Error(`linear: input width ${inDim} does not match weight width ${wIn}`);
  }
  const out = Tensor.zeros([rows, outDim]);
  for (let t = 0; t < rows; t++) {
    for (let o = 0; o < outDim; o++) {
      let acc = 0;
      for (let i = 0; i < inDim; i++) acc += x.data[t * inDim + i] * w.data[o * inDim + i];
      out.data[t * outDim + o] = acc;
    }
  }
  if (tape) {
    tape.record(() => {
      const gy = out.grad;
      if (!gy) return;
      const gx = x.ensureGrad();
      const gw = w.ensureGrad();
      for (let t = 0; t < rows; t++) {
        for (let o = 0; o < outDim; o++) {
          const g = gy[t * outDim + o];
          if (g === 0) continue;
          for (let i = 0; i < inDim; i++) {
            gx[t * inDim + i] += g * w.data[o * inDim + i];
            gw[o * inDim + i] += g * x.data[t * inDim + i];
          }
        }
      }
    });
  }
  return out;
}

/** Plain matrix product `(T,K) x (K,M) -> (T,M)`. */
export function matmul(a: Tensor, b: Tensor, tape?: Tape): Tensor {
  const [rows, inner] = [a.rows, a.cols];
  const [bRows, cols] = [b.rows, b.cols];
  if (inner !== bRows) {
    throw new Error(`matmul: inner dimensions ${inner} and ${bRows} do not match`);
  }
  const out = Tensor.zeros([rows, cols]);
  for (let t = 0; t < rows; t++) {
    for (let k = 0; k < inner; k++) {
      const av = a.data[t * inner + k];
      if (av === 0) continue;
      for (let m = 0; m < cols; m++) out.data[t * cols + m] += av * b.data[k * cols + m];
    }
  }
  if (tape) {
    tape.record(() => {
      const gy = out.grad;
      if (!gy) return;
      const ga = a.ensureGrad();
      const gb = b.ensureGrad();
      for (let t = 0; t < rows; t++) {
        for (let m = 0; m < cols; m++) {
          const g = gy[t * cols + m];
          if (g === 0) continue;
          for (let k = 0; k < inner; k++) {
            ga[t * inner + k] += g * b.data[k * cols + m];
            gb[k * cols + m] += g * a.data[t * inner + k];
          }
        }
      }
    });
  }
  return out;
}

/** Product with the second operand transposed: `(T,D) x (S,D)^T -> (T,S)`. */
export function matmulNT(a: Tensor, b: Tensor, tape?: Tape): Tensor {
  const [rows, width] = [a.rows, a.cols];
  const [cols, bWidth] = [b.rows, b.cols];
  if (width !== bWidth) {
    throw new Error(`matmulNT: widths ${width} and ${bWidth} do not match`);
  }
  const out = Tensor.zeros([rows, cols]);
  for (let t = 0; t < rows; t++) {
    for (let s = 0; s < cols; s++) {
      let acc = 0;
      for (let d = 0; d < width; d++) acc += a.data[t * width + d] * b.data[s * width + d];
      out.data[t * cols + s] = acc;
    }
  }
  if (tape) {
    tape.record(() => {
      const gy = out.grad;
      if (!gy) return;
      const ga = a.ensureGrad();
      const gb = b.ensureGrad();
      for (let t = 0; t < rows; t++) {
        for (let s = 0; s < cols; s++) {
          const g = gy[t * cols + s];
          if (g === 0) continue;
          for (let d = 0; d < width; d++) {
            ga[t * width + d] += g * b.data[s * width + d];
            gb[s * width + d] += g * a.data[t * width + d];
          }
        }
      }
    });
  }
  return out;
}

/** Sigmoid-weighted linear unit: `x * sigmoid(x)`. */
export function silu(x: Tensor, tape?: Tape): Tensor {
  const out = new Tensor(new Float64Array(x.size), x.shape);
  for (let i = 0; i < x.size; i++) {
    const v = x.data[i];
    out.data[i] = v / (1 + Math.exp(-v));
  }
  if (tape) {
    tape.record(() => {
      const gy = out.grad;
      if (!gy) return;
      const gx = x.ensureGrad();
      for (let i = 0; i < x.size; i++) {
        const v = x.data[i];
        const sig = 1 / (1 + Math.exp(-v));
        gx[i] += gy[i] * sig * (1 + v * (1 - sig));
      }
    });
  }
  return out;
}

/** Root-mean-square normalization per row, with a learned per-column gain. */
export function rmsnorm(x: Tensor, weight: Tensor, eps: number, tape?: Tape): Tensor {
  const [rows, width] = [x.rows, x.cols];
  if (weight.shape.length !== 1 || weight.shape[0] !== width) {
    throw new Error(`rmsnorm: weight shape [${weight.shape}] does not match width ${width}`);
  }
  const out = Tensor.zeros([rows, width]);
  const inv = new Float64Array(rows);
  for (let t = 0; t < rows; t++) {
    let meanSq = 0;
    for (let d = 0; d < width; d++) {
      const v = x.data[t * width + d];
      meanSq += v * v;
    }
    meanSq /= width;
    const r = 1 / Math.sqrt(meanSq + eps);
    inv[t] = r;
    for (let d = 0; d < width; d++) {
      out.data[t * width + d] = x.data[t * width + d] * r * weight.data[d];
    }
  }
  if (tape) {
    tape.record(() => {
      const gy = out.grad;
      if (!gy) return;
      const gx = x.ensureGrad();
      const gw = weight.ensureGrad();
      for (let t = 0; t < rows; t++) {
        const r = inv[t];
        let dot = 0;
        for (let d = 0; d < width; d++) {
          const g = gy[t * width + d];
          const v = x.data[t * width + d];
          gw[d] += g * v * r;
          dot += g * weight.data[d] * v;
        }
        const correction = (r * r * r * dot) / width;
        for (let d = 0; d < width; d++) {
          gx[t * width + d] += gy[t * width + d] * weight.data[d] * r - correction * x.data[t * width + d];
        }
      }
    });
  }
  return out;
}

/**
 * Row-wise softmax over a causal square score matrix: row `i` normalizes
 * over columns `j <= i`; later columns are exactly zero.
 */
export function causalSoftmax(scores: Tensor, tape?: Tape): Tensor {
  const [rows, cols] = [scores.rows, scores.cols];
  if (rows !== cols) {
    throw new Error(`causalSoftmax: expected a square matrix, got [${scores.shape}]`);
  }
  const out = Tensor.zeros([rows, cols]);
  for (let i = 0; i < rows; i++) {
    let max = -Infinity;
    for (let j = 0; j <= i; j++) max = Math.max(max, scores.data[i * cols + j]);
    let denom = 0;
    for (let j = 0; j <= i; j++) {
      const e = Math.exp(scores.data[i * cols + j] - max);
      out.data[i * cols + j] = e;
      denom += e;
    }
    for (let j = 0; j <= i; j++) out.data[i * cols + j] /= denom;
  }
  if (tape) {
    tape.record(() => {
      const gy = out.grad;
      if (!gy) return;
      const gs = scores.ensureGrad();
      for (let i = 0; i < rows; i++) {
        let dot = 0;
        for (let j = 0; j <= i; j++) dot += gy[i * cols + j] * out.data[i * cols + j];
        for (let j = 0; j <= i; j++) {
          gs[i * cols + j] += out.data[i * cols + j] * (gy[i * cols + j] - dot);
        }
      }
    });
  }
  return out;
}

/** Gather embedding rows for a token sequence: `(V,D) + ids -> (T,D)`. */
export function embed(table: Tensor, ids: number[], tape?: Tape): Tensor {
  const [vocab, width] = [table.rows, table.cols];
  const out = Tensor.zeros([ids.length, width]);
  ids.forEach((id, t) => {
    if (!Number.isInteger(id) || id < 0 || id >= vocab) {
      throw new Error(`embed: token ${id} outside vocabulary of ${vocab}`);
    }
    out.data.set(table.data.subarray(id * width, (id + 1) * width), t * width);
  });
  if (tape) {
    tape.record(() => {
      const gy = out.grad;
      if (!gy) return;
      const gt = table.ensureGrad();
      ids.forEach((id, t) => {
        for (let d = 0; d < width; d++) gt[id * width + d] += gy[t * width + d];
      });
    });
  }
  return out;
}

/**
 * Rotary position embedding over per-head feature blocks, rotate-half
 * convention: within each head, feature `j` pairs with `j + headDim/2`
 * and the pair is rotated by `pos * theta^(-2j/headDim)`.
 */
export function rope(x: Tensor, numHeads: number, headDim: number, theta: number, tape?: Tape): Tensor {
  const [rows, width] = [x.rows, x.cols];
  if (width !== numHeads * headDim) {
    throw new Error(`rope: width ${width} is not ${numHeads} heads of ${headDim}`);
  }
  if (headDim % 2 !== 0) {
    throw new Error(`rope: head dimension ${headDim} must be even`);
  }
  const half = headDim / 2;
  const invFreq = new Float64Array(half);
  for (let j = 0; j < half; j++) invFreq[j] = theta ** (-(2 * j) / headDim);

  const rotate = (src: Float64Array, dst: Float64Array, sign: number) => {
    for (let t = 0; t < rows; t++) {
      for (let h = 0; h < numHeads; h++) {
        const off = t * width + h * headDim;
        for (let j = 0; j < half; j++) {
          const angle = sign * t * invFreq[j];
          const cos = Math.cos(angle);
          const sin = Math.sin(angle);
          const a = src[off + j];
          const b = src[off + j + half];
          dst[off + j] += a * cos - b * sin;
          dst[off + j + half] += a * sin + b * cos;
        }
      }
    }
  };

  const out = Tensor.zeros([rows, width]);
  rotate(x.data, out.data, 1);
  if (tape) {
    tape.record(() => {
      const gy = out.grad;
      if (!gy) return;
      // The rotation is orthogonal, so the backward map is the inverse
      // rotation applied to the upstream gradient.
      rotate(gy, x.ensureGrad(), -1);
    });
  }
  return out;
}

/** Copy a column range `[start, end)` out of a 2-D tensor. */
export function sliceCols(x: Tensor, start: number, end: number, tape?: Tape): Tensor {
  const [rows, width] = [x.rows, x.cols];
  if (start < 0 || end > width || start >= end) {
    throw new Error(`sliceCols: range [${start}, ${end}) invalid for width ${width}`);
  }
  const span = end - start;
  const out = Tensor.zeros([rows, span]);
  for (let t = 0; t < rows; t++) {
    out.data.set(x.data.subarray(t * width + start, t * width + end), t * span);
  }
  if (tape) {
    tape.record(() => {
      const gy = out.grad;
      if (!gy) return;
      const gx = x.ensureGrad();
      for (let t = 0; t < rows; t++) {
        for (let d = 0; d < span; d++) gx[t * width + start + d] += gy[t * span + d];
      }
    });
  }
  return out;
}

/** Concatenate 2-D tensors with equal row counts along columns. */
export function concatCols(parts: Tensor[], tape?: Tape): Tensor {
  if (parts.length === 0) throw new Error('concatCols: nothing to concatenate');
  const rows = parts[0].rows;
  if (parts.some((p) => p.rows !== rows)) {
    throw new Error('concatCols: row counts differ');
  }
  const width = parts.reduce((acc, p) => acc + p.cols, 0);
  const out = Tensor.zeros([rows, width]);
  let offset = 0;
  for (const part of parts) {
    for (let t = 0; t < rows; t++) {
      out.data.set(part.data.subarray(t * part.cols, (t + 1) * part.cols), t * width + offset);
    }
    offset += part.cols;
  }
  if (tape) {
    tape.record(() => {
      const gy = out.grad;
      if (!gy) return;
      let colStart = 0;
      for (const part of parts) {
        const gp = part.ensureGrad();
        for (let t = 0; t < rows; t++) {
          for (let d = 0; d < part.cols; d++) gp[t * part.cols + d] += gy[t * width + colStart + d];
        }
        colStart += part.cols;
      }
    });
  }
  return out;
}

/**
 * Mean next-token cross-entropy: `(T,V)` logits against `T` target ids,
 * returning a scalar tensor.
 */
export function crossEntropy(logits: Tensor, targets: number[], tape?: Tape): Tensor {
  const [rows, vocab] = [logits.rows, logits.cols];
  if (targets.length !== rows) {
    throw new Error(`crossEntropy: ${targets.length} targets for ${rows} rows`);
  }
  const probs = new Float64Array(rows * vocab);
  let total = 0;
  for (let t = 0; t < rows; t++) {
    const target = targets[t];
    if (!Number.isInteger(target) || target < 0 || target >= vocab) {
      throw new Error(`crossEntropy: target ${target} outside vocabulary of ${vocab}`);
    }
    let max = -Infinity;
    for (let v = 0; v < vocab; v++) max = Math.max(max, logits.data[t * vocab + v]);
    let denom = 0;
    for (let v = 0; v < vocab; v++) {
      const e = Math.exp(logits.data[t * vocab + v] - max);
      probs[t * vocab + v] = e;
      denom += e;
    }
    for (let v = 0; v < vocab; v++) probs[t * vocab + v] /= denom;
    total -= Math.log(probs[t * vocab + target]);
  }
  const out = new Tensor(Float64Array.of(total / rows), []);
  if (tape) {
    tape.record(() => {
      const gy = out.grad;
      if (!gy) return;
      const g = gy[0] / rows;
      const gl = logits.ensureGrad();
      for (let t = 0; t < rows; t++) {
        for (let v = 0; v < vocab; v++) {
          gl[t * vocab + v] += g * (probs[t * vocab + v] - (v === targets[t] ? 1 : 0));
        }
      }
    });
  }
  return out;
}

/** Inverted dropout: zero a fraction `p` of entries and rescale the rest. */
export function dropout(x: Tensor, p: number, rng: Rng, tape?: Tape): Tensor {
  if (p <= 0) return x;
  if (p >= 1) throw new Error(`dropout: probability ${p} must be below 1`);
  const keep = 1 - p;
  const mask = new Float64Array(x.size);
  const out = new Tensor(new Float64Array(x.size), x.shape);
  for (let i = 0; i < x.size; i++) {
    mask[i] = rng.next() < p ? 0 : 1 / keep;
    out.data[i] = x.data[i] * mask[i];
  }
  if (tape) {
    tape.record(() => {
      const gy = out.grad;
      if (!gy) return;
      const gx = x.ensureGrad();
      for (let i = 0; i < x.size; i++) gx[i] += gy[i] * mask[i];
    });
  }
  return out;
}
