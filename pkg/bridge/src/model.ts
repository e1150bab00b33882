/**
 * A minimal decoder-only causal language model: RMS-normed pre-norm
 * blocks with rotary multi-head attention and a SiLU-gated MLP, loaded
 * from a `config.json` + `model.safetensors` checkpoint directory.
 *
 * Weights live in plain class fields so an adapter can swap a projection
 * for a low-rank-augmented one without any framework ceremony.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import { MissingTensorError, ShapeMismatchError, UnreadableFileError } from './errors.js';
import type { ProjectionKind } from './manifest.js';
import { readSafetensors, type TensorFile } from './safetensors.js';
import {
  Rng,
  Tape,
  Tensor,
  add,
  causalSoftmax,
  concatCols,
  dropout,
  embed,
  linear,
  matmul,
  matmulNT,
  mul,
  rmsnorm,
  rope,
  scale,
  silu,
  sliceCols,
} from './tensor.js';

export interface ModelConfig {
  hiddenSize: number;
  intermediateSize: number;
  numHiddenLayers: number;
  numAttentionHeads: number;
  numKeyValueHeads: number;
  vocabSize: number;
  rmsNormEps: number;
  ropeTheta: number;
  tieWordEmbeddings: boolean;
}

/** Convert a checkpoint `config.json` object into a validated config. */
export function modelConfigFromJson(raw: Record<string, unknown>): ModelConfig {
  const grab = (key: string): number => {
    const value = raw[key];
    if (typeof value !== 'number' || !Number.isInteger(value) || value < 1) {
      throw new UnreadableFileError(`config: ${key} must be a positive integer, got ${String(value)}`);
    }
    return value;
  };
  const config: ModelConfig = {
    hiddenSize: grab('hidden_size'),
    intermediateSize: grab('intermediate_size'),
    numHiddenLayers: grab('num_hidden_layers'),
    numAttentionHeads: grab('num_attention_heads'),
    numKeyValueHeads:
      raw['num_key_value_heads'] === undefined ? grab('num_attention_heads') : grab('num_key_value_heads'),
    vocabSize: grab('vocab_size'),
    rmsNormEps: typeof raw['rms_norm_eps'] === 'number' ? raw['rms_norm_eps'] : 1e-5,
    ropeTheta: typeof raw['rope_theta'] === 'number' ? raw['rope_theta'] : 10000,
    tieWordEmbeddings: raw['tie_word_embeddings'] === true,
  };
  if (config.hiddenSize % config.numAttentionHeads !== 0) {
    throw new UnreadableFileError(
      `config: hidden size ${config.hiddenSize} is not divisible by ${config.numAttentionHeads} heads`,
    );
  }
  if (config.numAttentionHeads % config.numKeyValueHeads !== 0) {
    throw new UnreadableFileError(
      `config: ${config.numAttentionHeads} heads are not divisible by ${config.numKeyValueHeads} KV heads`,
    );
  }
  const headDim = config.hiddenSize / config.numAttentionHeads;
  if (headDim % 2 !== 0) {
    throw new UnreadableFileError(`config: head dimension ${headDim} must be even for rotary embedding`);
  }
  return config;
}

/** A plain affine projection with a frozen `(out, in)` weight. */
export class Linear {
  weight: Tensor;

  constructor(weight: Tensor) {
    this.weight = weight;
  }

  forward(x: Tensor, tape?: Tape, _rng?: Rng): Tensor {
    return linear(x, this.weight, tape);
  }
}

/**
 * A projection augmented with a low-rank update:
 * `y = W x + scaling * B (A x)`, with `W` frozen and `A`, `B` trainable.
 *
 * Dropout (when enabled) applies to the low-rank path's input only, the
 * usual adapter convention, so the frozen path stays deterministic.
 */
export class LoraLinear {
  base: Tensor;
  loraA: Tensor;
  loraB: Tensor;
  scaling: number;
  dropoutP = 0;

  constructor(base: Tensor, loraA: Tensor, loraB: Tensor, scaling: number) {
    this.base = base;
    this.loraA = loraA;
    this.loraB = loraB;
    this.scaling = scaling;
  }

  forward(x: Tensor, tape?: Tape, rng?: Rng): Tensor {
    const frozen = linear(x, this.base, tape);
    let low = this.dropoutP > 0 && rng ? dropout(x, this.dropoutP, rng, tape) : x;
    low = linear(low, this.loraA, tape);
    low = linear(low, this.loraB, tape);
    return add(frozen, scale(low, this.scaling, tape), tape);
  }
}

export type ProjectionModule = Linear | LoraLinear;

/** The frozen weight behind a projection, adapted or not. */
export function baseWeightOf(module: ProjectionModule): Tensor {
  return module instanceof LoraLinear ? module.base : module.weight;
}

class RMSNorm {
  weight: Tensor;
  eps: number;

  constructor(weight: Tensor, eps: number) {
    this.weight = weight;
    this.eps = eps;
  }

  forward(x: Tensor, tape?: Tape): Tensor {
    return rmsnorm(x, this.weight, this.eps, tape);
  }
}

class Attention {
  qProj: ProjectionModule;
  kProj: ProjectionModule;
  vProj: ProjectionModule;
  oProj: ProjectionModule;
  numHeads: number;
  numKVHeads: number;
  headDim: number;
  ropeTheta: number;

  constructor(config: ModelConfig, q: Tensor, k: Tensor, v: Tensor, o: Tensor) {
    this.qProj = new Linear(q);
    this.kProj = new Linear(k);
    this.vProj = new Linear(v);
    this.oProj = new Linear(o);
    this.numHeads = config.numAttentionHeads;
    this.numKVHeads = config.numKeyValueHeads;
    this.headDim = config.hiddenSize / config.numAttentionHeads;
    this.ropeTheta = config.ropeTheta;
  }

  forward(x: Tensor, tape?: Tape, rng?: Rng): Tensor {
    const queries = rope(
      this.qProj.forward(x, tape, rng),
      this.numHeads,
      this.headDim,
      this.ropeTheta,
      tape,
    );
    const keys = rope(
      this.kProj.forward(x, tape, rng),
      this.numKVHeads,
      this.headDim,
      this.ropeTheta,
      tape,
    );
    const values = this.vProj.forward(x, tape, rng);

    const group = this.numHeads / this.numKVHeads;
    const factor = 1 / Math.sqrt(this.headDim);
    const heads: Tensor[] = [];
    for (let h = 0; h < this.numHeads; h++) {
      const kv = Math.floor(h / group);
      const qh = sliceCols(queries, h * this.headDim, (h + 1) * this.headDim, tape);
      const kh = sliceCols(keys, kv * this.headDim, (kv + 1) * this.headDim, tape);
      const vh = sliceCols(values, kv * this.headDim, (kv + 1) * this.headDim, tape);
      const attn = causalSoftmax(scale(matmulNT(qh, kh, tape), factor, tape), tape);
      heads.push(matmul(attn, vh, tape));
    }
    return this.oProj.forward(concatCols(heads, tape), tape, rng);
  }
}

class MLP {
  gateProj: ProjectionModule;
  upProj: ProjectionModule;
  downProj: ProjectionModule;

  constructor(gate: Tensor, up: Tensor, down: Tensor) {
    this.gateProj = new Linear(gate);
    this.upProj = new Linear(up);
    this.downProj = new Linear(down);
  }

  forward(x: Tensor, tape?: Tape, rng?: Rng): Tensor {
    const gated = mul(silu(this.gateProj.forward(x, tape, rng), tape), this.upProj.forward(x, tape, rng), tape);
    return this.downProj.forward(gated, tape, rng);
  }
}

export class TransformerBlock {
  selfAttn: Attention;
  mlp: MLP;
  inputLayernorm: RMSNorm;
  postAttentionLayernorm: RMSNorm;

  constructor(selfAttn: Attention, mlp: MLP, inputNorm: RMSNorm, postNorm: RMSNorm) {
    this.selfAttn = selfAttn;
    this.mlp = mlp;
    this.inputLayernorm = inputNorm;
    this.postAttentionLayernorm = postNorm;
  }

  forward(x: Tensor, tape?: Tape, rng?: Rng): Tensor {
    const attended = add(x, this.selfAttn.forward(this.inputLayernorm.forward(x, tape), tape, rng), tape);
    return add(attended, this.mlp.forward(this.postAttentionLayernorm.forward(attended, tape), tape, rng), tape);
  }
}

/** Read a projection module out of a block by kind. */
export function projectionOf(block: TransformerBlock, kind: ProjectionKind): ProjectionModule {
  switch (kind) {
    case 'q':
      return block.selfAttn.qProj;
    case 'k':
      return block.selfAttn.kProj;
    case 'v':
      return block.selfAttn.vProj;
    case 'o':
      return block.selfAttn.oProj;
    case 'gate':
      return block.mlp.gateProj;
    case 'up':
      return block.mlp.upProj;
    case 'down':
      return block.mlp.downProj;
  }
}

/** Swap a projection module in a block by kind. */
export function setProjection(block: TransformerBlock, kind: ProjectionKind, module: ProjectionModule): void {
  switch (kind) {
    case 'q':
      block.selfAttn.qProj = module;
      break;
    case 'k':
      block.selfAttn.kProj = module;
      break;
    case 'v':
      block.selfAttn.vProj = module;
      break;
    case 'o':
      block.selfAttn.oProj = module;
      break;
    case 'gate':
      block.mlp.gateProj = module;
      break;
    case 'up':
      block.mlp.upProj = module;
      break;
    case 'down':
      block.mlp.downProj = module;
      break;
  }
}

function takeTensor(file: TensorFile, name: string, shape: number[], source: string): Tensor {
  const stored = file.tensors.get(name);
  if (stored === undefined) {
    throw new MissingTensorError(`${source}: missing tensor ${name}`);
  }
  if (stored.dtype !== 'F32') {
    throw new UnreadableFileError(`${source}: tensor ${name} is ${stored.dtype}, expected F32`);
  }
  if (stored.shape.length !== shape.length || stored.shape.some((dim, i) => dim !== shape[i])) {
    throw new ShapeMismatchError(
      `${source}: tensor ${name} has shape [${stored.shape}], expected [${shape}]`,
    );
  }
  return Tensor.fromFloat32(stored.data as Float32Array, stored.shape);
}

export class CausalLM {
  config: ModelConfig;
  embedTokens: Tensor;
  layers: TransformerBlock[];
  norm: RMSNorm;
  lmHead: Tensor | null;

  private constructor(
    config: ModelConfig,
    embedTokens: Tensor,
    layers: TransformerBlock[],
    norm: RMSNorm,
    lmHead: Tensor | null,
  ) {
    this.config = config;
    this.embedTokens = embedTokens;
    this.layers = layers;
    this.norm = norm;
    this.lmHead = lmHead;
  }

  /**
   * Load a model from a checkpoint: either a directory holding
   * `config.json` and `model.safetensors`, or the tensor file itself with
   * `config.json` beside it.
   */
  static fromCheckpoint(basePath: string): CausalLM {
    let dir = basePath;
    let tensorPath = path.join(basePath, 'model.safetensors');
    if (fs.existsSync(basePath) && fs.statSync(basePath).isFile()) {
      dir = path.dirname(basePath);
      tensorPath = basePath;
    }
    const configPath = path.join(dir, 'config.json');
    let rawConfig: Record<string, unknown>;
    try {
      rawConfig = JSON.parse(fs.readFileSync(configPath, 'utf-8'));
    } catch (err) {
      throw new UnreadableFileError(`cannot read ${configPath}: ${(err as Error).message}`);
    }
    const config = modelConfigFromJson(rawConfig);
    const file = readSafetensors(tensorPath);
    const source = tensorPath;

    const dim = config.hiddenSize;
    const kvDim = (config.hiddenSize / config.numAttentionHeads) * config.numKeyValueHeads;
    const embedTokens = takeTensor(file, 'model.embed_tokens.weight', [config.vocabSize, dim], source);
    const layers: TransformerBlock[] = [];
    for (let i = 0; i < config.numHiddenLayers; i++) {
      const prefix = `model.layers.${i}`;
      const attention = new Attention(
        config,
        takeTensor(file, `${prefix}.self_attn.q_proj.weight`, [dim, dim], source),
        takeTensor(file, `${prefix}.self_attn.k_proj.weight`, [kvDim, dim], source),
        takeTensor(file, `${prefix}.self_attn.v_proj.weight`, [kvDim, dim], source),
        takeTensor(file, `${prefix}.self_attn.o_proj.weight`, [dim, dim], source),
      );
      const mlp = new MLP(
        takeTensor(file, `${prefix}.mlp.gate_proj.weight`, [config.intermediateSize, dim], source),
        takeTensor(file, `${prefix}.mlp.up_proj.weight`, [config.intermediateSize, dim], source),
        takeTensor(file, `${prefix}.mlp.down_proj.weight`, [dim, config.intermediateSize], source),
      );
      layers.push(
        new TransformerBlock(
          attention,
          mlp,
          new RMSNorm(takeTensor(file, `${prefix}.input_layernorm.weight`, [dim], source), config.rmsNormEps),
          new RMSNorm(
            takeTensor(file, `${prefix}.post_attention_layernorm.weight`, [dim], source),
            config.rmsNormEps,
          ),
        ),
      );
    }
    const norm = new RMSNorm(takeTensor(file, 'model.norm.weight', [dim], source), config.rmsNormEps);
    const lmHead = config.tieWordEmbeddings
      ? null
      : takeTensor(file, 'lm_head.weight', [config.vocabSize, dim], source);
    return new CausalLM(config, embedTokens, layers, norm, lmHead);
  }

  /** Per-position vocabulary logits for a token sequence, `(T, V)`. */
  forward(tokens: number[], tape?: Tape, rng?: Rng): Tensor {
    if (tokens.length === 0) {
      throw new Error('forward: empty token sequence');
    }
    let hidden = embed(this.embedTokens, tokens, tape);
    for (const layer of this.layers) {
      hidden = layer.forward(hidden, tape, rng);
    }
    hidden = this.norm.forward(hidden, tape);
    return linear(hidden, this.lmHead ?? this.embedTokens, tape);
  }

  /** Logits without gradient tracking. */
  logits(tokens: number[]): Tensor {
    return this.forward(tokens);
  }
}
