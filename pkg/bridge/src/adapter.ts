/**
 * Loading an exported LoRA initialization into the model.
 *
 * The adapter arrives as two files produced elsewhere: a safetensors
 * tensor file and its JSON sidecar manifest.  This module never derives
 * initial values itself — it verifies the files against each other and
 * against the base model, then swaps the targeted projections for
 * low-rank-augmented ones.
 */

import { MissingTensorError, ShapeMismatchError, UnreadableFileError } from './errors.js';
import {
  PROJECTION_KINDS,
  readAdapterManifest,
  tensorMapDigest,
  type AdapterManifest,
  type ProjectionKind,
} from './manifest.js';
import {
  CausalLM,
  LoraLinear,
  baseWeightOf,
  projectionOf,
  setProjection,
} from './model.js';
import { readSafetensors, type StoredTensor } from './safetensors.js';
import { Tensor } from './tensor.js';

/** Outcome of a bridge operation. */
export interface BridgeReport {
  /** True iff every adapter tensor matched its expected shape. */
  shapesOk: boolean;
  /** Max-abs logit difference on the fixed prompt, base vs adapted. */
  zeroBLogitDrift?: number;
  /** Training steps actually run. */
  stepsRun: number;
  /** Smoothed training loss at the last step run. */
  finalLoss?: number;
  /** Whether the smoothed loss at the end beat the smoothed loss at step 20. */
  lossImproved?: boolean;
  /** Diagnostics when the training environment cannot run. */
  environmentUnavailable?: string;
}

/** Serialize a report with the stable snake_case field names. */
export function reportToJson(report: BridgeReport): Record<string, unknown> {
  const json: Record<string, unknown> = {
    shapes_ok: report.shapesOk,
    steps_run: report.stepsRun,
  };
  if (report.zeroBLogitDrift !== undefined) json['zero_b_logit_drift'] = report.zeroBLogitDrift;
  if (report.finalLoss !== undefined) json['final_loss'] = report.finalLoss;
  if (report.lossImproved !== undefined) json['loss_improved'] = report.lossImproved;
  if (report.environmentUnavailable !== undefined) {
    json['environment_unavailable'] = report.environmentUnavailable;
  }
  return json;
}

/** The fixed prompt used for base-vs-adapted logit drift measurements. */
export const DRIFT_PROMPT = 'The quick brown fox jumps over the lazy dog.';

/** Byte-level tokens of the fixed drift prompt. */
export function promptTokens(vocabSize: number): number[] {
  const tokens = [...Buffer.from(DRIFT_PROMPT, 'utf-8')];
  const widest = Math.max(...tokens);
  if (widest >= vocabSize) {
    throw new ShapeMismatchError(
      `vocabulary of ${vocabSize} cannot encode the fixed drift prompt (needs ${widest + 1})`,
    );
  }
  return tokens;
}

/** Adapter tensor name for one (layer, kind, role), matching the exporter. */
export function adapterTensorName(layer: number, kind: ProjectionKind, role: 'A' | 'B'): string {
  const block = kind === 'q' || kind === 'k' || kind === 'v' || kind === 'o' ? 'self_attn' : 'mlp';
  return `base_model.model.model.layers.${layer}.${block}.${kind}_proj.lora_${role}.weight`;
}

/** One injected projection, addressable for training and read-back. */
export interface AdapterHandle {
  layer: number;
  kind: ProjectionKind;
  module: LoraLinear;
}

export interface LoadResult {
  manifest: AdapterManifest;
  report: BridgeReport;
  handles: AdapterHandle[];
}

function manifestKinds(manifest: AdapterManifest): ProjectionKind[] {
  return PROJECTION_KINDS.filter((kind) => manifest.dims[kind] !== undefined);
}

function checkContract(
  manifest: AdapterManifest,
  tensors: Map<string, StoredTensor>,
  model: CausalLM,
): void {
  const missing: string[] = [];
  const problems: string[] = [];

  if (manifest.num_layers > model.layers.length) {
    problems.push(`adapter spans ${manifest.num_layers} layers, model has ${model.layers.length}`);
  }

  const expected = new Set<string>();
  for (let layer = 0; layer < manifest.num_layers; layer++) {
    for (const kind of manifestKinds(manifest)) {
      const [outDim, inDim] = manifest.dims[kind]!;
      const shapes: Array<['A' | 'B', number[]]> = [
        ['A', [manifest.rank, inDim]],
        ['B', [outDim, manifest.rank]],
      ];
      for (const [role, shape] of shapes) {
        const name = adapterTensorName(layer, kind, role);
        expected.add(name);
        const stored = tensors.get(name);
        if (stored === undefined) {
          missing.push(name);
          continue;
        }
        if (stored.shape.length !== 2 || stored.shape[0] !== shape[0] || stored.shape[1] !== shape[1]) {
          problems.push(`${name}: shape [${stored.shape}], expected [${shape}]`);
        }
        if (stored.dtype !== 'F32') {
          problems.push(`${name}: dtype ${stored.dtype}, expected F32`);
        }
      }
    }
  }
  for (const name of [...tensors.keys()].sort()) {
    if (!expected.has(name)) problems.push(`unexpected tensor ${name}`);
  }

  // The manifest records the (out, in) dimensions the adapter was built
  // for; they must agree with the base model's actual projections.
  for (const kind of manifestKinds(manifest)) {
    const [outDim, inDim] = manifest.dims[kind]!;
    if (manifest.num_layers > model.layers.length) break;
    const weight = baseWeightOf(projectionOf(model.layers[0], kind));
    if (weight.rows !== outDim || weight.cols !== inDim) {
      problems.push(
        `${kind}: adapter built for (${outDim}, ${inDim}), base model has (${weight.rows}, ${weight.cols})`,
      );
    }
  }

  if (missing.length > 0) {
    throw new MissingTensorError(`adapter is missing ${missing.length} tensor(s): ${missing[0]}, ...`);
  }
  if (problems.length > 0) {
    throw new ShapeMismatchError(problems.join('; '));
  }
}

/**
 * Load an exported adapter initialization into a base model.
 *
 * Verifies the sidecar manifest, the tensor file's content digest, and
 * every shape against both the manifest and the base model, then injects
 * the low-rank factors and measures logit drift on the fixed prompt.
 * Raises `MissingTensorError` / `ShapeMismatchError` on contract
 * violations, so a returned report always has `shapesOk` true.
 */
export function loadAdapterInit(adapterPath: string, model: CausalLM): LoadResult {
  const manifest = readAdapterManifest(adapterPath);
  const file = readSafetensors(adapterPath);

  const digest = tensorMapDigest(file.tensors);
  if (digest !== manifest.tensor_digest) {
    throw new UnreadableFileError(
      `${adapterPath}: content digest ${digest.slice(0, 16)}... does not match ` +
        `manifest tensor_digest ${manifest.tensor_digest.slice(0, 16)}...`,
    );
  }

  checkContract(manifest, file.tensors, model);

  const prompt = promptTokens(model.config.vocabSize);
  const before = model.logits(prompt);

  const scaling = manifest.alpha / manifest.rank;
  const handles: AdapterHandle[] = [];
  for (let layer = 0; layer < manifest.num_layers; layer++) {
    for (const kind of manifestKinds(manifest)) {
      const loraA = file.tensors.get(adapterTensorName(layer, kind, 'A'))!;
      const loraB = file.tensors.get(adapterTensorName(layer, kind, 'B'))!;
      const block = model.layers[layer];
      const module = new LoraLinear(
        baseWeightOf(projectionOf(block, kind)),
        Tensor.fromFloat32(loraA.data as Float32Array, loraA.shape),
        Tensor.fromFloat32(loraB.data as Float32Array, loraB.shape),
        scaling,
      );
      setProjection(block, kind, module);
      handles.push({ layer, kind, module });
    }
  }

  const after = model.logits(prompt);
  let drift = 0;
  for (let i = 0; i < before.size; i++) {
    drift = Math.max(drift, Math.abs(before.data[i] - after.data[i]));
  }

  return {
    manifest,
    report: { shapesOk: true, zeroBLogitDrift: drift, stepsRun: 0 },
    handles,
  };
}
