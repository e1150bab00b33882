/**
 * A short LoRA fine-tuning loop over a byte-tokenized text dataset.
 *
 * Only the injected low-rank factors train; the base model stays frozen.
 * Defaults: 200 steps, batch 2, gradient accumulation 2, dropout 0.2,
 * Adam at 1e-4 with a 10-step linear warmup.  Losses are smoothed with a
 * trailing 10-step mean so the step-20 vs final comparison is not at the
 * mercy of single-batch noise.
 */

import * as fs from 'node:fs';

import type { AdapterHandle, BridgeReport } from './adapter.js';
import { EnvironmentUnavailableError } from './errors.js';
import type { CausalLM } from './model.js';
import { Rng, Tape, Tensor, add, crossEntropy, scale } from './tensor.js';

export interface TrainOptions {
  steps: number;
  batchSize: number;
  gradAccumulation: number;
  sequenceLength: number;
  learningRate: number;
  warmupSteps: number;
  dropout: number;
  seed: number;
  smoothingWindow: number;
}

export const DEFAULT_TRAIN_OPTIONS: TrainOptions = {
  steps: 200,
  batchSize: 2,
  gradAccumulation: 2,
  sequenceLength: 64,
  learningRate: 1e-4,
  warmupSteps: 10,
  dropout: 0.2,
  seed: 0,
  smoothingWindow: 10,
};

/** A training report plus the raw per-step loss series. */
export interface TrainReport extends BridgeReport {
  losses: number[];
}

function loadByteDataset(path: string, vocabSize: number, sequenceLength: number): Uint8Array {
  let bytes: Buffer;
  try {
    bytes = fs.readFileSync(path);
  } catch (err) {
    throw new EnvironmentUnavailableError(`dataset not readable: ${(err as Error).message}`);
  }
  if (bytes.length < sequenceLength + 1) {
    throw new EnvironmentUnavailableError(
      `dataset holds ${bytes.length} bytes, need at least ${sequenceLength + 1} for one window`,
    );
  }
  let widest = 0;
  for (const byte of bytes) widest = Math.max(widest, byte);
  if (widest >= vocabSize) {
    throw new EnvironmentUnavailableError(
      `dataset uses byte ${widest} but the model vocabulary holds only ${vocabSize} tokens`,
    );
  }
  return new Uint8Array(bytes);
}

/** Trailing-window mean of `losses[..step)` (1-based step). */
function smoothedLoss(losses: number[], step: number, window: number): number {
  const end = Math.min(step, losses.length);
  const start = Math.max(0, end - window);
  let total = 0;
  for (let i = start; i < end; i++) total += losses[i];
  return total / (end - start);
}

class Adam {
  private m: Float64Array[];
  private v: Float64Array[];
  private t = 0;
  private readonly beta1 = 0.9;
  private readonly beta2 = 0.999;
  private readonly eps = 1e-8;

  constructor(private params: Tensor[]) {
    this.m = params.map((p) => new Float64Array(p.size));
    this.v = params.map((p) => new Float64Array(p.size));
  }

  step(learningRate: number): void {
    this.t += 1;
    const bias1 = 1 - this.beta1 ** this.t;
    const bias2 = 1 - this.beta2 ** this.t;
    this.params.forEach((param, idx) => {
      const grad = param.grad;
      if (!grad) return;
      const m = this.m[idx];
      const v = this.v[idx];
      for (let i = 0; i < param.size; i++) {
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * grad[i];
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * grad[i] * grad[i];
        param.data[i] -= (learningRate * (m[i] / bias1)) / (Math.sqrt(v[i] / bias2) + this.eps);
      }
    });
  }
}

/**
 * Run a short next-byte fine-tune of the injected low-rank factors.
 *
 * Environment problems (unreadable dataset, vocabulary too small for the
 * byte tokenizer) come back as a report with `environmentUnavailable`
 * set, not as an exception.  `steps: 0` is a no-op report.
 */
export function runShortFinetune(
  model: CausalLM,
  handles: AdapterHandle[],
  datasetPath: string,
  options: Partial<TrainOptions> = {},
  onStep?: (step: number, loss: number) => void,
): TrainReport {
  const opts: TrainOptions = { ...DEFAULT_TRAIN_OPTIONS, ...options };

  let data: Uint8Array;
  try {
    data = loadByteDataset(datasetPath, model.config.vocabSize, opts.sequenceLength);
  } catch (err) {
    if (err instanceof EnvironmentUnavailableError) {
      return { shapesOk: true, stepsRun: 0, losses: [], environmentUnavailable: err.message };
    }
    throw err;
  }

  if (opts.steps === 0) {
    return { shapesOk: true, stepsRun: 0, losses: [] };
  }

  const params = handles.flatMap((handle) => [handle.module.loraA, handle.module.loraB]);
  const optimizer = new Adam(params);
  const rng = new Rng(opts.seed);
  for (const handle of handles) handle.module.dropoutP = opts.dropout;

  const losses: number[] = [];
  try {
    for (let step = 1; step <= opts.steps; step++) {
      for (const param of params) param.zeroGrad();

      let stepLoss = 0;
      for (let micro = 0; micro < opts.gradAccumulation; micro++) {
        const tape = new Tape();
        let batchLoss: Tensor | null = null;
        for (let b = 0; b < opts.batchSize; b++) {
          const offset = rng.nextInt(data.length - opts.sequenceLength - 1);
          const inputs = [...data.subarray(offset, offset + opts.sequenceLength)];
          const targets = [...data.subarray(offset + 1, offset + opts.sequenceLength + 1)];
          const loss = crossEntropy(model.forward(inputs, tape, rng), targets, tape);
          batchLoss = batchLoss === null ? loss : add(batchLoss, loss, tape);
        }
        // Dividing by sequences-per-step makes the summed micro-batch
        // gradients equal the gradient of the full-step mean loss.
        const microLoss = scale(batchLoss!, 1 / (opts.batchSize * opts.gradAccumulation), tape);
        stepLoss += microLoss.item();
        microLoss.ensureGrad()[0] = 1;
        tape.backprop();
      }

      const warmup = Math.min(1, step / Math.max(1, opts.warmupSteps));
      optimizer.step(opts.learningRate * warmup);
      losses.push(stepLoss);
      onStep?.(step, stepLoss);
    }
  } finally {
    for (const handle of handles) handle.module.dropoutP = 0;
  }

  const finalLoss = smoothedLoss(losses, opts.steps, opts.smoothingWindow);
  const report: TrainReport = {
    shapesOk: true,
    stepsRun: opts.steps,
    finalLoss,
    losses,
  };
  if (opts.steps >= 20) {
    report.lossImproved = finalLoss < smoothedLoss(losses, 20, opts.smoothingWindow);
  }
  return report;
}
