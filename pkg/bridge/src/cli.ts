#!/usr/bin/env node
/**
 * Command-line interface.
 *
 * Two subcommands:
 *
 * * `bridge load  --adapter <path> --base <model>` — verify and inject an
 *   exported adapter initialization, reporting logit drift on a fixed
 *   prompt.
 * * `bridge train --adapter <path> --base <model> --dataset <text file>
 *   --steps N` — load, then run the short fine-tuning recipe and report
 *   whether the smoothed loss improved.
 *
 * Exit codes: 0 on success (including an environment-unavailable training
 * report), 1 on adapter contract violations (shape or missing-tensor), 2
 * on unreadable inputs or bad usage.
 */

import * as fs from 'node:fs';
import { pathToFileURL } from 'node:url';

import yargs from 'yargs';

import { loadAdapterInit, reportToJson, type BridgeReport } from './adapter.js';
import {
  BridgeError,
  MissingTensorError,
  ShapeMismatchError,
} from './errors.js';
import { CausalLM } from './model.js';
import { DEFAULT_TRAIN_OPTIONS, runShortFinetune } from './train.js';

interface LoadArgs {
  adapter: string;
  base: string;
  report?: string;
}

interface TrainArgs extends LoadArgs {
  dataset: string;
  steps: number;
  seed: number;
  batchSize: number;
  gradAccumulation: number;
  sequenceLength: number;
  learningRate: number;
  warmupSteps: number;
  dropout: number;
}

function writeReport(report: BridgeReport, path?: string): void {
  if (!path) return;
  fs.writeFileSync(path, `${JSON.stringify(reportToJson(report), null, 2)}\n`);
}

function cmdLoad(args: LoadArgs): number {
  const model = CausalLM.fromCheckpoint(args.base);
  const { manifest, report } = loadAdapterInit(args.adapter, model);
  console.log(
    `loaded ${manifest.mode} adapter for ${manifest.target_model_id || 'unnamed model'}: ` +
      `${manifest.num_layers} layers, rank ${manifest.rank}, alpha ${manifest.alpha}`,
  );
  console.log(`shapes_ok ${report.shapesOk}`);
  console.log(`zero_b_logit_drift ${report.zeroBLogitDrift!.toExponential(3)}`);
  writeReport(report, args.report);
  return 0;
}

function cmdTrain(args: TrainArgs): number {
  const model = CausalLM.fromCheckpoint(args.base);
  const { manifest, handles, report: loadReport } = loadAdapterInit(args.adapter, model);
  console.log(
    `loaded ${manifest.mode} adapter: ${handles.length} projections, ` +
      `drift ${loadReport.zeroBLogitDrift!.toExponential(3)}`,
  );

  const logEvery = Math.max(1, Math.floor(args.steps / 10));
  const report = runShortFinetune(
    model,
    handles,
    args.dataset,
    {
      steps: args.steps,
      seed: args.seed,
      batchSize: args.batchSize,
      gradAccumulation: args.gradAccumulation,
      sequenceLength: args.sequenceLength,
      learningRate: args.learningRate,
      warmupSteps: args.warmupSteps,
      dropout: args.dropout,
    },
    (step, loss) => {
      if (step % logEvery === 0 || step === 1) {
        console.log(`step ${step}: loss ${loss.toFixed(4)}`);
      }
    },
  );
  report.zeroBLogitDrift = loadReport.zeroBLogitDrift;

  if (report.environmentUnavailable !== undefined) {
    console.error(`environment unavailable: ${report.environmentUnavailable}`);
  } else if (report.stepsRun === 0) {
    console.log('no steps requested; nothing trained');
  } else {
    console.log(`ran ${report.stepsRun} steps, smoothed final loss ${report.finalLoss!.toFixed(4)}`);
    if (report.lossImproved !== undefined) {
      console.log(`smoothed loss improved over step 20: ${report.lossImproved}`);
    }
  }
  writeReport(report, args.report);
  return 0;
}

/** Run the CLI on the given argv (without the node/script prefix). */
export async function run(argv: string[]): Promise<number> {
  let code = 2;
  const sharedOptions = {
    adapter: { type: 'string' as const, demandOption: true, describe: 'adapter tensor file (sidecar manifest beside it)' },
    base: { type: 'string' as const, demandOption: true, describe: 'base checkpoint: directory or tensor file with config.json beside it' },
    report: { type: 'string' as const, describe: 'write the bridge report JSON here' },
  };
  try {
    await yargs(argv)
      .scriptName('bridge')
      .usage('$0 <command> [options]')
      .command(
        'load',
        'verify an exported adapter and inject it into a base model',
        (cmd) => cmd.options(sharedOptions),
        (parsed) => {
          code = cmdLoad(parsed as unknown as LoadArgs);
        },
      )
      .command(
        'train',
        'load an adapter, then fine-tune its low-rank factors briefly',
        (cmd) =>
          cmd.options({
            ...sharedOptions,
            dataset: { type: 'string' as const, demandOption: true, describe: 'byte-tokenized text file' },
            steps: { type: 'number' as const, default: DEFAULT_TRAIN_OPTIONS.steps },
            seed: { type: 'number' as const, default: DEFAULT_TRAIN_OPTIONS.seed },
            'batch-size': { type: 'number' as const, default: DEFAULT_TRAIN_OPTIONS.batchSize },
            'grad-accumulation': { type: 'number' as const, default: DEFAULT_TRAIN_OPTIONS.gradAccumulation },
            'sequence-length': { type: 'number' as const, default: DEFAULT_TRAIN_OPTIONS.sequenceLength },
            'learning-rate': { type: 'number' as const, default: DEFAULT_TRAIN_OPTIONS.learningRate },
            'warmup-steps': { type: 'number' as const, default: DEFAULT_TRAIN_OPTIONS.warmupSteps },
            dropout: { type: 'number' as const, default: DEFAULT_TRAIN_OPTIONS.dropout },
          }),
        (parsed) => {
          code = cmdTrain(parsed as unknown as TrainArgs);
        },
      )
      .demandCommand(1, 'a command is required')
      .strict()
      .exitProcess(false)
      .fail(false)
      .parseAsync();
  } catch (err) {
    if (err instanceof ShapeMismatchError || err instanceof MissingTensorError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    if (err instanceof BridgeError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
  return code;
}

const entryPoint = process.argv[1];
if (entryPoint !== undefined && import.meta.url === pathToFileURL(fs.realpathSync(entryPoint)).href) {
  run(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
