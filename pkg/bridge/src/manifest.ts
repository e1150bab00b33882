/**
 * The adapter sidecar manifest: schema, loading, and the content digest
 * that ties a manifest to its tensor file.
 */

import * as crypto from 'node:crypto';
import * as fs from 'node:fs';

import { z } from 'zod';

import { UnreadableFileError } from './errors.js';
import type { StoredTensor } from './safetensors.js';

/** The seven projection kinds an adapter can target. */
export const PROJECTION_KINDS = ['q', 'k', 'v', 'o', 'gate', 'up', 'down'] as const;

export type ProjectionKind = (typeof PROJECTION_KINDS)[number];

const kindSchema = z.enum(PROJECTION_KINDS);

const sha256Schema = z.string().regex(/^[0-9a-f]{64}$/);

const dimPairSchema = z.tuple([z.number().int().min(1), z.number().int().min(1)]);

const dimsSchema = z
  .record(z.string(), dimPairSchema)
  .refine((dims) => Object.keys(dims).length >= 1, 'dims must name at least one kind')
  .refine(
    (dims) => Object.keys(dims).every((key) => (PROJECTION_KINDS as readonly string[]).includes(key)),
    'dims keys must be projection kinds',
  );

export const adapterManifestSchema = z.object({
  format: z.literal('lora-init-manifest'),
  version: z.literal(1),
  target_model_id: z.string(),
  table_model_id: z.string(),
  table_digest: sha256Schema,
  num_layers: z.number().int().min(1),
  rank: z.number().int().min(1),
  alpha: z.number().positive(),
  mode: z.enum(['full', 'zero-b']),
  seed: z.number().int(),
  dims: dimsSchema,
  groups: z
    .array(
      z.object({
        index: z.number().int().min(0),
        reference: kindSchema,
        kinds: z.array(kindSchema).min(1),
      }),
    )
    .min(1),
  generator: z.object({
    template_mu: z.number(),
    template_sigma: z.number(),
    increment_mu: z.number(),
    increment_sigma: z.number(),
    template_correlation: z.number(),
    count_law: z.record(z.string(), z.unknown()),
  }),
  tensor_digest: sha256Schema,
});

export type AdapterManifest = z.infer<typeof adapterManifestSchema>;

/** Path of the sidecar manifest that describes an adapter tensor file. */
export function manifestPathFor(adapterPath: string): string {
  return `${adapterPath}.manifest.json`;
}

/** Load and validate the sidecar manifest of an adapter tensor file. */
export function readAdapterManifest(adapterPath: string): AdapterManifest {
  const path = manifestPathFor(adapterPath);
  let text: string;
  try {
    text = fs.readFileSync(path, 'utf-8');
  } catch (err) {
    throw new UnreadableFileError(`cannot read ${path}: ${(err as Error).message}`);
  }
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new UnreadableFileError(`${path}: malformed JSON: ${(err as Error).message}`);
  }
  const parsed = adapterManifestSchema.safeParse(raw);
  if (!parsed.success) {
    const issue = parsed.error.issues[0];
    const where = issue.path.length > 0 ? ` at ${issue.path.join('.')}` : '';
    throw new UnreadableFileError(`${path}: invalid manifest${where}: ${issue.message}`);
  }
  return parsed.data;
}

const DTYPE_NAMES: Record<string, string> = {
  F64: 'float64',
  F32: 'float32',
  I64: 'int64',
  I32: 'int32',
};

/** Format a shape the way the manifest's digest expects: `(4, 32)`, `(4,)`, `()`. */
function shapeRepr(shape: number[]): string {
  if (shape.length === 0) return '()';
  if (shape.length === 1) return `(${shape[0]},)`;
  return `(${shape.join(', ')})`;
}

/**
 * Order-independent digest of a tensor map (names, dtypes, shapes, raw
 * bytes).  Matches the `tensor_digest` recorded in adapter manifests, so a
 * recomputed value proves the tensor file is the one the manifest
 * describes.
 */
export function tensorMapDigest(tensors: Map<string, StoredTensor>): string {
  const hash = crypto.createHash('sha256');
  for (const name of [...tensors.keys()].sort()) {
    const tensor = tensors.get(name)!;
    hash.update(name, 'utf-8');
    hash.update(DTYPE_NAMES[tensor.dtype], 'utf-8');
    hash.update(shapeRepr(tensor.shape), 'utf-8');
    hash.update(tensor.raw);
  }
  return hash.digest('hex');
}
