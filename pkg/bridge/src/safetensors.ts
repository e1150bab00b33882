/**
 * Reader for the safetensors single-file tensor container.
 *
 * Layout: an 8-byte little-endian header length, a JSON header mapping
 * tensor names to `{dtype, shape, data_offsets}` (offsets relative to the
 * start of the payload), then the raw little-endian row-major payload.
 */

import * as fs from 'node:fs';
import * as os from 'node:os';

import { UnreadableFileError } from './errors.js';

export type Dtype = 'F64' | 'F32' | 'I64' | 'I32';

export type TensorData = Float64Array | Float32Array | BigInt64Array | Int32Array;

/** One tensor as stored: decoded values plus the exact bytes on disk. */
export interface StoredTensor {
  dtype: Dtype;
  shape: number[];
  /** Decoded values in row-major order. */
  data: TensorData;
  /** The raw little-endian payload bytes, for digests and round-trips. */
  raw: Uint8Array;
}

/** Parsed contents of a container file. */
export interface TensorFile {
  tensors: Map<string, StoredTensor>;
  metadata: Record<string, string>;
}

const BYTES_PER_ITEM: Record<Dtype, number> = {
  F64: 8,
  F32: 4,
  I64: 8,
  I32: 4,
};

function decode(dtype: Dtype, bytes: Uint8Array): TensorData {
  // Reinterpreting bytes as typed arrays assumes a little-endian host,
  // which Node supports on every platform it ships for; fail loudly on
  // the exotic rest.
  if (os.endianness() !== 'LE') {
    throw new UnreadableFileError('tensor decoding requires a little-endian host');
  }
  // Copy into a fresh ArrayBuffer so the view is aligned regardless of the
  // tensor's offset inside the file.
  const buf = bytes.slice().buffer;
  switch (dtype) {
    case 'F64':
      return new Float64Array(buf);
    case 'F32':
      return new Float32Array(buf);
    case 'I64':
      return new BigInt64Array(buf);
    case 'I32':
      return new Int32Array(buf);
  }
}

function elementCount(shape: number[]): number {
  return shape.reduce((acc, dim) => acc * dim, 1);
}

/**
 * Read a container file and return its tensors and metadata.
 *
 * Supports F64/F32/I64/I32 tensors; anything else is rejected rather than
 * silently mangled.
 */
export function readSafetensors(path: string): TensorFile {
  let file: Buffer;
  try {
    file = fs.readFileSync(path);
  } catch (err) {
    throw new UnreadableFileError(`cannot read ${path}: ${(err as Error).message}`);
  }
  if (file.length < 8) {
    throw new UnreadableFileError(`${path}: too short for a header length`);
  }
  const headerLen = Number(file.readBigUInt64LE(0));
  if (8 + headerLen > file.length) {
    throw new UnreadableFileError(`${path}: truncated header`);
  }

  let header: unknown;
  try {
    header = JSON.parse(file.subarray(8, 8 + headerLen).toString('utf-8'));
  } catch (err) {
    throw new UnreadableFileError(`${path}: malformed JSON header: ${(err as Error).message}`);
  }
  if (typeof header !== 'object' || header === null || Array.isArray(header)) {
    throw new UnreadableFileError(`${path}: header is not a JSON object`);
  }

  const payload = file.subarray(8 + headerLen);
  const tensors = new Map<string, StoredTensor>();
  let metadata: Record<string, string> = {};

  for (const [name, entry] of Object.entries(header as Record<string, unknown>)) {
    if (name === '__metadata__') {
      if (typeof entry !== 'object' || entry === null) {
        throw new UnreadableFileError(`${path}: malformed __metadata__`);
      }
      metadata = entry as Record<string, string>;
      continue;
    }
    const { dtype, shape, data_offsets: offsets } = entry as {
      dtype?: unknown;
      shape?: unknown;
      data_offsets?: unknown;
    };
    if (typeof dtype !== 'string' || !(dtype in BYTES_PER_ITEM)) {
      throw new UnreadableFileError(`${path}: unsupported dtype ${String(dtype)} for tensor ${name}`);
    }
    if (
      !Array.isArray(shape) ||
      shape.some((dim) => typeof dim !== 'number' || !Number.isInteger(dim) || dim < 0)
    ) {
      throw new UnreadableFileError(`${path}: malformed shape for tensor ${name}`);
    }
    if (
      !Array.isArray(offsets) ||
      offsets.length !== 2 ||
      offsets.some((off) => typeof off !== 'number' || !Number.isInteger(off)) ||
      offsets[0] < 0 ||
      offsets[0] > offsets[1] ||
      offsets[1] > payload.length
    ) {
      throw new UnreadableFileError(`${path}: bad data offsets for tensor ${name}`);
    }
    const tag = dtype as Dtype;
    const dims = shape as number[];
    const span = (offsets[1] as number) - (offsets[0] as number);
    const expected = elementCount(dims) * BYTES_PER_ITEM[tag];
    if (span !== expected) {
      throw new UnreadableFileError(
        `${path}: tensor ${name}: payload span ${span} bytes, expected ${expected}`,
      );
    }
    const raw = new Uint8Array(payload.subarray(offsets[0] as number, offsets[1] as number));
    tensors.set(name, { dtype: tag, shape: dims, data: decode(tag, raw), raw });
  }

  return { tensors, metadata };
}
