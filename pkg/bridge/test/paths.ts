import * as path from 'node:path';
import { fileURLToPath } from 'node:url';

const here = path.dirname(fileURLToPath(import.meta.url));

/** Fixture tree produced by `scripts/make_fixtures.py` in global setup. */
export const FIXTURES = path.join(here, '.fixtures');

export const BASE_DIR = path.join(FIXTURES, 'base');
export const BASE_WRONG_DIR = path.join(FIXTURES, 'base-wrong');
export const ADAPTER_ZERO_B = path.join(FIXTURES, 'adapter-zero-b', 'adapter.safetensors');
export const ADAPTER_FULL = path.join(FIXTURES, 'adapter-full', 'adapter.safetensors');
export const DATASET = path.join(FIXTURES, 'dataset.txt');
