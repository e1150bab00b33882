export {
  DRIFT_PROMPT,
  adapterTensorName,
  loadAdapterInit,
  promptTokens,
  reportToJson,
  type AdapterHandle,
  type BridgeReport,
  type LoadResult,
} from './adapter.js';
export {
  BridgeError,
  EnvironmentUnavailableError,
  MissingTensorError,
  ShapeMismatchError,
  UnreadableFileError,
} from './errors.js';
export {
  PROJECTION_KINDS,
  adapterManifestSchema,
  manifestPathFor,
  readAdapterManifest,
  tensorMapDigest,
  type AdapterManifest,
  type ProjectionKind,
} from './manifest.js';
export {
  CausalLM,
  Linear,
  LoraLinear,
  baseWeightOf,
  modelConfigFromJson,
  projectionOf,
  setProjection,
  type ModelConfig,
  type ProjectionModule,
} from './model.js';
export { readSafetensors, type StoredTensor, type TensorFile } from './safetensors.js';
export { Rng, Tape, Tensor } from './tensor.js';
export {
  DEFAULT_TRAIN_OPTIONS,
  runShortFinetune,
  type TrainOptions,
  type TrainReport,
} from './train.js';
