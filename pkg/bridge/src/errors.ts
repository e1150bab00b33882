/** Error taxonomy for the bridge. */

/** Base class for every error raised by this package. */
export class BridgeError extends Error {
  constructor(message: string) {
    super(message);
    this.name = new.target.name;
  }
}

/** A file exists but cannot be parsed as what it claims to be. */
export class UnreadableFileError extends BridgeError {}

/** An adapter or base tensor has a shape other than the contracted one. */
export class ShapeMismatchError extends BridgeError {}

/** The adapter file lacks a tensor its manifest promises. */
export class MissingTensorError extends BridgeError {}

/**
 * The training environment cannot run (missing dataset, incompatible
 * tokenizer/vocab, ...).  Callers are expected to convert this into a
 * report rather than crash.
 */
export class EnvironmentUnavailableError extends BridgeError {}
