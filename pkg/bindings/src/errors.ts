/**
 * Error taxonomy, mirrored 1:1 from the engine.
 *
 * The CLI reports failures on stderr as "error: <Name>: <message>"; the
 * <Name> token is the engine class name and selects the class thrown
 * here, so callers can catch the same conditions they would catch in a
 * Python pipeline. Class names keep the engine spelling plus an Error
 * suffix per JS convention.
 */

export class SeqSqueezeError extends Error {
  constructor(message: string) {
    super(message);
    this.name = new.target.name;
  }
}

/** Input matrix contains NaN or Inf. */
export class NonFiniteInputError extends SeqSqueezeError {}

/** Input matrix has zero rows or zero columns. */
export class EmptyInputError extends SeqSqueezeError {}

/** Vectors or tables that must share a dimension do not. */
export class DimensionMismatchError extends SeqSqueezeError {}

/** Sequence too short to split into sources and destinations. */
export class TooShortError extends SeqSqueezeError {}

/** A merge pass was asked for more merges than have in-window candidates. */
export class InsufficientMergeableError extends SeqSqueezeError {}

/** No source can legally merge while the sequence is still above target. */
export class CannotReachTargetError extends SeqSqueezeError {}

/** The requested keep ratio cannot be realized by this method. */
export class UnavailableRatioError extends SeqSqueezeError {}

/** Provenance or sequence does not match the synthesis spec it claims. */
export class SpecMismatchError extends SeqSqueezeError {}

/** Array file is not a well-formed v1.0 container. */
export class BadMagicError extends SeqSqueezeError {}

/** Array file declares a dtype or memory layout outside the accepted subset. */
export class UnsupportedDtypeError extends SeqSqueezeError {}

/** Array file shape is not a 2-D shape of non-negative integers. */
export class UnsupportedRankError extends SeqSqueezeError {}

/** Array file payload length disagrees with the header-declared size. */
export class TruncatedPayloadError extends SeqSqueezeError {}

/** Header-declared payload exceeds the allocation cap. */
export class OversizeArrayError extends SeqSqueezeError {}

/** Provenance document is missing required keys or has malformed values. */
export class SchemaViolationError extends SeqSqueezeError {}

/** Underlying filesystem or process operation failed. */
export class IoFailureError extends SeqSqueezeError {}

/** A flag or parameter was rejected before any work started. */
export class InvalidArgumentError extends SeqSqueezeError {}

const BY_ENGINE_NAME: Record<string, new (message: string) => SeqSqueezeError> = {
  NonFiniteInput: NonFiniteInputError,
  EmptyInput: EmptyInputError,
  DimensionMismatch: DimensionMismatchError,
  TooShort: TooShortError,
  InsufficientMergeable: InsufficientMergeableError,
  CannotReachTarget: CannotReachTargetError,
  UnavailableRatio: UnavailableRatioError,
  SpecMismatch: SpecMismatchError,
  BadMagic: BadMagicError,
  UnsupportedDtype: UnsupportedDtypeError,
  UnsupportedRank: UnsupportedRankError,
  TruncatedPayload: TruncatedPayloadError,
  OversizeArray: OversizeArrayError,
  SchemaViolation: SchemaViolationError,
  IoFailure: IoFailureError,
  InvalidArgument: InvalidArgumentError,
};

/** Build the mapped error for an engine error name; base class for unknown names. */
export function errorFromName(name: string, message: string): SeqSqueezeError {
  const cls = BY_ENGINE_NAME[name];
  return cls ? new cls(message) : new SeqSqueezeError(`${name}: ${message}`);
}

/**
 * Turn captured CLI stderr into the mapped error.
 * Expects the engine's "error: <Name>: <message>" shape; anything else
 * is wrapped verbatim in the base class so no failure is swallowed.
 */
export function errorFromStderr(stderr: string, fallback: string): SeqSqueezeError {
  const line = stderr
    .split("\n")
    .map((s) => s.trim())
    .find((s) => s.startsWith("error: "));
  if (!line) return new SeqSqueezeError(fallback + (stderr ? `: ${stderr.trim()}` : ""));
  const rest = line.slice("error: ".length);
  const sep = rest.indexOf(": ");
  if (sep < 0) return new SeqSqueezeError(rest);
  return errorFromName(rest.slice(0, sep), rest.slice(sep + 2));
}
