/**
 * Strict codec for the array container the engine reads and writes.
 *
 * Same accepted subset as the engine: v1.0 framing, little-endian
 * float32, rank 2, row-major, header block padded to a multiple of 64
 * bytes and newline-terminated. Same error mapping too, so a file this
 * codec rejects is rejected by the engine for the same reason. One
 * deliberate narrowing: the header dict is required in the key order
 * every known writer emits (descr, fortran_order, shape); a reordered
 * but otherwise valid header is treated as unreadable framing.
 */

import {
  BadMagicError,
  EmptyInputError,
  InvalidArgumentError,
  NonFiniteInputError,
  OversizeArrayError,
  TruncatedPayloadError,
  UnsupportedDtypeError,
  UnsupportedRankError,
} from "./errors.js";

export interface Matrix {
  data: Float32Array;
  rows: number;
  cols: number;
}

const MAGIC = Buffer.from("\x93NUMPY", "latin1");
const VERSION = Buffer.from([1, 0]);
const HEADER_BLOCK = 64;
export const DEFAULT_MAX_BYTES = 1 << 30;

const HOST_LE = new Uint8Array(new Uint16Array([1]).buffer)[0] === 1;

const HEADER_SHAPE =
  /^\{'descr': '([^']*)', 'fortran_order': (True|False), 'shape': \((.*)\), \}$/;

/** Serialize a matrix into container bytes, bit-identical to the engine's writer. */
export function encodeMatrix(matrix: Matrix): Buffer {
  const { data, rows, cols } = matrix;
  if (!(data instanceof Float32Array)) {
    throw new InvalidArgumentError("matrix data must be a Float32Array, refusing silent conversion");
  }
  if (!Number.isInteger(rows) || !Number.isInteger(cols) || rows < 0 || cols < 0) {
    throw new InvalidArgumentError(`rows/cols must be non-negative integers, got ${rows}x${cols}`);
  }
  if (data.length !== rows * cols) {
    throw new InvalidArgumentError(
      `data holds ${data.length} values, shape ${rows}x${cols} needs ${rows * cols}`,
    );
  }
  for (let k = 0; k < data.length; k++) {
    if (!Number.isFinite(data[k])) throw new NonFiniteInputError("refusing to write non-finite values");
  }

  const dict = `{'descr': '<f4', 'fortran_order': False, 'shape': (${rows}, ${cols}), }`;
  const unpadded = MAGIC.length + VERSION.length + 2 + dict.length + 1;
  const pad = (HEADER_BLOCK - (unpadded % HEADER_BLOCK)) % HEADER_BLOCK;
  const header = Buffer.from(dict + " ".repeat(pad) + "\n", "latin1");
  const lenField = Buffer.alloc(2);
  lenField.writeUInt16LE(header.length, 0);

  let payload: Buffer;
  if (HOST_LE) {
    payload = Buffer.from(data.buffer, data.byteOffset, data.byteLength);
  } else {
    payload = Buffer.alloc(data.length * 4);
    for (let k = 0; k < data.length; k++) payload.writeFloatLE(data[k]!, k * 4);
  }
  return Buffer.concat([MAGIC, VERSION, lenField, header, payload]);
}

/** Parse container bytes into a fresh matrix, enforcing the accepted subset. */
export function decodeMatrix(raw: Buffer, maxBytes: number = DEFAULT_MAX_BYTES): Matrix {
  if (raw.length < 8 || !raw.subarray(0, 6).equals(MAGIC)) {
    throw new BadMagicError("not an array container (bad magic)");
  }
  if (raw[6] !== 1 || raw[7] !== 0) {
    throw new BadMagicError(`unsupported container version ${raw[6]}.${raw[7]}, only 1.0 accepted`);
  }
  if (raw.length < 10) throw new BadMagicError("truncated before header length");
  const headerLen = raw.readUInt16LE(8);
  const headerEnd = 10 + headerLen;
  if (raw.length < headerEnd) {
    throw new TruncatedPayloadError(
      `header declares ${headerLen} bytes, file holds ${raw.length - 10}`,
    );
  }
  const [rows, cols] = parseHeader(raw.subarray(10, headerEnd));

  const nBytes = 4 * rows * cols;
  if (nBytes > maxBytes) {
    throw new OversizeArrayError(`shape (${rows}, ${cols}) needs ${nBytes} bytes, cap is ${maxBytes}`);
  }
  const payload = raw.subarray(headerEnd);
  if (payload.length !== nBytes) {
    throw new TruncatedPayloadError(
      `payload is ${payload.length} bytes, shape (${rows}, ${cols}) needs ${nBytes}`,
    );
  }

  let data: Float32Array;
  if (HOST_LE) {
    const copy = new Uint8Array(nBytes);
    copy.set(payload);
    data = new Float32Array(copy.buffer);
  } else {
    data = new Float32Array(rows * cols);
    for (let k = 0; k < data.length; k++) data[k] = payload.readFloatLE(k * 4);
  }
  return { data, rows, cols };
}

function parseHeader(header: Buffer): [number, number] {
  for (const byte of header) {
    if (byte > 0x7f) throw new BadMagicError("header is not ASCII");
  }
  const text = header.toString("latin1");
  if (!text.endsWith("\n")) throw new BadMagicError("header not newline-terminated");

  const match = HEADER_SHAPE.exec(text.trimEnd());
  if (!match) throw new BadMagicError("malformed header dict");
  const [, descr, fortran, shapeBody] = match;

  if (descr !== "<f4") {
    throw new UnsupportedDtypeError(`dtype '${descr}' not accepted, need little-endian float32 '<f4'`);
  }
  if (fortran !== "False") {
    throw new UnsupportedDtypeError("only row-major (fortran_order: False) accepted");
  }

  const dims = shapeBody!.split(",").map((s) => s.trim()).filter((s) => s.length > 0);
  if (dims.length !== 2 || !dims.every((d) => /^\d+$/.test(d))) {
    throw new UnsupportedRankError(`shape must be a 2-tuple of sizes, got (${shapeBody})`);
  }
  return [Number(dims[0]), Number(dims[1])];
}

/** Reject matrices the engine itself would refuse as compression input. */
export function requireCompressible(matrix: Matrix): void {
  if (matrix.rows < 1 || matrix.cols < 1) {
    throw new EmptyInputError(`expected non-empty matrix, got ${matrix.rows}x${matrix.cols}`);
  }
}
