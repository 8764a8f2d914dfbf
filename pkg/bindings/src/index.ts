/**
 * Compression entry point for Node pipelines.
 *
 * The engine is driven through its command line and file formats, not
 * linked in-process: the input matrix is written to a temp container,
 * the CLI runs, and the output container plus provenance document are
 * read back. That keeps results byte-identical to what the same flags
 * produce by hand, which is the whole point of the binding.
 *
 * The engine command defaults to "seqsqueeze" on PATH; set
 * SEQSQUEEZE_CLI to override (e.g. "python3 -m seqsqueeze").
 */

import { execFile, spawnSync } from "node:child_process";
import { mkdtemp, readFile, rm, writeFile } from "node:fs/promises";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import {
  errorFromStderr,
  InvalidArgumentError,
  IoFailureError,
  SchemaViolationError,
  SeqSqueezeError,
} from "./errors.js";
import { decodeMatrix, encodeMatrix, requireCompressible, type Matrix } from "./npy.js";

export * from "./errors.js";
export { decodeMatrix, encodeMatrix, DEFAULT_MAX_BYTES, type Matrix } from "./npy.js";

export type Method =
  | "ltbm"
  | "global-merge"
  | "uniavg"
  | "global-topk"
  | "segmentwise-topk";

export type Weighting = "paper-literal" | "size-weighted";

export interface CompressOptions {
  method: Method;
  /** Fraction of tokens to keep, in (0, 1]. */
  keepRatio: number;
  /** Maximum parity-index gap for ltbm merges (default 8). */
  window?: number;
  weighting?: Weighting;
  /** Contiguous spans for segmentwise-topk (default 8). */
  segments?: number;
}

export interface MergeStep {
  i: number;
  j: number;
  score: number;
}

export interface BoundResult {
  /** Compressed L' x D float32 matrix. */
  matrix: Matrix;
  /** Sorted 1-based original positions composing each output row. */
  groups: number[][];
  /** Positions pruned outright (top-k methods), ascending. */
  dropped: number[];
  /** Merge passes in order; empty for non-merge methods. */
  passes: MergeStep[][];
  passCount: number;
}

const METHODS: ReadonlySet<string> = new Set([
  "ltbm",
  "global-merge",
  "uniavg",
  "global-topk",
  "segmentwise-topk",
]);

/** Compress a token matrix; resolves to the result or rejects with a mapped error. */
export async function compress(matrix: Matrix, options: CompressOptions): Promise<BoundResult> {
  const blob = prepare(matrix, options);
  const work = await mkdtemp(join(tmpdir(), "seqsqueeze-"));
  try {
    const paths = workPaths(work);
    await writeFile(paths.input, blob);
    await runCli(cliArgs(paths, options));
    const [outBlob, provBlob] = await Promise.all([
      readFile(paths.output),
      readFile(paths.provenance),
    ]);
    return assemble(outBlob, provBlob);
  } finally {
    await rm(work, { recursive: true, force: true });
  }
}

/** Blocking variant of {@link compress} for scripts and test rigs. */
export function compressSync(matrix: Matrix, options: CompressOptions): BoundResult {
  const blob = prepare(matrix, options);
  const work = mkdtempSync(join(tmpdir(), "seqsqueeze-"));
  try {
    const paths = workPaths(work);
    writeFileSync(paths.input, blob);
    runCliSync(cliArgs(paths, options));
    return assemble(readFileSync(paths.output), readFileSync(paths.provenance));
  } finally {
    rmSync(work, { recursive: true, force: true });
  }
}

/** The engine invocation in effect, for diagnostics and test rigs. */
export function engineCommand(): string[] {
  const raw = process.env.SEQSQUEEZE_CLI?.trim();
  const parts = raw ? raw.split(/\s+/) : ["seqsqueeze"];
  return parts;
}

function prepare(matrix: Matrix, options: CompressOptions): Buffer {
  if (!METHODS.has(options.method)) {
    throw new InvalidArgumentError(`unknown method '${options.method}'`);
  }
  if (typeof options.keepRatio !== "number" || !Number.isFinite(options.keepRatio)) {
    throw new InvalidArgumentError(`keepRatio must be a finite number, got ${options.keepRatio}`);
  }
  requireCompressible(matrix);
  return encodeMatrix(matrix);
}

function workPaths(work: string) {
  return {
    input: join(work, "input.npy"),
    output: join(work, "output.npy"),
    provenance: join(work, "provenance.json"),
  };
}

function cliArgs(
  paths: { input: string; output: string; provenance: string },
  options: CompressOptions,
): string[] {
  const args = [
    "compress",
    "--input", paths.input,
    "--output", paths.output,
    "--provenance", paths.provenance,
    "--method", options.method,
    "--keep-ratio", String(options.keepRatio),
  ];
  if (options.window !== undefined) args.push("--window", String(options.window));
  if (options.weighting !== undefined) args.push("--weighting", options.weighting);
  if (options.segments !== undefined) args.push("--segments", String(options.segments));
  return args;
}

function runCli(args: string[]): Promise<void> {
  const [cmd, ...prefix] = engineCommand();
  return new Promise((resolve, reject) => {
    execFile(cmd!, [...prefix, ...args], { encoding: "utf8" }, (err, _stdout, stderr) => {
      if (!err) return resolve();
      if (typeof (err as NodeJS.ErrnoException).code === "string") {
        return reject(new IoFailureError(`cannot run engine '${cmd}': ${err.message}`));
      }
      reject(errorFromStderr(stderr ?? "", `engine exited with status ${err.code}`));
    });
  });
}

function runCliSync(args: string[]): void {
  const [cmd, ...prefix] = engineCommand();
  const run = spawnSync(cmd!, [...prefix, ...args], { encoding: "utf8" });
  if (run.error) throw new IoFailureError(`cannot run engine '${cmd}': ${run.error.message}`);
  if (run.status !== 0) {
    throw errorFromStderr(run.stderr ?? "", `engine exited with status ${run.status}`);
  }
}

function assemble(outBlob: Buffer, provBlob: Buffer): BoundResult {
  const matrix = decodeMatrix(outBlob);
  let doc: unknown;
  try {
    doc = JSON.parse(provBlob.toString("utf8"));
  } catch (exc) {
    throw new SchemaViolationError(`provenance is not JSON: ${(exc as Error).message}`);
  }
  return { matrix, ...readProvenance(doc, matrix.rows) };
}

function readProvenance(doc: unknown, rows: number) {
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new SchemaViolationError("provenance must be a JSON object");
  }
  const body = doc as Record<string, unknown>;
  const groups = intLists(body.groups, "groups");
  if (groups.length !== rows) {
    throw new SchemaViolationError(`provenance holds ${groups.length} groups for ${rows} rows`);
  }
  const dropped = intList(body.dropped ?? [], "dropped");
  const rawPasses = body.passes ?? [];
  if (!Array.isArray(rawPasses)) throw new SchemaViolationError("passes must be a list");
  const passes = rawPasses.map((p, n) => mergeSteps(p, n));
  return { groups, dropped, passes, passCount: passes.length };
}

function intLists(value: unknown, label: string): number[][] {
  if (!Array.isArray(value)) throw new SchemaViolationError(`${label} must be a list of lists`);
  return value.map((entry) => intList(entry, label));
}

function intList(value: unknown, label: string): number[] {
  if (!Array.isArray(value) || !value.every((v) => Number.isInteger(v) && (v as number) >= 1)) {
    throw new SchemaViolationError(`${label} must hold 1-based integer positions`);
  }
  return value as number[];
}

function mergeSteps(value: unknown, pass: number): MergeStep[] {
  if (!Array.isArray(value)) throw new SchemaViolationError(`pass ${pass} must be a list`);
  return value.map((entry) => {
    const m = entry as Record<string, unknown>;
    if (
      typeof m !== "object" || m === null ||
      !Number.isInteger(m.i) || !Number.isInteger(m.j) || typeof m.score !== "number"
    ) {
      throw new SchemaViolationError(`pass ${pass} holds a malformed merge record`);
    }
    return { i: m.i as number, j: m.j as number, score: m.score };
  });
}
