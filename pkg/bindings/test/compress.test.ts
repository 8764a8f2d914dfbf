import { spawnSync } from "node:child_process";
import { readFileSync, mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import { afterAll, describe, expect, it } from "vitest";

import {
  compress,
  compressSync,
  decodeMatrix,
  encodeMatrix,
  engineCommand,
  EmptyInputError,
  InvalidArgumentError,
  IoFailureError,
  NonFiniteInputError,
  UnavailableRatioError,
  type Matrix,
} from "../src/index.js";

const FIXTURE = fileURLToPath(
  new URL("../../tests/fixtures/ltbm_64x8_input.npy", import.meta.url),
);

const scratch = mkdtempSync(join(tmpdir(), "seqsqueeze-binding-test-"));
afterAll(() => rmSync(scratch, { recursive: true, force: true }));

function runEngine(args: string[]) {
  const [cmd, ...prefix] = engineCommand();
  return spawnSync(cmd!, [...prefix, ...args], { encoding: "utf8" });
}

function rampMatrix(rows: number, cols: number): Matrix {
  const data = new Float32Array(rows * cols);
  for (let k = 0; k < data.length; k++) data[k] = Math.fround(Math.sin(k * 0.7) * 3);
  return { data, rows, cols };
}

describe("compress", () => {
  it("returns the input unchanged at keepRatio 1", async () => {
    const input = rampMatrix(10, 4);
    const result = await compress(input, { method: "ltbm", keepRatio: 1.0 });
    expect(result.matrix.rows).toBe(10);
    expect(Buffer.from(result.matrix.data.buffer).equals(Buffer.from(input.data.buffer))).toBe(true);
    expect(result.groups).toEqual(Array.from({ length: 10 }, (_, k) => [k + 1]));
    expect(result.passCount).toBe(0);
  });

  it("matches the CLI byte for byte on the committed fixture", () => {
    const input = decodeMatrix(readFileSync(FIXTURE));
    const bound = compressSync(input, { method: "ltbm", keepRatio: 0.25, window: 8 });

    const out = join(scratch, "fixture-cli.npy");
    const prov = join(scratch, "fixture-cli.json");
    const run = runEngine([
      "compress", "--input", FIXTURE, "--output", out, "--provenance", prov,
      "--method", "ltbm", "--keep-ratio", "0.25", "--window", "8",
    ]);
    expect(run.status).toBe(0);

    expect(encodeMatrix(bound.matrix).equals(readFileSync(out))).toBe(true);
    const doc = JSON.parse(readFileSync(prov, "utf8"));
    expect(bound.groups).toEqual(doc.groups);
    expect(bound.passCount).toBe(doc.passes.length);
  });

  it("partitions every original position exactly once", () => {
    const result = compressSync(rampMatrix(37, 5), { method: "global-topk", keepRatio: 0.4 });
    const seen = [...result.groups.flat(), ...result.dropped].sort((a, b) => a - b);
    expect(seen).toEqual(Array.from({ length: 37 }, (_, k) => k + 1));
    expect(result.dropped.length).toBeGreaterThan(0);
  });

  it("maps the unavailable-ratio rejection", async () => {
    await expect(
      compress(rampMatrix(16, 4), { method: "uniavg", keepRatio: 0.75 }),
    ).rejects.toBeInstanceOf(UnavailableRatioError);
    expect(() => compressSync(rampMatrix(16, 4), { method: "uniavg", keepRatio: 0.75 })).toThrow(
      UnavailableRatioError,
    );
  });

  it("maps argument rejections without spawning", () => {
    expect(() =>
      compressSync(rampMatrix(4, 2), { method: "resize" as never, keepRatio: 0.5 }),
    ).toThrow(InvalidArgumentError);
    expect(() =>
      compressSync(rampMatrix(4, 2), { method: "ltbm", keepRatio: Number.NaN }),
    ).toThrow(InvalidArgumentError);
  });

  it("maps engine-side argument rejections", () => {
    expect(() => compressSync(rampMatrix(4, 2), { method: "ltbm", keepRatio: 1.5 })).toThrow(
      InvalidArgumentError,
    );
    expect(() => compressSync(rampMatrix(4, 2), { method: "ltbm", keepRatio: 0.5, window: -1 })).toThrow(
      InvalidArgumentError,
    );
  });

  it("rejects degenerate matrices before any engine call", () => {
    expect(() => compressSync({ data: new Float32Array(0), rows: 0, cols: 4 }, {
      method: "ltbm", keepRatio: 0.5,
    })).toThrow(EmptyInputError);
    const bad = rampMatrix(4, 2);
    bad.data[3] = Number.POSITIVE_INFINITY;
    expect(() => compressSync(bad, { method: "ltbm", keepRatio: 0.5 })).toThrow(NonFiniteInputError);
  });

  it("reports a missing engine as an I/O failure", async () => {
    const saved = process.env.SEQSQUEEZE_CLI;
    process.env.SEQSQUEEZE_CLI = "/nonexistent/seqsqueeze";
    try {
      expect(() => compressSync(rampMatrix(4, 2), { method: "ltbm", keepRatio: 0.5 })).toThrow(
        IoFailureError,
      );
      await expect(
        compress(rampMatrix(4, 2), { method: "ltbm", keepRatio: 0.5 }),
      ).rejects.toBeInstanceOf(IoFailureError);
    } finally {
      if (saved === undefined) delete process.env.SEQSQUEEZE_CLI;
      else process.env.SEQSQUEEZE_CLI = saved;
    }
  });

  it("is reentrant across concurrent calls", async () => {
    const input = rampMatrix(40, 6);
    const results = await Promise.all(
      Array.from({ length: 4 }, () => compress(input, { method: "ltbm", keepRatio: 0.5, window: 4 })),
    );
    const reference = encodeMatrix(results[0]!.matrix);
    for (const r of results) {
      expect(encodeMatrix(r.matrix).equals(reference)).toBe(true);
      expect(r.groups).toEqual(results[0]!.groups);
    }
  });
});
