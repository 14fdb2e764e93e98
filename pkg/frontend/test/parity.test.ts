import assert from "node:assert/strict";
import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { test } from "node:test";

import {
  EngineError,
  HostResult,
  encodeInput,
  parseBarcodeCsv,
  ripserLike,
  ripserLikeSync,
  versionInfo,
} from "../src/index";

// deterministic PRNG so the parity corpus is reproducible
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function randomCloud(rand: () => number, n: number, d: number): number[][] {
  return Array.from({ length: n }, () =>
    Array.from({ length: d }, () => rand()),
  );
}

function randomDistanceMatrix(rand: () => number, n: number): number[][] {
  const m = Array.from({ length: n }, () => new Array<number>(n).fill(0));
  for (let i = 0; i < n; i++) {
    for (let j = i + 1; j < n; j++) {
      m[i][j] = m[j][i] = rand();
    }
  }
  return m;
}

function cliCommand(): string[] {
  const env = process.env.RIPSPH_CLI;
  return env && env.trim() ? env.trim().split(/\s+/) : ["ripsph"];
}

/** Run the engine CLI directly on the same encoded input. */
function cliReference(
  X: number[][],
  distanceMatrix: boolean,
  extraArgs: string[],
  maxdim: number,
): number[][][] {
  const { text, format } = encodeInput(X, distanceMatrix);
  const dir = mkdtempSync(join(tmpdir(), "ripsph-ref-"));
  const file = join(dir, "input.dat");
  try {
    writeFileSync(file, text);
    const cmd = cliCommand();
    const res = spawnSync(
      cmd[0],
      [...cmd.slice(1), file, "--format", format, "--dim", String(maxdim),
       ...extraArgs],
      { encoding: "utf8" },
    );
    assert.equal(res.status, 0, res.stderr);
    return parseBarcodeCsv(res.stdout, maxdim);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

test("binding parity on 20 random inputs", () => {
  const rand = mulberry32(20210712);
  for (let trial = 0; trial < 20; trial++) {
    const useMatrix = trial % 2 === 1;
    const n = 4 + Math.floor(rand() * 8);
    const maxdim = 1 + (trial % 2);
    const X = useMatrix
      ? randomDistanceMatrix(rand, n)
      : randomCloud(rand, n, 3);
    const got = ripserLikeSync(X, { maxdim, distanceMatrix: useMatrix });
    const want = cliReference(X, useMatrix, [], maxdim);
    assert.deepEqual(got.dgms, want, `trial ${trial}`);
    assert.equal(got.dgms.length, maxdim + 1);
    assert.ok(Object.keys(got.stats).length > 0);
  }
});

test("collapse_edges flag behaves like the CLI flag", () => {
  const rand = mulberry32(7);
  const X = randomDistanceMatrix(rand, 10);
  const plain = ripserLikeSync(X, { maxdim: 2, distanceMatrix: true });
  const collapsed = ripserLikeSync(X, {
    maxdim: 2,
    distanceMatrix: true,
    collapseEdges: true,
  });
  assert.deepEqual(collapsed.dgms, plain.dgms);
  const before = collapsed.stats["edges_before_collapse"] as number;
  const after = collapsed.stats["edges_after_collapse"] as number;
  assert.ok(after <= before);
  const viaCli = cliReference(X, true, ["--collapse"], 2);
  assert.deepEqual(collapsed.dgms, viaCli);
});

test("coeff flag behaves like the CLI flag", () => {
  const rand = mulberry32(11);
  const X = randomDistanceMatrix(rand, 9);
  const got = ripserLikeSync(X, { maxdim: 2, distanceMatrix: true, coeff: 3 });
  const want = cliReference(X, true, ["--modulus", "3"], 2);
  assert.deepEqual(got.dgms, want);
});

test("unit square known answer", async () => {
  const square = [
    [0, 0],
    [1, 0],
    [1, 1],
    [0, 1],
  ];
  const result = await ripserLike(square, { maxdim: 1 });
  assert.deepEqual(result.dgms[1], [[1, Math.SQRT2]]);
  assert.equal(result.dgms[0].length, 4);
  assert.equal(result.dgms[0][3][1], Infinity);
});

test("composite coeff raises NotPrime with the engine's error name", () => {
  const X = [
    [0, 0],
    [1, 0],
  ];
  assert.throws(
    () => ripserLikeSync(X, { coeff: 4 }),
    (err: unknown) => err instanceof EngineError && err.name === "NotPrime",
  );
});

test("input is never mutated", () => {
  const X = [
    [0, 0],
    [1, 0],
    [0.5, 2],
  ];
  const snapshot = JSON.stringify(X);
  ripserLikeSync(X, { maxdim: 1, nThreads: 2 });
  assert.equal(JSON.stringify(X), snapshot);
});

test("dtm weights round-trip through the CLI", () => {
  const rand = mulberry32(3);
  const X = randomCloud(rand, 12, 2);
  const got = ripserLikeSync(X, {
    maxdim: 1,
    weights: "dtm",
    weightParams: { k: 3, r: 2, p: "inf" },
  });
  const want = cliReference(
    X, false, ["--weights", "dtm", "--weight-params", "k=3,r=2,p=inf"], 1,
  );
  assert.deepEqual(got.dgms, want);
});

test("version info", () => {
  const info = versionInfo();
  assert.ok(info.threadsDefault >= 1);
  assert.match(info.version, /^\d+\.\d+\.\d+$/);
  // matches the engine's own report and is idempotent
  const again = versionInfo();
  assert.deepEqual(info, again);
  const cmd = cliCommand();
  const res = spawnSync(cmd[0], [...cmd.slice(1), "version"], {
    encoding: "utf8",
  });
  assert.ok(res.stdout.includes(`version=${info.version}`));
});

test("async and sync variants agree", async () => {
  const rand = mulberry32(99);
  const X = randomCloud(rand, 8, 3);
  const [a, b]: [HostResult, HostResult] = [
    await ripserLike(X, { maxdim: 1 }),
    ripserLikeSync(X, { maxdim: 1 }),
  ];
  assert.deepEqual(a.dgms, b.dgms);
});
