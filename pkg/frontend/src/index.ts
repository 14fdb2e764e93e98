/**
 * Ripser-style wrapper over the ripsph engine.
 *
 * The engine is consumed strictly through its external interfaces: inputs
 * are written in its file formats, the CLI is invoked as a subprocess, and
 * the barcode CSV plus the key=value stats stream are parsed back.  Values
 * round-trip exactly (the CLI prints 17 significant digits).  The input
 * array is never mutated.
 */

import { spawn, spawnSync } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export interface WeightParams {
  k?: number;
  r?: number;
  p?: 1 | 2 | "inf";
  mode?: "vr" | "strict";
}

export interface RipserOptions {
  /** Maximum homology dimension (default 1). */
  maxdim?: number;
  /** Filtration cutoff; omit for the engine's Auto behaviour. */
  thresh?: number;
  /** Prime coefficient field (default 2). */
  coeff?: number;
  /** Interpret X as a distance matrix instead of a point cloud. */
  distanceMatrix?: boolean;
  /** Run the barcode-preserving edge collapser first. */
  collapseEdges?: boolean;
  /** Vertex re-weighting scheme ("dtm" only). */
  weights?: "dtm";
  weightParams?: WeightParams;
  /** Worker threads for the reduction. */
  nThreads?: number;
  /** Engine invocation; defaults to $RIPSPH_CLI or ["ripsph"]. */
  command?: string[];
}

export interface HostResult {
  /** dgms[d] lists [birth, death] rows of dimension d, death may be Infinity. */
  dgms: number[][][];
  /** Pipeline statistics as reported by the engine. */
  stats: Record<string, number | string | boolean>;
}

export interface VersionInfo {
  version: string;
  compiledAvailable: boolean;
  backendDefault: string;
  threadsDefault: number;
  [key: string]: number | string | boolean;
}

/** Engine failure; `name` preserves the engine's error class name. */
export class EngineError extends Error {
  readonly exitCode: number;

  constructor(name: string, message: string, exitCode: number) {
    super(message);
    this.name = name;
    this.exitCode = exitCode;
  }
}

function engineCommand(options?: RipserOptions): string[] {
  if (options?.command && options.command.length) return [...options.command];
  const env = process.env.RIPSPH_CLI;
  if (env && env.trim()) return env.trim().split(/\s+/);
  return ["ripsph"];
}

function isSquare(X: readonly (readonly number[])[]): boolean {
  return X.length > 0 && X.every((row) => row.length === X.length);
}

/** Serialize the input in one of the engine's file formats. */
export function encodeInput(
  X: readonly (readonly number[])[],
  distanceMatrix: boolean,
): { text: string; format: "lower-distance" | "point-cloud" | "sparse" } {
  if (X.length === 0 || X.some((row) => row.length !== X[0].length)) {
    throw new EngineError("RaggedRows", "X must be a non-empty rectangular array", 2);
  }
  if (!distanceMatrix) {
    return {
      text: X.map((row) => row.map(String).join(",")).join("\n") + "\n",
      format: "point-cloud",
    };
  }
  if (!isSquare(X)) {
    throw new EngineError("AsymmetricMatrix", "distance matrix must be square", 2);
  }
  const n = X.length;
  const zeroDiagonal = X.every((row, i) => row[i] === 0);
  if (zeroDiagonal) {
    const rows: string[] = [];
    for (let i = 1; i < n; i++) {
      rows.push(
        X[i]
          .slice(0, i)
          .map(String)
          .join(" "),
      );
    }
    return { text: rows.join("\n") + (rows.length ? "\n" : ""), format: "lower-distance" };
  }
  // Non-zero births have no dense file format; write the full graph sparsely.
  const lines: string[] = [];
  for (let i = 0; i < n; i++) {
    if (X[i][i] !== 0 || i === n - 1) lines.push(`${i} ${i} ${String(X[i][i])}`);
  }
  for (let i = 0; i < n; i++) {
    for (let j = i + 1; j < n; j++) {
      lines.push(`${i} ${j} ${String(X[i][j])}`);
    }
  }
  return { text: lines.join("\n") + "\n", format: "sparse" };
}

function buildArgs(
  file: string,
  format: string,
  options: RipserOptions,
): string[] {
  const args = [file, "--format", format, "--stats"];
  args.push("--dim", String(options.maxdim ?? 1));
  if (options.thresh !== undefined) {
    args.push("--threshold", options.thresh === Infinity ? "inf" : String(options.thresh));
  }
  if (options.coeff !== undefined) args.push("--modulus", String(options.coeff));
  if (options.nThreads !== undefined) args.push("--threads", String(options.nThreads));
  if (options.collapseEdges) args.push("--collapse");
  if (options.weights) {
    args.push("--weights", options.weights);
    const wp = options.weightParams;
    if (wp) {
      const parts: string[] = [];
      if (wp.k !== undefined) parts.push(`k=${wp.k}`);
      if (wp.r !== undefined) parts.push(`r=${wp.r}`);
      if (wp.p !== undefined) parts.push(`p=${wp.p}`);
      if (wp.mode !== undefined) parts.push(`mode=${wp.mode}`);
      if (parts.length) args.push("--weight-params", parts.join(","));
    }
  }
  return args;
}

const ERROR_LINE = /^(?:error:\s*)?([A-Za-z]\w*):\s*(.*)$/;

function throwEngineError(stderr: string, code: number): never {
  for (const line of stderr.split("\n")) {
    const m = ERROR_LINE.exec(line.trim());
    if (m) throw new EngineError(m[1], m[2], code);
  }
  throw new EngineError("EngineError", stderr.trim() || `exit code ${code}`, code);
}

/** Parse the engine's barcode CSV into per-dimension [birth, death] rows. */
export function parseBarcodeCsv(csv: string, maxdim: number): number[][][] {
  const dgms: number[][][] = Array.from({ length: maxdim + 1 }, () => []);
  const lines = csv.split("\n");
  if (!lines.length || lines[0].trim() !== "dimension,birth,death") {
    throw new EngineError("ParseError", "missing barcode CSV header", 1);
  }
  for (const line of lines.slice(1)) {
    if (!line.trim()) continue;
    const [d, b, e] = line.split(",");
    const dim = Number(d);
    const birth = Number(b);
    const death = e.trim() === "inf" ? Infinity : Number(e);
    if (!Number.isInteger(dim) || Number.isNaN(birth) || Number.isNaN(death)) {
      throw new EngineError("ParseError", `bad barcode row: ${line}`, 1);
    }
    if (dim <= maxdim) dgms[dim].push([birth, death]);
  }
  return dgms;
}

function parseStatValue(raw: string): number | string | boolean {
  if (raw === "True") return true;
  if (raw === "False") return false;
  if (raw === "inf") return Infinity;
  const num = Number(raw);
  return raw !== "" && !Number.isNaN(num) ? num : raw;
}

function parseStats(stderr: string): Record<string, number | string | boolean> {
  const stats: Record<string, number | string | boolean> = {};
  for (const line of stderr.split("\n")) {
    const eq = line.indexOf("=");
    if (eq <= 0) continue;
    stats[line.slice(0, eq)] = parseStatValue(line.slice(eq + 1).trim());
  }
  return stats;
}

interface RunOutcome {
  status: number;
  stdout: string;
  stderr: string;
}

function finish(outcome: RunOutcome, maxdim: number): HostResult {
  if (outcome.status !== 0) throwEngineError(outcome.stderr, outcome.status);
  return {
    dgms: parseBarcodeCsv(outcome.stdout, maxdim),
    stats: parseStats(outcome.stderr),
  };
}

function stageInput(
  X: readonly (readonly number[])[],
  options: RipserOptions,
): { argv: string[]; cleanup: () => void } {
  const { text, format } = encodeInput(X, options.distanceMatrix ?? false);
  const dir = mkdtempSync(join(tmpdir(), "ripsph-"));
  const file = join(dir, "input.dat");
  writeFileSync(file, text);
  const cmd = engineCommand(options);
  return {
    argv: [...cmd, ...buildArgs(file, format, options)],
    cleanup: () => rmSync(dir, { recursive: true, force: true }),
  };
}

/** Compute persistence diagrams of a point cloud or distance matrix. */
export async function ripserLike(
  X: readonly (readonly number[])[],
  options: RipserOptions = {},
): Promise<HostResult> {
  const maxdim = options.maxdim ?? 1;
  const { argv, cleanup } = stageInput(X, options);
  try {
    const outcome = await new Promise<RunOutcome>((resolve, reject) => {
      const child = spawn(argv[0], argv.slice(1));
      let stdout = "";
      let stderr = "";
      child.stdout.on("data", (chunk) => (stdout += chunk));
      child.stderr.on("data", (chunk) => (stderr += chunk));
      child.on("error", reject);
      child.on("close", (status) => {
        resolve({ status: status ?? 1, stdout, stderr });
      });
    });
    return finish(outcome, maxdim);
  } finally {
    cleanup();
  }
}

/** Blocking variant of {@link ripserLike}. */
export function ripserLikeSync(
  X: readonly (readonly number[])[],
  options: RipserOptions = {},
): HostResult {
  const maxdim = options.maxdim ?? 1;
  const { argv, cleanup } = stageInput(X, options);
  try {
    const res = spawnSync(argv[0], argv.slice(1), { encoding: "utf8" });
    if (res.error) throw res.error;
    return finish(
      { status: res.status ?? 1, stdout: res.stdout, stderr: res.stderr },
      maxdim,
    );
  } finally {
    cleanup();
  }
}

/** Engine version, build flags and hardware concurrency. */
export function versionInfo(command?: string[]): VersionInfo {
  const cmd = engineCommand(command ? { command } : undefined);
  const res = spawnSync(cmd[0], [...cmd.slice(1), "version"], { encoding: "utf8" });
  if (res.error) throw res.error;
  if (res.status !== 0) throwEngineError(res.stderr ?? "", res.status ?? 1);
  const raw = parseStats(res.stdout);
  const info: VersionInfo = {
    version: String(raw.version ?? ""),
    compiledAvailable: raw.compiled_available === "true",
    backendDefault: String(raw.backend_default ?? ""),
    threadsDefault: Number(raw.threads_default ?? 0),
  };
  for (const [key, value] of Object.entries(raw)) info[key] = value;
  return info;
}
