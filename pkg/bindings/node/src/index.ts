/**
 * Node.js bindings for the pdagen grammar-constrained decoding engine.
 *
 * The engine is consumed strictly through its stable surface: the `PDA1`
 * compiled-automaton file, the CLI subcommands, and the documented mask
 * wire format (u32 LE size + LSB-first bitset; JSON debug form with
 * per-entry terminal names). No Python internals are touched, so any
 * interpreter with the `pdagen` package installed works.
 *
 * All calls are synchronous; batching is the host's concern. An
 * EngineHandle is immutable and shareable; a SessionHandle is
 * single-owner and valid until `close()`.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

/** Result of stepping one vocabulary index. */
export type StepStatus = "Active" | "Accepted" | "Rejected";

export interface EngineOptions {
  /**
   * Command prefix used to invoke the engine CLI.
   * Defaults to `["pdagen"]`; use e.g. `["python3", "-m", "pdagen.cli"]`
   * to pin an interpreter.
   */
  cli?: string[];
}

export class PdagenError extends Error {}

interface MaskPayload {
  allowed: number[];
  size: number;
  terminals: (string | null)[];
}

function run(cli: string[], args: string[]): string {
  const proc = spawnSync(cli[0], [...cli.slice(1), ...args], {
    encoding: "utf8",
    maxBuffer: 64 * 1024 * 1024,
  });
  if (proc.error) {
    throw new PdagenError(`failed to invoke engine CLI: ${proc.error.message}`);
  }
  if (proc.status !== 0) {
    throw new PdagenError(
      `engine CLI exited with ${proc.status}: ${proc.stderr.trim()}`,
    );
  }
  return proc.stdout;
}

/** Decode the binary mask wire format into one boolean per vocab entry. */
export function unpackMask(data: Uint8Array): boolean[] {
  if (data.length < 4) {
    throw new PdagenError("mask payload too short");
  }
  const size =
    data[0] | (data[1] << 8) | (data[2] << 16) | ((data[3] << 24) >>> 0);
  if (data.length !== 4 + Math.ceil(size / 8)) {
    throw new PdagenError(`mask payload length ${data.length} is inconsistent`);
  }
  const bits: boolean[] = [];
  for (let i = 0; i < size; i++) {
    bits.push(((data[4 + (i >> 3)] >> (i & 7)) & 1) === 1);
  }
  return bits;
}

export class SessionHandle {
  private prefix: [string, string][] = [];
  private cachedMask: Uint8Array | null = null;
  private cachedPayload: MaskPayload | null = null;
  private closed = false;
  private readonly dir: string;
  private readonly vocabFile: string;

  /** @internal — use {@link EngineHandle.openSession}. */
  constructor(
    private readonly engine: EngineHandle,
    readonly vocab: readonly string[],
  ) {
    this.dir = mkdtempSync(join(tmpdir(), "pdagen-session-"));
    this.vocabFile = join(this.dir, "vocab.json");
    writeFileSync(this.vocabFile, JSON.stringify(vocab));
  }

  private assertOpen(): void {
    if (this.closed) {
      throw new PdagenError("session is closed");
    }
  }

  private refresh(): void {
    if (this.cachedMask !== null) {
      return;
    }
    const out = join(this.dir, "mask.bin");
    const args = [
      "mask",
      this.engine.pdaPath,
      "--vocab",
      this.vocabFile,
      "--out",
      out,
    ];
    if (this.prefix.length > 0) {
      args.push("--prefix-tokens", JSON.stringify(this.prefix));
    }
    const stdout = run(this.engine.cli, args);
    this.cachedPayload = JSON.parse(stdout) as MaskPayload;
    this.cachedMask = new Uint8Array(readFileSync(out));
  }

  /** The current mask in wire format (see docs/mask-format.md). */
  mask(): Uint8Array {
    this.assertOpen();
    this.refresh();
    return this.cachedMask!.slice();
  }

  /** Indices of vocabulary entries allowed at the current state. */
  allowedIndices(): number[] {
    this.assertOpen();
    this.refresh();
    return [...this.cachedPayload!.allowed];
  }

  /** Tokens consumed so far, as [terminal name, surface] pairs. */
  consumed(): [string, string][] {
    this.assertOpen();
    return this.prefix.map((pair) => [...pair] as [string, string]);
  }

  /**
   * Consume one vocabulary entry. A masked index is `Rejected` and the
   * session state, including the mask, is unchanged.
   */
  stepToken(index: number): StepStatus {
    this.assertOpen();
    if (!Number.isInteger(index) || index < 0 || index >= this.vocab.length) {
      throw new PdagenError(`vocab index ${index} is out of range`);
    }
    this.refresh();
    if (!this.cachedPayload!.allowed.includes(index)) {
      return "Rejected";
    }
    const terminal = this.cachedPayload!.terminals[index]!;
    this.prefix.push([terminal, this.vocab[index]]);
    this.cachedMask = null;
    this.cachedPayload = null;
    const stdout = run(this.engine.cli, [
      "recognize",
      this.engine.pdaPath,
      "--tokens",
      JSON.stringify(this.prefix),
    ]);
    const result = JSON.parse(stdout) as { result: string };
    return result.result === "accepted" ? "Accepted" : "Active";
  }

  /** Release session resources. Double-close is an error. */
  close(): void {
    this.assertOpen();
    this.closed = true;
    rmSync(this.dir, { recursive: true, force: true });
  }
}

export class EngineHandle {
  /** @internal — use {@link loadEngine}. */
  constructor(
    readonly pdaPath: string,
    readonly cli: string[],
  ) {}

  /** Open an independent session over a whole-token vocabulary. */
  openSession(vocab: readonly string[]): SessionHandle {
    return new SessionHandle(this, vocab);
  }
}

/**
 * Load a compiled automaton (`pdagen compile` output). The file header is
 * validated eagerly so a bad path fails here, not on first use.
 */
export function loadEngine(
  pdaPath: string,
  options: EngineOptions = {},
): EngineHandle {
  let header: Buffer;
  try {
    header = readFileSync(pdaPath).subarray(0, 6);
  } catch (err) {
    throw new PdagenError(`cannot read PDA file: ${(err as Error).message}`);
  }
  if (header.length < 6 || header.toString("latin1", 0, 4) !== "PDA1") {
    throw new PdagenError(`${pdaPath} is not a PDA1 file`);
  }
  if (header.readUInt16LE(4) !== 1) {
    throw new PdagenError(`unsupported PDA version ${header.readUInt16LE(4)}`);
  }
  return new EngineHandle(pdaPath, options.cli ?? ["pdagen"]);
}
