import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";
import { beforeAll, describe, expect, it } from "vitest";

import { loadEngine, unpackMask, PdagenError } from "../src/index.js";
import type { EngineHandle } from "../src/index.js";

const CLI = ["python3", "-m", "pdagen.cli"];
const ROOT = resolve(dirname(fileURLToPath(import.meta.url)), "..", "..", "..");

const MINI_VOCAB = [
  "pass", "return", "if", "while", "def", "not", "x", "y", "count", "42",
  "0", "'s'", "=", "==", "<", "+", "*", "(", ")", ",", ":", "\n",
  "<indent>", "<dedent>", "<endmarker>", "##junk##",
];

const PY_VOCAB = [
  "import", "from", "def", "class", "return", "if", "else", "for", "in",
  "numpy", "np", "x", "1", "'doc'", "=", "+", "(", ")", ":", ".", ",",
  "\n", "<indent>", "<dedent>", "<endmarker>",
];

function cli(args: string[]): { stdout: string; status: number | null } {
  const proc = spawnSync(CLI[0], [...CLI.slice(1), ...args], {
    encoding: "utf8",
  });
  return { stdout: proc.stdout, status: proc.status };
}

function cliMaskBytes(
  pda: string,
  vocabFile: string,
  prefix: [string, string][],
  out: string,
): Buffer {
  const args = ["mask", pda, "--vocab", vocabFile, "--out", out];
  if (prefix.length > 0) {
    args.push("--prefix-tokens", JSON.stringify(prefix));
  }
  const { status } = cli(args);
  expect(status).toBe(0);
  return Buffer.from(readFileSync(out));
}

/** Deterministic PRNG so probe failures reproduce. */
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

let work: string;
let miniPda: string;
let pyPda: string;
let mini: EngineHandle;
let py: EngineHandle;

beforeAll(() => {
  work = mkdtempSync(join(tmpdir(), "pdagen-binding-test-"));
  miniPda = join(work, "mini.pda");
  pyPda = join(work, "python3.pda");
  for (const [gram, out] of [
    ["mini_python.gram", miniPda],
    ["python3.gram", pyPda],
  ] as const) {
    const { status } = cli([
      "compile",
      join(ROOT, "grammars", gram),
      "-o",
      out,
    ]);
    expect(status).toBe(0);
  }
  mini = loadEngine(miniPda, { cli: CLI });
  py = loadEngine(pyPda, { cli: CLI });
}, 60_000);

describe("loadEngine", () => {
  it("rejects files without the PDA1 header", () => {
    const bogus = join(work, "bogus.pda");
    writeFileSync(bogus, "definitely not an automaton");
    expect(() => loadEngine(bogus, { cli: CLI })).toThrow(PdagenError);
  });

  it("rejects missing files", () => {
    expect(() => loadEngine(join(work, "absent.pda"), { cli: CLI })).toThrow(
      PdagenError,
    );
  });
});

describe("masks", () => {
  it("matches the CLI mask at the start state, bit for bit", () => {
    const session = mini.openSession(MINI_VOCAB);
    const vocabFile = join(work, "mini-vocab.json");
    writeFileSync(vocabFile, JSON.stringify(MINI_VOCAB));
    const reference = cliMaskBytes(
      miniPda,
      vocabFile,
      [],
      join(work, "ref.bin"),
    );
    expect(Buffer.from(session.mask()).equals(reference)).toBe(true);
    expect(session.allowedIndices().length).toBeGreaterThan(0);
    session.close();
  });

  it("round-trips through the wire format", () => {
    const session = mini.openSession(MINI_VOCAB);
    const bits = unpackMask(session.mask());
    expect(bits.length).toBe(MINI_VOCAB.length);
    const allowed = bits.flatMap((b, i) => (b ? [i] : []));
    expect(allowed).toEqual(session.allowedIndices());
    session.close();
  });

  it("permanently masks unclassifiable entries", () => {
    const session = mini.openSession(MINI_VOCAB);
    const junk = MINI_VOCAB.indexOf("##junk##");
    expect(session.allowedIndices()).not.toContain(junk);
    expect(session.stepToken(junk)).toBe("Rejected");
    session.close();
  });
});

describe("stepping", () => {
  it("steps an allowed 'import' index to Active", () => {
    const session = py.openSession(PY_VOCAB);
    const idx = PY_VOCAB.indexOf("import");
    expect(session.allowedIndices()).toContain(idx);
    expect(session.stepToken(idx)).toBe("Active");
    session.close();
  });

  it("walks the import line to acceptance", () => {
    const session = py.openSession(PY_VOCAB);
    const steps: [string, string][] = [
      ["import", "Active"],
      ["numpy", "Active"],
      ["\n", "Active"],
      ["<endmarker>", "Accepted"],
    ];
    for (const [text, expected] of steps) {
      expect(session.stepToken(PY_VOCAB.indexOf(text))).toBe(expected);
    }
    expect(session.consumed().map(([, s]) => s)).toEqual([
      "import",
      "numpy",
      "\n",
      "<endmarker>",
    ]);
    session.close();
  });

  it("rejects a masked index without touching state", () => {
    const session = mini.openSession(MINI_VOCAB);
    session.stepToken(MINI_VOCAB.indexOf("pass"));
    const before = Buffer.from(session.mask());
    const masked = MINI_VOCAB.indexOf("pass"); // 'pass pass' is never valid
    expect(session.stepToken(masked)).toBe("Rejected");
    expect(Buffer.from(session.mask()).equals(before)).toBe(true);
    expect(session.consumed().length).toBe(1);
    session.close();
  });

  it("throws on an out-of-range index", () => {
    const session = mini.openSession(MINI_VOCAB);
    expect(() => session.stepToken(999)).toThrow(PdagenError);
    session.close();
  });
});

describe("sessions", () => {
  it("isolates interleaved sessions", () => {
    const a = mini.openSession(MINI_VOCAB);
    const b = mini.openSession(MINI_VOCAB);
    const initial = Buffer.from(b.mask());
    a.stepToken(MINI_VOCAB.indexOf("if"));
    expect(Buffer.from(b.mask()).equals(initial)).toBe(true);
    b.stepToken(MINI_VOCAB.indexOf("pass"));
    // a is mid-'if', b is mid-'pass'; their masks must differ
    expect(Buffer.from(a.mask()).equals(Buffer.from(b.mask()))).toBe(false);
    expect(a.consumed().map(([, s]) => s)).toEqual(["if"]);
    expect(b.consumed().map(([, s]) => s)).toEqual(["pass"]);
    a.close();
    b.close();
  });

  it("errors on double-close and use-after-close", () => {
    const session = mini.openSession(MINI_VOCAB);
    session.close();
    expect(() => session.close()).toThrow(PdagenError);
    expect(() => session.mask()).toThrow(PdagenError);
    expect(() => session.stepToken(0)).toThrow(PdagenError);
  });
});

describe("CLI equivalence", () => {
  it(
    "matches the CLI bit-for-bit on 50 randomized (prefix, vocab) probes",
    () => {
      const rand = mulberry32(0xc0ffee);
      const cases: Array<[EngineHandle, string, string[]]> = [
        [mini, miniPda, MINI_VOCAB],
        [py, pyPda, PY_VOCAB],
      ];
      for (let probe = 0; probe < 50; probe++) {
        const [engine, pdaPath, pool] = cases[probe % cases.length];
        // random vocab subset (keep it non-trivial) in randomized order
        const vocab = pool
          .filter(() => rand() < 0.8)
          .sort(() => rand() - 0.5);
        if (vocab.length < 4) {
          continue;
        }
        const session = engine.openSession(vocab);
        // random constrained walk of up to 6 tokens builds the prefix
        const depth = Math.floor(rand() * 7);
        let accepted = false;
        for (let i = 0; i < depth; i++) {
          const allowed = session.allowedIndices();
          if (allowed.length === 0) {
            break;
          }
          const pick = allowed[Math.floor(rand() * allowed.length)];
          if (session.stepToken(pick) === "Accepted") {
            accepted = true;
            break;
          }
        }
        if (accepted) {
          // a finished session has no next mask to compare
          session.close();
          continue;
        }
        const vocabFile = join(work, `probe-${probe}.json`);
        writeFileSync(vocabFile, JSON.stringify(vocab));
        const reference = cliMaskBytes(
          pdaPath,
          vocabFile,
          session.consumed(),
          join(work, `probe-${probe}.bin`),
        );
        expect(Buffer.from(session.mask()).equals(reference)).toBe(true);
        session.close();
      }
    },
    120_000,
  );
});
