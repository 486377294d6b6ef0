"""Command-line surface: compile grammars, inspect valid sets, recognize
token streams, lex sources, build vocabulary masks, generate, and score
corpora. All JSON output is key-sorted so identical invocations are
byte-identical."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import decode, grammar, lexer, lexmap, metrics, pda

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_GRAMMAR = 2
EXIT_REJECTED = 3
EXIT_INTERNAL = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text)


def _load_pda(path: str) -> pda.Pda:
    with open(path, "rb") as fh:
        return pda.deserialize(fh.read())


def _budget() -> int:
    raw = os.environ.get("PDA_CLOSURE_BUDGET")
    return int(raw) if raw else pda.DEFAULT_CLOSURE_BUDGET


def _parse_token_pairs(machine: pda.Pda, raw: str) -> list[tuple[grammar.Symbol, str]]:
    data = json.loads(raw)
    if not isinstance(data, list):
        raise UsageError("token JSON must be a list of [terminal, surface] pairs")
    out = []
    for pair in data:
        if not (isinstance(pair, list) and len(pair) == 2):
            raise UsageError(f"bad token pair {pair!r}")
        out.append((machine.terminal_symbol(pair[0]), pair[1]))
    return out


def _split_valid(machine: pda.Pda, v: pda.ValidSet) -> tuple[list[str], list[str]]:
    strings, types = [], []
    for t in v.terminals():
        (strings if t.kind == grammar.SYNTAX_STRING else types).append(t.name)
    return strings, types


def cmd_check_grammar(args) -> int:
    with open(args.grammar_file, encoding="utf-8") as fh:
        g = grammar.parse_grammar(fh.read())
    report = grammar.analyze(g)
    payload = {
        "left_recursive_cycles": report.left_recursive_cycles,
        "nullable": sorted(report.nullable),
        "is_deterministic_candidate": report.is_deterministic_candidate,
        "determinism_violations": [list(v) for v in report.determinism_violations],
        "n_productions": len(g.productions),
        "n_syntax_strings": len(g.literals),
        "n_token_types": len(g.token_types),
        "start": g.start,
    }
    lines = [
        f"start: {g.start}",
        f"productions: {len(g.productions)}",
        f"syntax-strings: {len(g.literals)}, token-types: {len(g.token_types)}",
        f"left-recursive cycles: {report.left_recursive_cycles or 'none'}",
        f"nullable: {sorted(report.nullable) or 'none'}",
        f"deterministic candidate: {report.is_deterministic_candidate}"
        + (
            f" (violations: {report.determinism_violations})"
            if report.determinism_violations
            else ""
        ),
    ]
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_compile(args) -> int:
    with open(args.grammar_file, encoding="utf-8") as fh:
        g = grammar.parse_grammar(fh.read())
    machine = pda.compile(g)
    data = pda.serialize(machine)
    with open(args.output, "wb") as fh:
        fh.write(data)
    payload = {
        "output": args.output,
        "bytes": len(data),
        "states": len(machine.nonterminals),
        "sigma": len(machine.literals) + len(machine.token_types),
    }
    _emit(args, payload, f"wrote {args.output} ({len(data)} bytes)")
    return EXIT_OK


def _session_after_prefix(machine, raw_prefix: str | None):
    session = pda.Session.start(machine, _budget())
    if raw_prefix:
        for terminal, surface in _parse_token_pairs(machine, raw_prefix):
            pda.step(session, terminal, surface)
            if session.status != pda.ACTIVE:
                raise UsageError(
                    f"prefix token {terminal.display()} is not consumable "
                    f"(session status {session.status})"
                )
    return session


def cmd_valid_set(args) -> int:
    machine = _load_pda(args.pda_file)
    session = _session_after_prefix(machine, args.prefix_tokens)
    v = session.valid_set()
    strings, types = _split_valid(machine, v)
    payload = {
        "syntax_strings": strings,
        "token_types": types,
        "can_accept": v.can_accept,
    }
    _emit(
        args,
        payload,
        f"syntax-strings ({len(strings)}): {' '.join(strings)}\n"
        f"token-types ({len(types)}): {' '.join(types)}\n"
        f"can-accept: {v.can_accept}",
    )
    return EXIT_OK


def cmd_recognize(args) -> int:
    machine = _load_pda(args.pda_file)
    if (args.source is None) == (args.tokens is None):
        raise UsageError("recognize needs exactly one of --source / --tokens")
    if args.source is not None:
        with open(args.source, encoding="utf-8") as fh:
            tokens = lexer.lex_terminals(fh.read())
    else:
        tokens = _parse_token_pairs(machine, args.tokens)
    result = pda.recognize(machine, tokens, _budget())
    expected = sorted(t.display() for t in result.expected.entries) if result.expected else []
    if result.status == pda.RESULT_ACCEPTED:
        _emit(args, {"result": "accepted"}, "Accepted")
        return EXIT_OK
    if result.status == pda.RESULT_TSM:
        payload = {
            "result": "tsm",
            "position": result.position,
            "terminal": result.terminal.name,
            "expected": expected,
        }
        text = (
            f"TSM at position {result.position}: {result.terminal.display()} "
            f"(expected: {' '.join(expected)})"
        )
    else:
        payload = {"result": "ens", "position": result.position, "expected": expected}
        text = f"ENS at position {result.position} (expected next: {' '.join(expected)})"
    _emit(args, payload, text)
    return EXIT_REJECTED if args.strict else EXIT_OK


def cmd_lex(args) -> int:
    with open(args.source_file, encoding="utf-8") as fh:
        tokens = lexer.lex(fh.read())
    for tok in tokens:
        print(
            json.dumps(
                {
                    "terminal": tok.terminal.name,
                    "surface": tok.surface,
                    "line": tok.line,
                    "col": tok.col,
                },
                sort_keys=True,
            )
        )
    return EXIT_OK


def _load_vocab(machine: pda.Pda, path: str) -> lexmap.Vocabulary:
    with open(path, encoding="utf-8") as fh:
        entries = json.load(fh)
    if not isinstance(entries, list):
        raise UsageError("vocab file must hold a JSON list of token strings")
    return lexmap.Vocabulary(entries, machine)


def cmd_mask(args) -> int:
    machine = _load_pda(args.pda_file)
    vocab = _load_vocab(machine, args.vocab)
    session = _session_after_prefix(machine, args.prefix_tokens)
    mask = lexmap.build_mask(session.valid_set(), vocab)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(lexmap.mask_to_bytes(mask))
    print(lexmap.mask_to_json(mask))
    return EXIT_OK


def _make_scorer(spec: str, machine: pda.Pda) -> decode.Scorer:
    if spec == "uniform":
        return decode.UniformScorer()
    kind, _, arg = spec.partition(":")
    if not arg:
        raise UsageError(f"scorer {spec!r} needs an argument after ':'")
    if kind == "replay":
        with open(arg, encoding="utf-8") as fh:
            script = _parse_token_pairs(machine, fh.read())
        return decode.ReplayScorer(script)
    if kind == "ngram":
        corpus = _read_corpus(machine, arg)
        return decode.NgramScorer(2, corpus)
    if kind == "extern":
        return decode.ExternScorer(arg)
    raise UsageError(f"unknown scorer {spec!r}")


def _read_corpus(machine: pda.Pda, path: str) -> list[list[tuple[grammar.Symbol, str]]]:
    corpus = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if "tokens" in record:
                corpus.append(
                    [(machine.terminal_symbol(t), s) for t, s in record["tokens"]]
                )
            elif "source" in record:
                corpus.append(lexer.lex_terminals(record["source"]))
            else:
                raise UsageError("corpus records need a 'tokens' or 'source' field")
    return corpus


def cmd_generate(args) -> int:
    machine = _load_pda(args.pda_file)
    scorer = _make_scorer(args.scorer, machine)
    if args.mode == "greedy":
        mode, width = "greedy", 1
    elif args.mode.startswith("beam:"):
        mode, width = "beam", int(args.mode.split(":", 1)[1])
    else:
        raise UsageError(f"mode must be greedy or beam:K, got {args.mode!r}")
    cfg = decode.DecodeConfig(
        alpha=args.alpha,
        mode=mode,
        beam_width=width,
        max_steps=args.max_steps,
        seed=args.seed,
        budget=_budget(),
    )
    result = decode.generate(machine, scorer, cfg)
    if isinstance(scorer, decode.ExternScorer):
        scorer.close()
    payload = {
        "accepted": result.accepted,
        "steps": result.steps,
        "score": round(result.score, 12),
        "tokens": [[t.name, s] for t, s in result.tokens],
    }
    text_lines = [
        f"accepted: {result.accepted} in {result.steps} steps",
        " ".join(t.display() for t, _ in result.tokens),
    ]
    if args.render:
        rendered = decode.render(list(result.tokens))
        payload["rendered"] = rendered
        text_lines.append(rendered.rstrip("\n"))
    _emit(args, payload, "\n".join(text_lines))
    return EXIT_OK


def cmd_eval_gcp(args) -> int:
    machine = _load_pda(args.pda_file)
    corpus = _read_corpus(machine, args.corpus)
    report = metrics.gcp(machine, corpus, _budget())
    payload = report.as_dict()
    _emit(
        args,
        payload,
        f"n: {report.n}\ngcp: {report.gcp}\n"
        f"TSM: {report.error_breakdown['TSM']}, ENS: {report.error_breakdown['ENS']}",
    )
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="pdagen")
    parser.add_argument("--format", choices=("json", "text"), default="json")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-grammar")
    p.add_argument("grammar_file")
    p.set_defaults(func=cmd_check_grammar)

    p = sub.add_parser("compile")
    p.add_argument("grammar_file")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("valid-set")
    p.add_argument("pda_file")
    p.add_argument("--prefix-tokens")
    p.set_defaults(func=cmd_valid_set)

    p = sub.add_parser("recognize")
    p.add_argument("pda_file")
    p.add_argument("--source")
    p.add_argument("--tokens")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("lex")
    p.add_argument("source_file")
    p.set_defaults(func=cmd_lex)

    p = sub.add_parser("mask")
    p.add_argument("pda_file")
    p.add_argument("--vocab", required=True)
    p.add_argument("--prefix-tokens")
    p.add_argument("--out")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("generate")
    p.add_argument("pda_file")
    p.add_argument("--scorer", default="uniform")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--mode", default="greedy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=512)
    p.add_argument("--render", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval-gcp")
    p.add_argument("pda_file")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_eval_gcp)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except grammar.GrammarError as exc:
        print(f"grammar error: {exc}", file=sys.stderr)
        return EXIT_GRAMMAR
    except (
        pda.ClosureBudgetError,
        pda.CorruptPdaError,
        lexer.LexError,
        decode.ScorerError,
        OSError,
        json.JSONDecodeError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
