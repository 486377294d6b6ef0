"""Grammar files: parsing, EBNF desugaring, validation, and structural analysis.

The grammar file format is line-oriented:

    # comment
    %tokentypes NAME NUMBER NEWLINE ENDMARKER
    %start file_input
    %endmarker ENDMARKER
    file_input: (NEWLINE | stmt)* ENDMARKER
    stmt: 'pass' NEWLINE

Rule bodies use ``'literal'`` for syntax-strings, ``UPPERNAME`` for
token-types, ``lowername`` for non-terminals, ``|`` alternation, ``( )``
grouping, ``[ ]`` optionals, and postfix ``*`` / ``+``. Continuation lines
are indented. Desugaring replaces every EBNF operator with fresh helper
non-terminals named ``lhs__optN`` / ``lhs__repN`` / ``lhs__grpN`` so
compiled automata are reproducible run to run.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

NONTERMINAL = "nt"
SYNTAX_STRING = "str"
TOKEN_TYPE = "tok"


@dataclass(frozen=True, order=True)
class Symbol:
    """A grammar symbol: non-terminal, syntax-string literal, or token-type."""

    kind: str
    name: str

    @property
    def is_terminal(self) -> bool:
        return self.kind != NONTERMINAL

    def display(self) -> str:
        if self.kind == SYNTAX_STRING:
            return f"'{self.name}'"
        return self.name


def nonterminal(name: str) -> Symbol:
    return Symbol(NONTERMINAL, name)


def syntax_string(text: str) -> Symbol:
    return Symbol(SYNTAX_STRING, text)


def token_type(name: str) -> Symbol:
    return Symbol(TOKEN_TYPE, name)


@dataclass(frozen=True)
class Production:
    lhs: str
    rhs: tuple[Symbol, ...]  # empty tuple = epsilon production


class GrammarError(Exception):
    """Problem in a grammar file; carries a 1-based line/column when known."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", col {col}" if col is not None else "") + ")"
        super().__init__(message + loc)


class GrammarSyntaxError(GrammarError):
    pass


class UndefinedSymbolError(GrammarError):
    pass


class DuplicateRuleError(GrammarError):
    pass


class LeftRecursionError(GrammarError):
    def __init__(self, cycles: list[list[str]]):
        self.cycles = cycles
        shown = "; ".join(" -> ".join(c + [c[0]]) for c in cycles)
        super().__init__(f"grammar is left-recursive: {shown}")


# --- EBNF syntax tree (pre-desugaring) ---------------------------------------


@dataclass(frozen=True)
class Ref:
    """Reference to a symbol by source spelling; resolved during desugaring."""

    kind: str  # NONTERMINAL / SYNTAX_STRING / TOKEN_TYPE
    name: str
    line: int
    col: int


@dataclass(frozen=True)
class Opt:
    alts: tuple[tuple, ...]  # [ x ]


@dataclass(frozen=True)
class Group:
    alts: tuple[tuple, ...]  # ( x )


@dataclass(frozen=True)
class Repeat:
    item: object
    at_least_one: bool  # x+ vs x*


@dataclass
class EbnfRule:
    name: str
    alts: list[tuple]  # each alternative is a tuple of items
    line: int


@dataclass
class EbnfGrammar:
    """A parsed grammar file before EBNF desugaring."""

    rules: list[EbnfRule]
    start: str
    end_marker: str
    declared_token_types: tuple[str, ...] | None  # None: infer from usage


@dataclass(frozen=True)
class Grammar:
    """Plain-production grammar (no EBNF operators remain)."""

    productions: tuple[Production, ...]
    start: str
    token_types: tuple[str, ...]
    end_marker: str

    @property
    def nonterminals(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for p in self.productions:
            seen.setdefault(p.lhs, None)
        return tuple(seen)

    @property
    def literals(self) -> frozenset[str]:
        return frozenset(
            s.name for p in self.productions for s in p.rhs if s.kind == SYNTAX_STRING
        )

    @property
    def terminals(self) -> frozenset[Symbol]:
        out = {syntax_string(t) for t in self.literals}
        out.update(token_type(t) for t in self.token_types)
        return frozenset(out)

    def productions_of(self, name: str) -> tuple[Production, ...]:
        return tuple(p for p in self.productions if p.lhs == name)


@dataclass
class GrammarReport:
    left_recursive_cycles: list[list[str]]
    nullable: set[str]
    is_deterministic_candidate: bool
    determinism_violations: list[tuple[str, str]]  # (state, stack-symbol) pairs


# --- grammar-file tokenizer ---------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<lit>'(?:[^'\\]|\\.)*')
    | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<punct>[|()\[\]*+])
    """,
    re.VERBOSE,
)

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class _Tok:
    kind: str  # 'lit' | 'name' | 'punct'
    text: str
    line: int
    col: int


def _tokenize_body(body: str, line: int, col0: int) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(body):
        m = _TOKEN_RE.match(body, pos)
        if not m:
            raise GrammarSyntaxError(
                f"unexpected character {body[pos]!r}", line, col0 + pos + 1
            )
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        toks.append(_Tok(kind, m.group(), line, col0 + m.start() + 1))
    return toks


def _strip_comment(line: str) -> str:
    # '#' inside a quoted literal does not start a comment
    out = []
    in_str = False
    i = 0
    while i < len(line):
        ch = line[i]
        if in_str:
            if ch == "\\" and i + 1 < len(line):
                out.append(line[i : i + 2])
                i += 2
                continue
            if ch == "'":
                in_str = False
        else:
            if ch == "#":
                break
            if ch == "'":
                in_str = True
        out.append(ch)
        i += 1
    return "".join(out)


def _unquote(text: str, line: int, col: int) -> str:
    body = text[1:-1]
    try:
        value = body.encode().decode("unicode_escape")
    except UnicodeDecodeError as exc:
        raise GrammarSyntaxError(f"bad escape in literal {text}: {exc}", line, col)
    if not value:
        raise GrammarSyntaxError("empty syntax-string literal", line, col)
    return value


# --- EBNF parsing -------------------------------------------------------------


class _BodyParser:
    def __init__(self, toks: list[_Tok], line: int):
        self.toks = toks
        self.i = 0
        self.line = line

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise GrammarSyntaxError("unexpected end of rule body", self.line)
        self.i += 1
        return tok

    def expect_punct(self, text: str) -> None:
        tok = self.next()
        if tok.kind != "punct" or tok.text != text:
            raise GrammarSyntaxError(
                f"expected {text!r}, found {tok.text!r}", tok.line, tok.col
            )

    def parse_alts(self, stop: set[str]) -> tuple[tuple, ...]:
        alts = [self.parse_seq(stop)]
        while True:
            tok = self.peek()
            if tok is not None and tok.kind == "punct" and tok.text == "|":
                self.next()
                alts.append(self.parse_seq(stop))
            else:
                break
        return tuple(alts)

    def parse_seq(self, stop: set[str]) -> tuple:
        items = []
        while True:
            tok = self.peek()
            if tok is None or (tok.kind == "punct" and tok.text in stop | {"|"}):
                break
            items.append(self.parse_item())
        return tuple(items)

    def parse_item(self):
        item = self.parse_primary()
        while True:
            tok = self.peek()
            if tok is not None and tok.kind == "punct" and tok.text in ("*", "+"):
                self.next()
                item = Repeat(item, at_least_one=(tok.text == "+"))
            else:
                break
        return item

    def parse_primary(self):
        tok = self.next()
        if tok.kind == "lit":
            return Ref(SYNTAX_STRING, _unquote(tok.text, tok.line, tok.col), tok.line, tok.col)
        if tok.kind == "name":
            kind = TOKEN_TYPE if tok.text.isupper() else NONTERMINAL
            return Ref(kind, tok.text, tok.line, tok.col)
        if tok.text == "(":
            alts = self.parse_alts({")"})
            self.expect_punct(")")
            return Group(alts)
        if tok.text == "[":
            alts = self.parse_alts({"]"})
            self.expect_punct("]")
            return Opt(alts)
        raise GrammarSyntaxError(f"unexpected {tok.text!r}", tok.line, tok.col)


def parse_ebnf(text: str) -> EbnfGrammar:
    """Parse grammar-file text into its pre-desugaring form."""
    rules: list[EbnfRule] = []
    start: str | None = None
    end_marker = "ENDMARKER"
    declared: tuple[str, ...] | None = None

    # Assemble logical lines: an indented line continues the previous rule.
    logical: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = _strip_comment(raw)
        if not stripped.strip():
            continue
        if stripped[0].isspace() and logical and not logical[-1][1].startswith("%"):
            prev_no, prev = logical[-1]
            logical[-1] = (prev_no, prev + " " + stripped.strip())
        else:
            logical.append((lineno, stripped.strip()))

    seen: set[str] = set()
    for lineno, line in logical:
        if line.startswith("%"):
            parts = line.split()
            directive = parts[0]
            if directive == "%start":
                if len(parts) != 2:
                    raise GrammarSyntaxError("%start takes one name", lineno)
                start = parts[1]
            elif directive == "%endmarker":
                if len(parts) != 2:
                    raise GrammarSyntaxError("%endmarker takes one name", lineno)
                end_marker = parts[1]
            elif directive == "%tokentypes":
                for name in parts[1:]:
                    if not name.isupper() or not _NAME_RE.match(name):
                        raise GrammarSyntaxError(
                            f"bad token-type name {name!r}", lineno
                        )
                declared = tuple(parts[1:])
            else:
                raise GrammarSyntaxError(f"unknown directive {directive}", lineno)
            continue
        m = re.match(r"([A-Za-z_][A-Za-z0-9_]*)\s*:\s*(.*)$", line)
        if not m:
            raise GrammarSyntaxError(f"expected 'name: body', found {line!r}", lineno)
        name, body = m.group(1), m.group(2)
        if name.isupper():
            raise GrammarSyntaxError(
                f"rule name {name!r} is upper-case (reserved for token-types)", lineno
            )
        if name in seen:
            raise DuplicateRuleError(f"duplicate definition of {name!r}", lineno)
        seen.add(name)
        parser = _BodyParser(_tokenize_body(body, lineno, m.start(2)), lineno)
        alts = parser.parse_alts(stop=set())
        if parser.peek() is not None:
            tok = parser.peek()
            raise GrammarSyntaxError(f"trailing {tok.text!r}", tok.line, tok.col)
        rules.append(EbnfRule(name, list(alts), lineno))

    if not rules:
        raise GrammarSyntaxError("grammar file defines no rules", 1)
    if start is None:
        start = rules[0].name
    return EbnfGrammar(rules, start, end_marker, declared)


# --- desugaring ---------------------------------------------------------------


class _Desugarer:
    def __init__(self, ebnf: EbnfGrammar):
        self.ebnf = ebnf
        self.defined = {r.name for r in ebnf.rules}
        self.taken = set(self.defined)
        self.productions: list[Production] = []
        self.used_token_types: dict[str, Ref] = {}
        self.used_nonterminals: dict[str, Ref] = {}

    def fresh(self, lhs: str, tag: str, counter: dict[str, int]) -> str:
        while True:
            n = counter[tag] = counter.get(tag, 0) + 1
            name = f"{lhs}__{tag}{n - 1}"
            if name not in self.taken:
                self.taken.add(name)
                return name

    def run(self) -> Grammar:
        for rule in self.ebnf.rules:
            counter: dict[str, int] = {}
            for alt in rule.alts:
                rhs = self.flatten_seq(rule.name, alt, counter)
                self.productions.append(Production(rule.name, tuple(rhs)))
        self.validate()
        token_types = self.resolve_token_types()
        return Grammar(
            productions=tuple(self.productions),
            start=self.ebnf.start,
            token_types=token_types,
            end_marker=self.ebnf.end_marker,
        )

    def flatten_seq(self, lhs: str, items: tuple, counter) -> list[Symbol]:
        out: list[Symbol] = []
        for item in items:
            out.extend(self.flatten_item(lhs, item, counter))
        return out

    def flatten_item(self, lhs: str, item, counter) -> list[Symbol]:
        if isinstance(item, Ref):
            if item.kind == NONTERMINAL:
                self.used_nonterminals.setdefault(item.name, item)
                return [nonterminal(item.name)]
            if item.kind == TOKEN_TYPE:
                self.used_token_types.setdefault(item.name, item)
                return [token_type(item.name)]
            return [syntax_string(item.name)]
        if isinstance(item, Opt):
            helper = self.fresh(lhs, "opt", counter)
            for alt in item.alts:
                rhs = self.flatten_seq(lhs, alt, counter)
                self.productions.append(Production(helper, tuple(rhs)))
            self.productions.append(Production(helper, ()))
            return [nonterminal(helper)]
        if isinstance(item, Group):
            helper = self.fresh(lhs, "grp", counter)
            for alt in item.alts:
                rhs = self.flatten_seq(lhs, alt, counter)
                self.productions.append(Production(helper, tuple(rhs)))
            return [nonterminal(helper)]
        if isinstance(item, Repeat):
            unit = self.flatten_item(lhs, item.item, counter)
            helper = self.fresh(lhs, "rep", counter)
            self.productions.append(Production(helper, tuple(unit) + (nonterminal(helper),)))
            self.productions.append(Production(helper, ()))
            if item.at_least_one:
                return list(unit) + [nonterminal(helper)]
            return [nonterminal(helper)]
        raise AssertionError(f"unknown EBNF item {item!r}")

    def validate(self) -> None:
        defined = {p.lhs for p in self.productions}
        for name, ref in self.used_nonterminals.items():
            if name not in defined:
                raise UndefinedSymbolError(
                    f"undefined non-terminal {name!r}", ref.line, ref.col
                )
        if self.ebnf.start not in defined:
            raise UndefinedSymbolError(f"start symbol {self.ebnf.start!r} has no rule")
        declared = self.ebnf.declared_token_types
        if declared is not None:
            declared_set = set(declared)
            for name, ref in self.used_token_types.items():
                if name not in declared_set:
                    raise UndefinedSymbolError(
                        f"token-type {name!r} not in %tokentypes", ref.line, ref.col
                    )

    def resolve_token_types(self) -> tuple[str, ...]:
        if self.ebnf.declared_token_types is not None:
            names = list(self.ebnf.declared_token_types)
        else:
            names = sorted(self.used_token_types)
        if self.ebnf.end_marker not in names:
            names.append(self.ebnf.end_marker)
        return tuple(names)


def desugar(ebnf: EbnfGrammar) -> Grammar:
    """Replace every EBNF construct with plain productions over fresh helpers."""
    return _Desugarer(ebnf).run()


def parse_grammar(text: str) -> Grammar:
    """Parse and desugar a grammar file in one step."""
    return desugar(parse_ebnf(text))


# --- structural analysis ------------------------------------------------------


def compute_nullable(g: Grammar) -> set[str]:
    nullable: set[str] = set()
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            if p.lhs in nullable:
                continue
            if all(s.kind == NONTERMINAL and s.name in nullable for s in p.rhs):
                nullable.add(p.lhs)
                changed = True
    return nullable


def _left_corners(g: Grammar, nullable: set[str]) -> dict[str, set[str]]:
    """Direct left-corner non-terminals of each non-terminal, through nullable prefixes."""
    corners: dict[str, set[str]] = {n: set() for n in g.nonterminals}
    for p in g.productions:
        for sym in p.rhs:
            if sym.kind != NONTERMINAL:
                break
            corners[p.lhs].add(sym.name)
            if sym.name not in nullable:
                break
    return corners


def first_terminals(g: Grammar, nullable: set[str]) -> dict[str, set[Symbol]]:
    """FIRST sets over terminals, nullable-aware fixpoint."""
    first: dict[str, set[Symbol]] = {n: set() for n in g.nonterminals}
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            acc = first[p.lhs]
            before = len(acc)
            for sym in p.rhs:
                if sym.is_terminal:
                    acc.add(sym)
                    break
                acc |= first[sym.name]
                if sym.name not in nullable:
                    break
            if len(acc) != before:
                changed = True
    return first


def first_of_sequence(
    seq: tuple[Symbol, ...], first: dict[str, set[Symbol]], nullable: set[str]
) -> set[Symbol]:
    out: set[Symbol] = set()
    for sym in seq:
        if sym.is_terminal:
            out.add(sym)
            break
        out |= first[sym.name]
        if sym.name not in nullable:
            break
    return out


def _cycles(corners: dict[str, set[str]], order: list[str]) -> list[list[str]]:
    """Strongly connected components of the left-corner graph that contain a cycle."""
    index: dict[str, int] = {}
    lowlink: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = [0]
    out: list[list[str]] = []

    def strongconnect(v: str) -> None:
        # iterative Tarjan to survive deep grammars
        work = [(v, iter(sorted(corners.get(v, ()), key=order.index)))]
        index[v] = lowlink[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        while work:
            node, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = lowlink[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(sorted(corners.get(w, ()), key=order.index))))
                    advanced = True
                    break
                if w in on_stack:
                    lowlink[node] = min(lowlink[node], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
            if lowlink[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                has_cycle = len(comp) > 1 or node in corners.get(node, ())
                if has_cycle:
                    comp_set = set(comp)
                    out.append([n for n in order if n in comp_set])

    for v in order:
        if v not in index:
            strongconnect(v)
    return out


def analyze(g: Grammar) -> GrammarReport:
    """Compute nullability, left-recursion cycles, and the determinism diagnostic."""
    nullable = compute_nullable(g)
    order = list(g.nonterminals)
    cycles = _cycles(_left_corners(g, nullable), order)

    first = first_terminals(g, nullable)
    violations: list[tuple[str, str]] = []
    for name in order:
        prods = g.productions_of(name)
        if len(prods) < 2:
            continue
        seen_terms: set[Symbol] = set()
        clash = False
        for p in prods:
            f = first_of_sequence(p.rhs, first, nullable)
            if f & seen_terms:
                clash = True
            seen_terms |= f
        if clash or sum(1 for p in prods if not p.rhs or all(
            s.kind == NONTERMINAL and s.name in nullable for s in p.rhs
        )) > 1:
            violations.append((g.start, name))
    return GrammarReport(
        left_recursive_cycles=cycles,
        nullable=nullable,
        is_deterministic_candidate=not violations,
        determinism_violations=violations,
    )
