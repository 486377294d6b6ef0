"""Pushdown automaton compiled from a grammar, and deduction over it.

The automaton is the 7-tuple built from a plain-production grammar: states
are the non-terminal names, the input alphabet is the terminal set, the
stack alphabet is terminals plus non-terminals, and the transition
function has exactly two rule classes:

  * stack-top non-terminal N: an epsilon move replacing N by each of its
    production bodies (first body symbol ends up on top);
  * stack-top terminal T: consuming T pops T.

Deduction tracks a *set* of (state, stack) configurations because the
automaton is nondeterministic. Acceptance: the end-marker terminal has
been consumed and some configuration has an empty stack.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

from .grammar import (
    Grammar,
    GrammarError,
    LeftRecursionError,
    NONTERMINAL,
    SYNTAX_STRING,
    TOKEN_TYPE,
    Symbol,
    analyze,
    nonterminal,
    syntax_string,
    token_type,
)

DEFAULT_CLOSURE_BUDGET = 100_000


class ClosureBudgetError(Exception):
    """Epsilon-closure exceeded its expansion budget (pathological grammar)."""

    def __init__(self, budget: int, deepest: "Configuration"):
        self.budget = budget
        self.deepest = deepest
        top = deepest.stack[-1].display() if deepest.stack else "<empty>"
        super().__init__(
            f"closure budget of {budget} expansions exceeded; deepest chain has "
            f"{len(deepest.stack)} stack symbols with {top} on top"
        )


class CorruptPdaError(Exception):
    pass


class SessionStateError(Exception):
    """A session was stepped while not Active."""


@dataclass(frozen=True)
class Configuration:
    state: str
    stack: tuple[Symbol, ...]  # top is the last element


@dataclass(frozen=True)
class ConfigSet:
    configs: frozenset[Configuration]

    def __iter__(self):
        return iter(self.configs)

    def __len__(self):
        return len(self.configs)

    def __bool__(self):
        return bool(self.configs)


@dataclass(frozen=True)
class ValidSet:
    """Valid next terminals with their successor configurations."""

    entries: dict[Symbol, frozenset[Configuration]]
    can_accept: bool

    def terminals(self) -> list[Symbol]:
        return sorted(self.entries)

    def __contains__(self, terminal: Symbol) -> bool:
        return terminal in self.entries


@dataclass(frozen=True)
class Pda:
    """Compiled automaton. Immutable; share freely across threads."""

    nonterminals: tuple[str, ...]  # sorted
    literals: tuple[str, ...]  # sorted syntax-string texts
    token_types: tuple[str, ...]  # sorted
    start: str
    end_marker: str
    productions: dict[str, tuple[tuple[Symbol, ...], ...]]  # lhs -> sorted bodies
    _closure_memo: dict = field(default_factory=dict, compare=False, repr=False)
    _valid_set_memo: dict = field(default_factory=dict, compare=False, repr=False)

    # -- 7-tuple views --------------------------------------------------------

    @property
    def states(self) -> frozenset[str]:
        return frozenset(self.nonterminals)

    @property
    def input_alphabet(self) -> frozenset[Symbol]:
        out = {syntax_string(t) for t in self.literals}
        out.update(token_type(t) for t in self.token_types)
        return frozenset(out)

    @property
    def stack_alphabet(self) -> frozenset[Symbol]:
        return self.input_alphabet | {nonterminal(n) for n in self.nonterminals}

    @property
    def start_state(self) -> str:
        return self.start

    @property
    def start_stack_symbol(self) -> Symbol:
        return nonterminal(self.start)

    @property
    def accept_set(self) -> frozenset[Symbol]:
        return frozenset({token_type(self.end_marker)})

    @property
    def end_marker_symbol(self) -> Symbol:
        return token_type(self.end_marker)

    def delta(
        self, state: str, stack_top: Symbol, inp: Symbol | None
    ) -> frozenset[tuple[str, tuple[Symbol, ...]]]:
        """Transition function; ``inp`` is None for the epsilon move."""
        if inp is None:
            if stack_top.kind == NONTERMINAL:
                return frozenset(
                    (state, body) for body in self.productions[stack_top.name]
                )
            return frozenset()
        if stack_top.is_terminal and stack_top == inp:
            return frozenset({(state, ())})
        return frozenset()

    def terminal_symbol(self, name: str) -> Symbol:
        """Resolve a terminal spelled as plain text (wire-format convention)."""
        if name in self.token_types:
            return token_type(name)
        if name in self.literals:
            return syntax_string(name)
        # unknown terminals stay well-typed so stepping them reports TSM
        if name.isupper():
            return token_type(name)
        return syntax_string(name)

    def initial_config_set(self) -> ConfigSet:
        return ConfigSet(
            frozenset({Configuration(self.start, (self.start_stack_symbol,))})
        )


def compile(g: Grammar) -> Pda:
    """Compile a desugared grammar; rejects left-recursive grammars."""
    report = analyze(g)
    if report.left_recursive_cycles:
        raise LeftRecursionError(report.left_recursive_cycles)
    productions: dict[str, list[tuple[Symbol, ...]]] = {}
    for p in g.productions:
        productions.setdefault(p.lhs, []).append(p.rhs)
    return Pda(
        nonterminals=tuple(sorted(productions)),
        literals=tuple(sorted(g.literals)),
        token_types=tuple(sorted(g.token_types)),
        start=g.start,
        end_marker=g.end_marker,
        productions={n: tuple(sorted(bodies)) for n, bodies in sorted(productions.items())},
    )


# --- deduction ----------------------------------------------------------------


def closure(
    pda: Pda, configs: ConfigSet, budget: int = DEFAULT_CLOSURE_BUDGET
) -> ConfigSet:
    """All configurations reachable by epsilon moves whose stack-top is a
    terminal, plus empty-stack configurations. BFS with a visited set."""
    result: set[Configuration] = set()
    for config in configs:
        result |= _closure_one(pda, config, budget)
    return ConfigSet(frozenset(result))


def _expand_nonterminal(
    pda: Pda, state: str, name: str, budget: int
) -> tuple[frozenset[tuple[Symbol, ...]], bool]:
    """Stacks with a terminal on top reachable by epsilon moves from the
    single-symbol stack [name], plus whether the empty stack is reachable.
    Composable with any stack below, so it is memoized per non-terminal."""
    cached = pda._closure_memo.get(name)
    if cached is not None:
        return cached
    result: set[tuple[Symbol, ...]] = set()
    empty_reachable = False
    start_stack = (nonterminal(name),)
    queue = [start_stack]
    visited = {start_stack}
    expansions = 0
    deepest = start_stack
    while queue:
        stack = queue.pop()
        if stack[-1].is_terminal:
            result.add(stack)
            continue
        expansions += 1
        if expansions > budget:
            raise ClosureBudgetError(budget, Configuration(state, deepest))
        below = stack[:-1]
        for body in pda.productions[stack[-1].name]:
            nxt = below + tuple(reversed(body))
            if not nxt:
                empty_reachable = True
                continue
            if len(nxt) > len(deepest):
                deepest = nxt
            if nxt not in visited:
                visited.add(nxt)
                queue.append(nxt)
    out = (frozenset(result), empty_reachable)
    pda._closure_memo[name] = out
    return out


def _closure_one(pda: Pda, config: Configuration, budget: int) -> set[Configuration]:
    result: set[Configuration] = set()
    stack = config.stack
    while True:
        if not stack or stack[-1].is_terminal:
            result.add(Configuration(config.state, stack))
            return result
        suffixes, empty_reachable = _expand_nonterminal(
            pda, config.state, stack[-1].name, budget
        )
        below = stack[:-1]
        for suffix in suffixes:
            result.add(Configuration(config.state, below + suffix))
        if not empty_reachable:
            return result
        stack = below  # the top non-terminal can vanish; keep closing below


def valid_set(
    pda: Pda, configs: ConfigSet, budget: int = DEFAULT_CLOSURE_BUDGET
) -> ValidSet:
    """Valid next-terminal set with successor configurations (post-pop).

    Results are cached on the automaton: frontiers recur constantly
    (every statement boundary of a grammar shares one), and reverifying
    a generated stream replays the exact same frontiers."""
    cached = pda._valid_set_memo.get(configs)
    if cached is not None:
        return cached
    closed = closure(pda, configs, budget)
    entries: dict[Symbol, set[Configuration]] = {}
    can_accept = False
    for config in closed:
        if not config.stack:
            can_accept = True
            continue
        top = config.stack[-1]
        entries.setdefault(top, set()).add(
            Configuration(config.state, config.stack[:-1])
        )
    result = ValidSet(
        entries={t: frozenset(cs) for t, cs in entries.items()},
        can_accept=can_accept,
    )
    pda._valid_set_memo[configs] = result
    return result


ACTIVE = "active"
ACCEPTED = "accepted"
FAILED_TSM = "failed_tsm"


@dataclass
class Session:
    """Incremental deduction state. Single-owner mutable value."""

    pda: Pda
    current: ConfigSet
    consumed: list[tuple[Symbol, str]] = field(default_factory=list)
    status: str = ACTIVE
    failure_position: int | None = None
    failure_terminal: Symbol | None = None
    budget: int = DEFAULT_CLOSURE_BUDGET

    @classmethod
    def start(cls, pda: Pda, budget: int = DEFAULT_CLOSURE_BUDGET) -> "Session":
        return cls(pda=pda, current=pda.initial_config_set(), budget=budget)

    def fork(self) -> "Session":
        return Session(
            pda=self.pda,
            current=self.current,
            consumed=list(self.consumed),
            status=self.status,
            failure_position=self.failure_position,
            failure_terminal=self.failure_terminal,
            budget=self.budget,
        )

    def valid_set(self) -> ValidSet:
        return valid_set(self.pda, self.current, self.budget)


def step(session: Session, terminal: Symbol, surface: str = "") -> Session:
    """Consume one terminal. On an invalid terminal the session flips to
    FailedTSM but keeps its pre-failure frontier for post-mortem inspection."""
    if session.status != ACTIVE:
        raise SessionStateError(f"cannot step a session in status {session.status!r}")
    return step_with_valid_set(session, session.valid_set(), terminal, surface)


def step_with_valid_set(
    session: Session, v: ValidSet, terminal: Symbol, surface: str = ""
) -> Session:
    """Step variant for callers that already computed this frontier's valid
    set (the decoder scores it before stepping)."""
    if session.status != ACTIVE:
        raise SessionStateError(f"cannot step a session in status {session.status!r}")
    if terminal not in v:
        session.status = FAILED_TSM
        session.failure_position = len(session.consumed)
        session.failure_terminal = terminal
        return session
    successors = v.entries[terminal]
    session.current = ConfigSet(frozenset(successors))
    session.consumed.append((terminal, surface))
    if terminal == session.pda.end_marker_symbol and any(
        not c.stack for c in successors
    ):
        session.status = ACCEPTED
    return session


RESULT_ACCEPTED = "accepted"
RESULT_TSM = "tsm"
RESULT_ENS = "ens"


@dataclass(frozen=True)
class RecognitionResult:
    status: str  # RESULT_ACCEPTED | RESULT_TSM | RESULT_ENS
    position: int | None = None  # TSM: offending index; ENS: stream length
    terminal: Symbol | None = None  # TSM: the offending terminal
    expected: ValidSet | None = None  # TSM: valid set at failure; ENS: final valid set

    @property
    def accepted(self) -> bool:
        return self.status == RESULT_ACCEPTED


def recognize(
    pda: Pda,
    tokens: list[tuple[Symbol, str]],
    budget: int = DEFAULT_CLOSURE_BUDGET,
) -> RecognitionResult:
    """Run the terminal sequence; classify the outcome as Accepted, TSM
    (invalid terminal mid-sequence) or ENS (exhausted without acceptance)."""
    session = Session.start(pda, budget)
    for terminal, surface in tokens:
        if session.status == ACCEPTED:
            # trailing input after acceptance is a mismatch at that position
            return RecognitionResult(
                RESULT_TSM,
                position=len(session.consumed),
                terminal=terminal,
                expected=ValidSet(entries={}, can_accept=True),
            )
        step(session, terminal, surface)
        if session.status == FAILED_TSM:
            return RecognitionResult(
                RESULT_TSM,
                position=session.failure_position,
                terminal=terminal,
                expected=valid_set(pda, session.current, budget),
            )
    if session.status == ACCEPTED:
        return RecognitionResult(RESULT_ACCEPTED)
    return RecognitionResult(
        RESULT_ENS,
        position=len(tokens),
        expected=valid_set(pda, session.current, budget),
    )


# --- serialization ------------------------------------------------------------

_MAGIC = b"PDA1"
_VERSION = 1
_KIND_CODE = {NONTERMINAL: 0, SYNTAX_STRING: 1, TOKEN_TYPE: 2}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


def _write_str_table(buf: io.BytesIO, items: tuple[str, ...]) -> None:
    buf.write(struct.pack("<I", len(items)))
    for item in items:
        data = item.encode("utf-8")
        buf.write(struct.pack("<I", len(data)))
        buf.write(data)


def serialize(pda: Pda) -> bytes:
    """Versioned binary form; deterministic because all tables are sorted."""
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<H", _VERSION))
    _write_str_table(buf, pda.nonterminals)
    _write_str_table(buf, pda.literals)
    _write_str_table(buf, pda.token_types)
    nt_index = {n: i for i, n in enumerate(pda.nonterminals)}
    lit_index = {t: i for i, t in enumerate(pda.literals)}
    tok_index = {t: i for i, t in enumerate(pda.token_types)}

    def sym_index(sym: Symbol) -> int:
        if sym.kind == NONTERMINAL:
            return nt_index[sym.name]
        if sym.kind == SYNTAX_STRING:
            return lit_index[sym.name]
        return tok_index[sym.name]

    buf.write(struct.pack("<I", nt_index[pda.start]))
    buf.write(struct.pack("<I", tok_index[pda.end_marker]))
    rows = [
        (nt_index[lhs], body)
        for lhs, bodies in sorted(pda.productions.items())
        for body in bodies
    ]
    buf.write(struct.pack("<I", len(rows)))
    for lhs_i, body in rows:
        buf.write(struct.pack("<II", lhs_i, len(body)))
        for sym in body:
            buf.write(struct.pack("<BI", _KIND_CODE[sym.kind], sym_index(sym)))
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise CorruptPdaError("truncated payload")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def take_bytes(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptPdaError("truncated payload")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def str_table(self) -> tuple[str, ...]:
        (count,) = self.take("<I")
        items = []
        for _ in range(count):
            (length,) = self.take("<I")
            try:
                items.append(self.take_bytes(length).decode("utf-8"))
            except UnicodeDecodeError as exc:
                raise CorruptPdaError(f"bad utf-8 in symbol table: {exc}")
        return tuple(items)


def deserialize(data: bytes) -> Pda:
    reader = _Reader(data)
    if reader.take_bytes(4) != _MAGIC:
        raise CorruptPdaError("bad magic; not a serialized PDA")
    (version,) = reader.take("<H")
    if version != _VERSION:
        raise CorruptPdaError(f"unsupported PDA format version {version}")
    nonterminals = reader.str_table()
    literals = reader.str_table()
    token_types = reader.str_table()
    tables = {
        _KIND_CODE[NONTERMINAL]: (nonterminals, nonterminal),
        _KIND_CODE[SYNTAX_STRING]: (literals, syntax_string),
        _KIND_CODE[TOKEN_TYPE]: (token_types, token_type),
    }
    (start_i,) = reader.take("<I")
    (end_i,) = reader.take("<I")
    if start_i >= len(nonterminals) or end_i >= len(token_types):
        raise CorruptPdaError("start/end-marker index out of range")
    (n_rows,) = reader.take("<I")
    productions: dict[str, list[tuple[Symbol, ...]]] = {n: [] for n in nonterminals}
    for _ in range(n_rows):
        lhs_i, length = reader.take("<II")
        if lhs_i >= len(nonterminals):
            raise CorruptPdaError("production lhs index out of range")
        body = []
        for _ in range(length):
            code, idx = reader.take("<BI")
            if code not in tables:
                raise CorruptPdaError(f"bad symbol kind code {code}")
            names, make = tables[code]
            if idx >= len(names):
                raise CorruptPdaError("symbol index out of range")
            body.append(make(names[idx]))
        productions[nonterminals[lhs_i]].append(tuple(body))
    if reader.pos != len(reader.data):
        raise CorruptPdaError("trailing bytes after PDA payload")
    return Pda(
        nonterminals=nonterminals,
        literals=literals,
        token_types=token_types,
        start=nonterminals[start_i],
        end_marker=token_types[end_i],
        productions={n: tuple(bodies) for n, bodies in productions.items()},
    )
