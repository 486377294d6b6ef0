"""Constrained generation: every emitted terminal is drawn from the PDA's
valid set, so any completed sequence is grammatical by construction.

A pluggable scorer supplies token weights (and optionally PDA-state
weights, mixed in by the convex joint rule ``(p + alpha*q) / (1+alpha)``).
Greedy search is beam search with width 1; every hypothesis owns its own
deduction session. Scorers stand in for any model: uniform, replay,
add-one-smoothed n-gram, or an external process speaking the JSON-lines
protocol documented in the README.
"""

from __future__ import annotations

import json
import math
import random
import subprocess
from dataclasses import dataclass, field

from .grammar import NONTERMINAL, SYNTAX_STRING, Symbol, syntax_string, token_type
from .lexmap import Vocabulary, build_mask
from .pda import (
    ACCEPTED,
    DEFAULT_CLOSURE_BUDGET,
    Pda,
    Session,
    ValidSet,
    step_with_valid_set,
)

# surfaces used for token-type terminals when generating at terminal level
CANONICAL_SURFACES = {
    "NAME": "x",
    "NUMBER": "0",
    "STRING": "'s'",
    "NEWLINE": "",
    "INDENT": "",
    "DEDENT": "",
    "ENDMARKER": "",
    "FSTRING_START": "f'",
    "FSTRING_STRING": "s",
    "FSTRING_END": "'",
}


class ScorerError(Exception):
    pass


class Scorer:
    """Weight source for candidate terminals. Weights must be finite and
    non-negative; an all-zero vector falls back to uniform."""

    def score_tokens(
        self, prefix: list[tuple[Symbol, str]], candidates: list[Symbol]
    ) -> list[float]:
        raise NotImplementedError

    def score_states(self, prefix: list[tuple[Symbol, str]]) -> dict[str, float] | None:
        return None

    def surface_for(self, prefix: list[tuple[Symbol, str]], terminal: Symbol) -> str:
        if terminal.kind == SYNTAX_STRING:
            return terminal.name
        return CANONICAL_SURFACES.get(terminal.name, terminal.name.lower())


class UniformScorer(Scorer):
    def score_tokens(self, prefix, candidates):
        return [1.0] * len(candidates)


class ReplayScorer(Scorer):
    """Replays a scripted token stream; any deviation is a fixture bug."""

    def __init__(self, script: list[tuple[Symbol, str]]):
        self.script = list(script)

    def score_tokens(self, prefix, candidates):
        pos = len(prefix)
        if pos >= len(self.script):
            raise ScorerError(f"replay script exhausted at step {pos}")
        wanted, _ = self.script[pos]
        if wanted not in candidates:
            raise ScorerError(
                f"replay script wants {wanted.display()} at step {pos} but the "
                f"valid set excludes it; the scripted sequence is ungrammatical"
            )
        return [1.0 if c == wanted else 0.0 for c in candidates]

    def surface_for(self, prefix, terminal):
        pos = len(prefix)
        if pos < len(self.script) and self.script[pos][0] == terminal:
            return self.script[pos][1]
        return super().surface_for(prefix, terminal)


class NgramScorer(Scorer):
    """Add-one-smoothed n-gram counts over terminal names."""

    def __init__(self, order: int, corpus: list[list[tuple[Symbol, str]]]):
        if order < 1:
            raise ScorerError("ngram order must be >= 1")
        if not corpus:
            raise ScorerError("ngram corpus is empty")
        self.order = order
        self.counts: dict[tuple, int] = {}
        for stream in corpus:
            names = [t.display() for t, _ in stream]
            for i, name in enumerate(names):
                ctx = tuple(names[max(0, i - order + 1) : i])
                key = ctx + (name,)
                self.counts[key] = self.counts.get(key, 0) + 1

    def score_tokens(self, prefix, candidates):
        names = [t.display() for t, _ in prefix]
        ctx = tuple(names[max(0, len(names) - self.order + 1) :])
        return [float(self.counts.get(ctx + (c.display(),), 0) + 1) for c in candidates]


class ExternScorer(Scorer):
    """Speaks newline-delimited JSON with a scorer subprocess: write
    {"prefix": [[terminal, surface], ...], "candidates": [...]}, read
    {"weights": [...], "state_weights": {...}?}."""

    def __init__(self, cmd: str):
        self.proc = subprocess.Popen(
            cmd,
            shell=True,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
        )
        self._last_state_weights: dict[str, float] | None = None

    def score_tokens(self, prefix, candidates):
        request = {
            "prefix": [[t.display(), s] for t, s in prefix],
            "candidates": [c.display() for c in candidates],
        }
        try:
            self.proc.stdin.write(json.dumps(request, sort_keys=True) + "\n")
            self.proc.stdin.flush()
            line = self.proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ScorerError(f"external scorer pipe failure: {exc}")
        if not line:
            raise ScorerError("external scorer closed its output")
        reply = json.loads(line)
        weights = [float(w) for w in reply["weights"]]
        if len(weights) != len(candidates):
            raise ScorerError(
                f"external scorer returned {len(weights)} weights for "
                f"{len(candidates)} candidates"
            )
        self._last_state_weights = reply.get("state_weights")
        return weights

    def score_states(self, prefix):
        return self._last_state_weights

    def close(self):
        if self.proc.stdin:
            self.proc.stdin.close()
        self.proc.wait(timeout=10)


@dataclass(frozen=True)
class DecodeConfig:
    alpha: float = 0.0
    mode: str = "greedy"  # 'greedy' | 'beam'
    beam_width: int = 1
    max_steps: int = 512
    seed: int = 0
    vocab: Vocabulary | None = None  # None: terminal-level candidates
    budget: int = DEFAULT_CLOSURE_BUDGET

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.mode not in ("greedy", "beam"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class StepLog:
    valid_size: int
    chosen: Symbol
    base_weight: float
    joint_weight: float


@dataclass(frozen=True)
class DecodeResult:
    tokens: tuple[tuple[Symbol, str], ...]
    accepted: bool
    steps: int
    log: tuple[StepLog, ...]
    score: float


def joint_combine(
    base: list[float], state_weight_of: list[float], alpha: float
) -> list[float]:
    """Convex mix of token weights with the weights of each candidate's
    successor state: (base + alpha * state) / (1 + alpha)."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return [(b + alpha * s) / (1.0 + alpha) for b, s in zip(base, state_weight_of)]


def _normalize(weights: list[float]) -> list[float]:
    for w in weights:
        if not math.isfinite(w) or w < 0:
            raise ScorerError(f"scorer produced invalid weight {w}")
    total = sum(weights)
    if total == 0.0:
        return [1.0 / len(weights)] * len(weights)  # degenerate scorer fallback
    return [w / total for w in weights]


@dataclass
class _Hypothesis:
    session: Session
    tokens: list[tuple[Symbol, str]] = field(default_factory=list)
    log: list[StepLog] = field(default_factory=list)
    score: float = 0.0


def _candidates(
    v: ValidSet, vocab: Vocabulary | None
) -> list[tuple[Symbol, str | None]]:
    """(terminal, vocab surface) pairs; surface None at terminal level."""
    if vocab is None:
        return [(t, None) for t in v.terminals()]
    mask = build_mask(v, vocab)
    return [
        (mask.terminal_of[i], vocab.entries[i])
        for i in mask.allowed_indices()
    ]


def _state_weights_for(
    v: ValidSet, candidates: list[tuple[Symbol, str | None]], raw: dict[str, float]
) -> list[float]:
    total = sum(raw.values())
    norm = {k: w / total for k, w in raw.items()} if total > 0 else {}
    out = []
    for terminal, _ in candidates:
        succ = v.entries[terminal]
        out.append(max((norm.get(c.state, 0.0) for c in succ), default=0.0))
    return out


def generate(pda: Pda, scorer: Scorer, cfg: DecodeConfig) -> DecodeResult:
    """Constrained search per the deduction loop: compute the valid set,
    score its candidates, pick by beam search (greedy = width 1), and stop
    on acceptance or when max_steps runs out (an explicit non-accept)."""
    rng = random.Random(cfg.seed)
    width = 1 if cfg.mode == "greedy" else cfg.beam_width
    active = [_Hypothesis(Session.start(pda, cfg.budget))]
    completed: list[_Hypothesis] = []

    for _ in range(cfg.max_steps):
        if not active:
            break
        best_done = max((h.score for h in completed), default=-math.inf)
        if completed and best_done >= max(h.score for h in active):
            break
        expansions = []
        valid_sets: dict[int, ValidSet] = {}
        for hyp in active:
            v = hyp.session.valid_set()
            valid_sets[id(hyp)] = v
            candidates = _candidates(v, cfg.vocab)
            if not candidates:
                continue  # dead hypothesis (vocab cannot spell any valid terminal)
            terms = [t for t, _ in candidates]
            base = _normalize(scorer.score_tokens(hyp.tokens, terms))
            weights = base
            raw_states = scorer.score_states(hyp.tokens) if cfg.alpha > 0 else None
            if raw_states:
                sw = _state_weights_for(v, candidates, raw_states)
                weights = joint_combine(base, sw, cfg.alpha)
            for (terminal, vocab_surface), b, w in zip(candidates, base, weights):
                if w <= 0.0:
                    continue
                surface = (
                    vocab_surface
                    if vocab_surface is not None
                    else scorer.surface_for(hyp.tokens, terminal)
                )
                entry = StepLog(len(v.entries), terminal, b, w)
                expansions.append(
                    (hyp.score + math.log(w), rng.random(), hyp, terminal, surface, entry)
                )
        if not expansions:
            break
        expansions.sort(key=lambda e: (-e[0], e[1]))
        next_active = []
        for score, _, hyp, terminal, surface, entry in expansions[:width]:
            child = _Hypothesis(
                session=hyp.session.fork(),
                tokens=hyp.tokens + [(terminal, surface)],
                log=hyp.log + [entry],
                score=score,
            )
            step_with_valid_set(child.session, valid_sets[id(hyp)], terminal, surface)
            if child.session.status == ACCEPTED:
                completed.append(child)
            else:
                next_active.append(child)
        active = next_active

    pool = completed or active
    best = max(pool, key=lambda h: h.score)
    return DecodeResult(
        tokens=tuple(best.tokens),
        accepted=best.session.status == ACCEPTED,
        steps=len(best.tokens),
        log=tuple(best.log),
        score=best.score,
    )


class RenderError(Exception):
    pass


def render(tokens: list[tuple[Symbol, str]]) -> str:
    """Detokenize an accepted stream: surfaces joined with single spaces,
    NEWLINE breaks the line, INDENT/DEDENT move a 4-space indent level."""
    lines: list[str] = []
    words: list[str] = []
    level = 0
    for terminal, surface in tokens:
        name = terminal.name if terminal.kind != SYNTAX_STRING else None
        if name == "NEWLINE":
            lines.append("    " * level + " ".join(words))
            words = []
        elif name == "INDENT":
            level += 1
        elif name == "DEDENT":
            level -= 1
            if level < 0:
                raise RenderError("unbalanced DEDENT")
        elif name == "ENDMARKER":
            continue
        else:
            words.append(surface)
    if words:
        lines.append("    " * level + " ".join(words))
    return "".join(line + "\n" for line in lines)
