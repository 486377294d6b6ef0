"""Metrics and the brute-force language oracle.

``enumerate_language`` expands leftmost derivations breadth-first with
length pruning and never touches the automaton, so it can serve as an
independent ground truth for recognition and valid-set results.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .grammar import Grammar, NONTERMINAL, Symbol, compute_nullable
from .pda import (
    DEFAULT_CLOSURE_BUDGET,
    Pda,
    RESULT_ACCEPTED,
    RESULT_ENS,
    RESULT_TSM,
    recognize,
)

MAX_ENUM_LENGTH = 12


class EnumerationBoundError(Exception):
    pass


@dataclass(frozen=True)
class EnumeratedLanguage:
    sentences: frozenset[tuple[Symbol, ...]]
    bound: int

    def prefixes(self) -> set[tuple[Symbol, ...]]:
        out: set[tuple[Symbol, ...]] = set()
        for s in self.sentences:
            for i in range(len(s) + 1):
                out.add(s[:i])
        return out

    def extension_sets(self) -> dict[tuple[Symbol, ...], set[Symbol]]:
        """prefix -> set of terminals extending it toward some sentence."""
        out: dict[tuple[Symbol, ...], set[Symbol]] = {}
        for s in self.sentences:
            for i in range(len(s)):
                out.setdefault(s[:i], set()).add(s[i])
        return out


def _min_yields(g: Grammar) -> dict[str, float]:
    """Minimum terminal count derivable from each non-terminal (inf if none)."""
    best: dict[str, float] = {n: math.inf for n in g.nonterminals}
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            total = 0.0
            for s in p.rhs:
                total += 1 if s.is_terminal else best[s.name]
            if total < best[p.lhs]:
                best[p.lhs] = total
                changed = True
    return best


def enumerate_language(g: Grammar, max_len: int) -> EnumeratedLanguage:
    """Exactly the sentences of terminal length <= max_len, by breadth-first
    leftmost expansion with min-yield pruning. No PDA involvement."""
    if max_len > MAX_ENUM_LENGTH:
        raise EnumerationBoundError(
            f"max_len {max_len} exceeds the guard ({MAX_ENUM_LENGTH})"
        )
    min_yield = _min_yields(g)

    def lower_bound(form: tuple[Symbol, ...]) -> float:
        return sum(1 if s.is_terminal else min_yield[s.name] for s in form)

    sentences: set[tuple[Symbol, ...]] = set()
    start = (Symbol(NONTERMINAL, g.start),)
    frontier = {start}
    seen = {start}
    while frontier:
        next_frontier: set[tuple[Symbol, ...]] = set()
        for form in frontier:
            idx = next(
                (i for i, s in enumerate(form) if s.kind == NONTERMINAL), None
            )
            if idx is None:
                sentences.add(form)
                continue
            head, tail = form[:idx], form[idx + 1 :]
            for p in g.productions:
                if p.lhs != form[idx].name:
                    continue
                new_form = head + p.rhs + tail
                if lower_bound(new_form) > max_len:
                    continue
                if new_form not in seen:
                    seen.add(new_form)
                    next_frontier.add(new_form)
        frontier = next_frontier
    return EnumeratedLanguage(frozenset(sentences), max_len)


@dataclass
class EvalReport:
    n: int
    gcp: float | None = None
    em: float | None = None
    bleu4: float | None = None
    error_breakdown: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {"n": self.n}
        if self.gcp is not None:
            out["gcp"] = self.gcp
            out["error_breakdown"] = dict(sorted(self.error_breakdown.items()))
        if self.em is not None:
            out["em"] = self.em
        if self.bleu4 is not None:
            out["bleu4"] = self.bleu4
        return out


def gcp(
    pda: Pda,
    corpus: list[list[tuple[Symbol, str]]],
    budget: int = DEFAULT_CLOSURE_BUDGET,
) -> EvalReport:
    """Fraction of token streams accepted, with a TSM/ENS breakdown."""
    breakdown = {"TSM": 0, "ENS": 0}
    accepted = 0
    for stream in corpus:
        result = recognize(pda, stream, budget)
        if result.status == RESULT_ACCEPTED:
            accepted += 1
        elif result.status == RESULT_TSM:
            breakdown["TSM"] += 1
        else:
            breakdown["ENS"] += 1
    n = len(corpus)
    return EvalReport(
        n=n, gcp=(accepted / n if n else 1.0), error_breakdown=breakdown
    )


def em(hypotheses: list[list[str]], references: list[list[str]]) -> float:
    """Exact surface-sequence match rate over paired corpora."""
    if len(hypotheses) != len(references):
        raise ValueError("hypotheses and references differ in length")
    if not hypotheses:
        return 1.0
    hits = sum(1 for h, r in zip(hypotheses, references) if list(h) == list(r))
    return hits / len(hypotheses)


def _ngrams(seq: list[str], n: int) -> Counter:
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def bleu4(hypotheses: list[list[str]], references: list[list[str]]) -> float:
    """Corpus BLEU-4 with brevity penalty; add-one smoothing on the n-gram
    precisions for n >= 2 (the unigram precision is left exact)."""
    if len(hypotheses) != len(references):
        raise ValueError("hypotheses and references differ in length")
    matched = [0] * 5
    total = [0] * 5
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp, ref = list(hyp), list(ref)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, 5):
            hc = _ngrams(hyp, n)
            rc = _ngrams(ref, n)
            total[n] += sum(hc.values())
            matched[n] += sum(min(c, rc[g]) for g, c in hc.items())
    precisions = []
    for n in range(1, 5):
        if n == 1:
            p = matched[1] / total[1] if total[1] else 0.0
        else:
            p = (matched[n] + 1) / (total[n] + 1)
        precisions.append(p)
    if precisions[0] == 0.0:
        return 0.0
    log_mean = sum(math.log(p) for p in precisions) / 4.0
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / max(hyp_len, 1))
    return bp * math.exp(log_mean)
