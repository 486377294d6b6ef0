"""Language enumeration oracle and evaluation metrics."""

import json

import pytest

from pdagen.grammar import parse_grammar
from pdagen.lexer import lex_terminals
from pdagen.metrics import (
    EnumerationBoundError,
    bleu4,
    em,
    enumerate_language,
    gcp,
)

HEADER = "%tokentypes END\n%start s\n%endmarker END\n"


def test_enumerate_small_language_exactly():
    g = parse_grammar(HEADER + "s: ['x'] ('y' | 'z') END\n")
    lang = enumerate_language(g, 8)
    got = {tuple(t.display() for t in s) for s in lang.sentences}
    assert got == {
        ("'y'", "END"),
        ("'z'", "END"),
        ("'x'", "'y'", "END"),
        ("'x'", "'z'", "END"),
    }


def test_enumerate_respects_length_bound():
    g = parse_grammar(HEADER + "s: 'a'* END\n")
    lang = enumerate_language(g, 4)
    assert {len(s) for s in lang.sentences} == {1, 2, 3, 4}


def test_enumerate_guard_bound():
    g = parse_grammar(HEADER + "s: END\n")
    with pytest.raises(EnumerationBoundError):
        enumerate_language(g, 13)


def test_prefixes_and_extension_sets_are_consistent():
    g = parse_grammar(HEADER + "s: ('a' | 'b' 'c') END\n")
    lang = enumerate_language(g, 8)
    extensions = lang.extension_sets()
    assert set(extensions) | lang.sentences == lang.prefixes()
    starters = {t.display() for t in extensions[()]}
    assert starters == {"'a'", "'b'"}


def test_gcp_breakdown(mini_pda):
    corpus = [
        lex_terminals("pass\n"),                       # accepted
        lex_terminals("pass pass\n"),                  # TSM
        lex_terminals("x = 1\n")[:-1],                 # ENS: no end marker
    ]
    report = gcp(mini_pda, corpus)
    assert report.n == 3
    assert report.gcp == pytest.approx(1 / 3)
    assert report.error_breakdown == {"TSM": 1, "ENS": 1}
    assert json.dumps(report.as_dict())  # serializable


def test_em():
    assert em([["a", "b"], ["c"]], [["a", "b"], ["d"]]) == 0.5
    assert em([], []) == 1.0
    with pytest.raises(ValueError):
        em([["a"]], [])


def test_bleu4_perfect_match_is_one():
    refs = [["x", "=", "1", "+", "2"]]
    assert bleu4(refs, refs) == pytest.approx(1.0)


def test_bleu4_zero_unigram_overlap_is_zero():
    assert bleu4([["a", "b"]], [["c", "d"]]) == 0.0


def test_bleu4_pinned_single_pair():
    # one 4-token pair differing in the last token; smoothed precisions
    # 3/4, 3/4, 2/3, 1/2 and no brevity penalty: (0.1875)**0.25
    got = bleu4([["a", "b", "c", "d"]], [["a", "b", "c", "e"]])
    assert got == pytest.approx(0.6580370064762462, abs=1e-12)


def test_bleu4_pinned_corpus_with_brevity_penalty():
    hyps = [["x", "=", "1"], ["pass"]]
    refs = [["x", "=", "1"], ["x", "=", "1"]]
    # pooled counts give p = (3/4, 1, 1, 1); bp = exp(1 - 6/4)
    got = bleu4(hyps, refs)
    assert got == pytest.approx(0.5644403791229787, abs=1e-12)
