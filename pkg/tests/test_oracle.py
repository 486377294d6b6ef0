"""Cross-validation of the automaton against brute-force enumeration.

The enumeration oracle expands leftmost derivations directly from the
grammar and never touches the PDA, so agreement here checks soundness
(everything enumerated is accepted) and completeness (nothing else of
small length is accepted, and every valid set matches the prefix
extension sets of the enumerated language).
"""

import itertools
import json

import pytest
from hypothesis import given, settings, strategies as st

from pdagen.grammar import parse_grammar
from pdagen.metrics import enumerate_language
from pdagen.pda import Session, compile as compile_pda, recognize, step

# Each fixture grammar is built so that any valid prefix of length <= 6
# completes to a sentence of length <= 12 (the enumeration guard); that
# makes the prefix-extension comparison below an exact equality.
ORACLE_GRAMMARS = {
    "epsilon_alt": (
        "%tokentypes END\n%start s\n%endmarker END\n"
        "s: a END\na: 'x' |\n"
    ),
    "fixed_sequence": (
        "%tokentypes END\n%start s\n%endmarker END\n"
        "s: 'a' 'b' 'c' END\n"
    ),
    "two_orders": (
        "%tokentypes END\n%start s\n%endmarker END\n"
        "s: ('a' 'b' | 'b' 'a') END\n"
    ),
    "optional_group": (
        "%tokentypes END\n%start s\n%endmarker END\n"
        "s: ['x'] ('y' | 'z') END\n"
    ),
    "star": (
        "%tokentypes END\n%start s\n%endmarker END\n"
        "s: 'a'* END\n"
    ),
    "plus_of_alt": (
        "%tokentypes END\n%start s\n%endmarker END\n"
        "s: w+ END\nw: 'a' | 'b'\n"
    ),
    "shallow_lists": (
        "%tokentypes END\n%start s\n%endmarker END\n"
        "s: l END\nl: i (',' i)* |\n"
        "i: 'n' | '(' inner ')'\ninner: 'n' (',' 'n')* |\n"
    ),
    "nullable_chain": (
        "%tokentypes END\n%start s\n%endmarker END\n"
        "s: a b c END\na: 'x' |\nb: 'y' |\nc: 'z' |\n"
    ),
    "token_types": (
        "%tokentypes NAME NUM END\n%start s\n%endmarker END\n"
        "s: NAME '=' (NAME | NUM) END\n"
    ),
    "small_expr": (
        "%tokentypes END\n%start s\n%endmarker END\n"
        "s: e END\ne: t ['+' t]\nt: 'n' | '-' 'n'\n"
    ),
    "common_prefix": (
        "%tokentypes END\n%start s\n%endmarker END\n"
        "s: 'a' 'b' END | 'a' 'c' END\n"
    ),
}


@pytest.fixture(scope="module", params=sorted(ORACLE_GRAMMARS))
def case(request):
    g = parse_grammar(ORACLE_GRAMMARS[request.param])
    return g, compile_pda(g)


def test_enumerated_sentences_are_accepted(case):
    g, p = case
    lang = enumerate_language(g, 8)
    assert lang.sentences  # every fixture grammar has small sentences
    for sentence in lang.sentences:
        r = recognize(p, [(t, "") for t in sentence])
        assert r.accepted, [t.display() for t in sentence]


def test_nothing_else_small_is_accepted(case):
    g, p = case
    sentences = enumerate_language(g, 5).sentences
    alphabet = sorted(g.terminals)
    for length in range(6):
        for seq in itertools.product(alphabet, repeat=length):
            accepted = recognize(p, [(t, "") for t in seq]).accepted
            assert accepted == (seq in sentences), [t.display() for t in seq]


def test_valid_sets_equal_prefix_extension_sets(case):
    g, p = case
    lang = enumerate_language(g, 12)
    extensions = lang.extension_sets()
    checked = 0
    for prefix, expected in sorted(extensions.items()):
        if len(prefix) > 6:
            continue
        session = Session.start(p)
        for t in prefix:
            step(session, t)
        got = set(session.valid_set().terminals())
        assert got == expected, [t.display() for t in prefix]
        checked += 1
    assert checked > 0


def test_frozen_enumeration_fixture(fixtures_dir):
    record = json.loads((fixtures_dir / "enum_tiny_8.json").read_text())
    g = parse_grammar((fixtures_dir / record["grammar"]).read_text())
    lang = enumerate_language(g, record["max_len"])
    got = sorted([t.display() for t in s] for s in lang.sentences)
    assert got == record["sentences"]


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=5), max_size=6))
def test_membership_matches_oracle_on_random_sequences(picks):
    g = parse_grammar(ORACLE_GRAMMARS["shallow_lists"])
    p = compile_pda(g)
    alphabet = sorted(g.terminals)
    seq = tuple(alphabet[i % len(alphabet)] for i in picks)
    sentences = enumerate_language(g, 6).sentences
    assert recognize(p, [(t, "") for t in seq]).accepted == (seq in sentences)
