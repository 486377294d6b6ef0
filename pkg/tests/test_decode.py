"""Constrained generation: joint rule, scorers, search modes, rendering."""

import math

import pytest

from pdagen.decode import (
    DecodeConfig,
    NgramScorer,
    ReplayScorer,
    Scorer,
    ScorerError,
    UniformScorer,
    generate,
    joint_combine,
    render,
)
from pdagen.lexer import lex_terminals
from pdagen.lexmap import Vocabulary
from pdagen.pda import recognize


def test_joint_combine_alpha_zero_is_identity():
    base = [0.5, 0.3, 0.2]
    out = joint_combine(base, [0.9, 0.05, 0.05], 0.0)
    assert all(abs(a - b) <= 1e-12 for a, b in zip(out, base))


def test_joint_combine_equal_mix():
    (out,) = joint_combine([0.6], [0.8], 1.0)
    assert abs(out - 0.7) <= 1e-12


def test_joint_combine_monotone_in_alpha():
    base, state = [0.6, 0.4], [0.1, 0.9]
    previous = None
    for step in range(6):
        alpha = step * 0.2
        first, second = joint_combine(base, state, alpha)
        assert abs(first + second - 1.0) <= 1e-12  # stays a distribution
        if previous is not None:
            assert first <= previous + 1e-12  # moves toward the state weight
        previous = first


def test_joint_combine_rejects_bad_alpha():
    with pytest.raises(ValueError):
        joint_combine([1.0], [1.0], 1.5)


def test_replay_reproduces_exact_stream(mini_pda):
    script = lex_terminals("def add(a, b):\n    return a + b\n")
    result = generate(mini_pda, ReplayScorer(script), DecodeConfig())
    assert result.accepted
    assert list(result.tokens) == script


def test_render_round_trips_through_the_lexer(mini_pda):
    source = "if x < 2:\n    y = y + 1\n"
    script = lex_terminals(source)
    result = generate(mini_pda, ReplayScorer(script), DecodeConfig())
    rendered = render(list(result.tokens))
    assert lex_terminals(rendered) == script


def test_replay_of_ungrammatical_script_fails_loudly(mini_pda):
    script = [
        (mini_pda.terminal_symbol("pass"), "pass"),
        (mini_pda.terminal_symbol("pass"), "pass"),
    ]
    with pytest.raises(ScorerError):
        generate(mini_pda, ReplayScorer(script), DecodeConfig())


def test_greedy_equals_beam_width_one(mini_pda):
    for seed in range(10):
        greedy = generate(
            mini_pda, UniformScorer(), DecodeConfig(mode="greedy", seed=seed)
        )
        beam = generate(
            mini_pda,
            UniformScorer(),
            DecodeConfig(mode="beam", beam_width=1, seed=seed),
        )
        assert greedy.tokens == beam.tokens
        assert greedy.score == beam.score


def test_uniform_generations_are_seed_deterministic(mini_pda):
    a = generate(mini_pda, UniformScorer(), DecodeConfig(seed=3))
    b = generate(mini_pda, UniformScorer(), DecodeConfig(seed=3))
    assert a == b


def test_ngram_counts_prefer_frequent_continuations(mini_pda):
    corpus = [lex_terminals(s) for s in ("x = 1\n", "y = 2\n", "z + 1\n")]
    scorer = NgramScorer(2, corpus)
    prefix = [(mini_pda.terminal_symbol("NAME"), "x")]
    eq = mini_pda.terminal_symbol("=")
    plus = mini_pda.terminal_symbol("+")
    w_eq, w_plus = scorer.score_tokens(prefix, [eq, plus])
    # add-one smoothing over raw counts 2 and 1
    assert (w_eq, w_plus) == (3.0, 2.0)


def test_all_zero_scorer_falls_back_to_uniform(mini_pda):
    class ZeroScorer(Scorer):
        def score_tokens(self, prefix, candidates):
            return [0.0] * len(candidates)

    result = generate(mini_pda, ZeroScorer(), DecodeConfig(seed=1, max_steps=8192))
    assert result.accepted


def test_negative_weights_are_rejected(mini_pda):
    class BadScorer(Scorer):
        def score_tokens(self, prefix, candidates):
            return [-1.0] * len(candidates)

    with pytest.raises(ScorerError):
        generate(mini_pda, BadScorer(), DecodeConfig())


def test_max_steps_exhaustion_is_an_explicit_non_accept(mini_pda):
    result = generate(mini_pda, UniformScorer(), DecodeConfig(seed=0, max_steps=2))
    assert not result.accepted
    assert result.steps == 2


def test_generated_streams_recognize_as_accepted(mini_pda):
    for seed in range(25):
        result = generate(
            mini_pda, UniformScorer(), DecodeConfig(seed=seed, max_steps=8192)
        )
        assert result.accepted
        assert recognize(mini_pda, list(result.tokens)).accepted


def test_vocabulary_mode_uses_vocab_surfaces(mini_pda):
    vocab = Vocabulary(
        ["pass", "total", "7", "\n", "<indent>", "<dedent>", "<endmarker>",
         "=", "+", "if", ":", "<", "while", "def", "(", ")", ",", "'txt'",
         "not", "return", "==", "*"],
        mini_pda,
    )
    result = generate(
        mini_pda,
        UniformScorer(),
        DecodeConfig(seed=11, max_steps=8192, vocab=vocab),
    )
    assert result.accepted
    assert set(s for _, s in result.tokens) <= set(vocab.entries)


def test_score_is_cumulative_log_probability(mini_pda):
    script = lex_terminals("pass\n")
    result = generate(mini_pda, ReplayScorer(script), DecodeConfig())
    # replay concentrates all mass on the scripted token at every step
    assert abs(result.score - 0.0) <= 1e-12
    assert math.isfinite(result.score)


def test_decode_config_validation():
    with pytest.raises(ValueError):
        DecodeConfig(alpha=2.0)
    with pytest.raises(ValueError):
        DecodeConfig(mode="random")
    with pytest.raises(ValueError):
        DecodeConfig(max_steps=0)


def test_render_rejects_unbalanced_dedent(mini_pda):
    from pdagen.decode import RenderError

    with pytest.raises(RenderError):
        render([(mini_pda.terminal_symbol("DEDENT"), "")])
