"""Grammar-constrained generation over pushdown automata.

Pipeline: parse an EBNF grammar file, compile it to a nondeterministic
PDA, and at every generation step compute the set of terminals the
automaton can consume next. Any scorer (uniform, n-gram, replay, or an
external model process) picks among those candidates, so completed
sequences are grammatical by construction.
"""

from .grammar import (
    Grammar,
    GrammarError,
    GrammarReport,
    LeftRecursionError,
    Production,
    Symbol,
    analyze,
    desugar,
    nonterminal,
    parse_ebnf,
    parse_grammar,
    syntax_string,
    token_type,
)
from .pda import (
    ClosureBudgetError,
    ConfigSet,
    Configuration,
    CorruptPdaError,
    Pda,
    RecognitionResult,
    Session,
    ValidSet,
    closure,
    compile,
    deserialize,
    recognize,
    serialize,
    step,
    valid_set,
)
from .lexer import LexError, LexToken, lex, lex_terminals
from .lexmap import TerminalClass, VocabMask, Vocabulary, build_mask, classify
from .decode import (
    DecodeConfig,
    DecodeResult,
    NgramScorer,
    ReplayScorer,
    Scorer,
    UniformScorer,
    generate,
    joint_combine,
    render,
)
from .metrics import EnumeratedLanguage, EvalReport, bleu4, em, enumerate_language, gcp

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
