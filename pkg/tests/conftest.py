import pathlib

import pytest

from pdagen.grammar import parse_grammar
from pdagen.pda import compile as compile_pda

ROOT = pathlib.Path(__file__).resolve().parent.parent
GRAMMARS = ROOT / "grammars"
FIXTURES = ROOT / "fixtures"


@pytest.fixture(scope="session")
def mini_grammar():
    return parse_grammar((GRAMMARS / "mini_python.gram").read_text())


@pytest.fixture(scope="session")
def mini_pda(mini_grammar):
    return compile_pda(mini_grammar)


@pytest.fixture(scope="session")
def python3_grammar():
    return parse_grammar((GRAMMARS / "python3.gram").read_text())


@pytest.fixture(scope="session")
def python3_pda(python3_grammar):
    return compile_pda(python3_grammar)


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES
