"""Indentation-sensitive lexer turning source text into a terminal stream.

Emits syntax-string terminals for keywords/operators, token-type terminals
(NAME, NUMBER, STRING, FSTRING_*, NEWLINE, INDENT, DEDENT, ENDMARKER)
otherwise. Conventions:

  * tabs expand to 8-column stops; inconsistent dedents are errors;
  * blank and comment-only lines emit nothing;
  * NEWLINE is suppressed inside (), [], {} and after backslash-newline;
  * any missing final NEWLINE is supplied, then balancing DEDENTs,
    then ENDMARKER; empty input lexes to [ENDMARKER] alone.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .grammar import Symbol, syntax_string, token_type

TAB_STOP = 8

KEYWORDS = frozenset(
    """
    False None True and as assert async await break class continue def del
    elif else except finally for from global if import in is lambda nonlocal
    not or pass raise return try while with yield
    """.split()
)

# longest-match-first operator and delimiter table
OPERATORS = sorted(
    [
        "**=", "//=", "<<=", ">>=", "...",
        "==", "!=", "<>", "<=", ">=", "->", "+=", "-=", "*=", "/=", "%=",
        "&=", "|=", "^=", "@=", "**", "//", "<<", ">>",
        "+", "-", "*", "/", "%", "@", "&", "|", "^", "~", "<", ">", "=",
        "(", ")", "[", "]", "{", "}", ",", ":", ".", ";", "!",
    ],
    key=len,
    reverse=True,
)

_OPEN = {"(": ")", "[": "]", "{": "}"}
_CLOSE = frozenset(_OPEN.values())

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(
    r"0[xX][0-9a-fA-F_]+|0[oO][0-7_]+|0[bB][01_]+"
    r"|(?:\d[\d_]*\.[\d_]*|\.\d[\d_]*|\d[\d_]*)(?:[eE][+-]?\d+)?[jJ]?"
)
_STRING_PREFIX_RE = re.compile(r"[rRbBuUfF]{0,3}")


class LexError(Exception):
    def __init__(self, message: str, line: int, col: int):
        self.line = line
        self.col = col
        super().__init__(f"{message} (line {line}, col {col})")


@dataclass(frozen=True)
class LexToken:
    terminal: Symbol
    surface: str
    line: int
    col: int


NEWLINE = token_type("NEWLINE")
INDENT = token_type("INDENT")
DEDENT = token_type("DEDENT")
ENDMARKER = token_type("ENDMARKER")
NAME = token_type("NAME")
NUMBER = token_type("NUMBER")
STRING = token_type("STRING")
FSTRING_START = token_type("FSTRING_START")
FSTRING_STRING = token_type("FSTRING_STRING")
FSTRING_END = token_type("FSTRING_END")


def _indent_width(prefix: str, line: int) -> int:
    width = 0
    for ch in prefix:
        if ch == " ":
            width += 1
        elif ch == "\t":
            width += TAB_STOP - (width % TAB_STOP)
        else:
            raise LexError("mixed indentation character", line, width + 1)
    return width


class _Lexer:
    def __init__(self, source: str):
        self.source = source
        self.pos = 0
        self.line = 1
        self.col = 1
        self.tokens: list[LexToken] = []
        self.indents = [0]
        self.bracket_depth = 0
        self.line_has_tokens = False

    def error(self, message: str) -> LexError:
        return LexError(message, self.line, self.col)

    def emit(self, terminal: Symbol, surface: str, line=None, col=None) -> None:
        self.tokens.append(
            LexToken(terminal, surface, line or self.line, col or self.col)
        )

    def advance(self, n: int) -> None:
        chunk = self.source[self.pos : self.pos + n]
        newlines = chunk.count("\n")
        if newlines:
            self.line += newlines
            self.col = len(chunk) - chunk.rfind("\n")
        else:
            self.col += n
        self.pos += n

    def at_end(self) -> bool:
        return self.pos >= len(self.source)

    def run(self) -> list[LexToken]:
        at_line_start = True
        while not self.at_end():
            if at_line_start and self.bracket_depth == 0:
                at_line_start = False
                if self.handle_indentation():
                    at_line_start = True
                    continue
            ch = self.source[self.pos]
            if ch == "\n":
                if self.bracket_depth == 0 and self.line_has_tokens:
                    self.emit(NEWLINE, "")
                    self.line_has_tokens = False
                self.advance(1)
                at_line_start = self.bracket_depth == 0
                continue
            if ch in " \t":
                self.advance(1)
                continue
            if ch == "\\" and self.peek_at(self.pos + 1) == "\n":
                self.advance(2)
                continue
            if ch == "#":
                nl = self.source.find("\n", self.pos)
                self.advance((nl if nl != -1 else len(self.source)) - self.pos)
                continue
            self.lex_token()
        # normalization tail
        if self.line_has_tokens:
            self.emit(NEWLINE, "")
        while len(self.indents) > 1:
            self.indents.pop()
            self.emit(DEDENT, "")
        self.emit(ENDMARKER, "")
        return self.tokens

    def peek_at(self, pos: int) -> str:
        return self.source[pos] if pos < len(self.source) else ""

    def handle_indentation(self) -> bool:
        """Measure leading whitespace; emit INDENT/DEDENTs. Returns True if
        the line turned out blank/comment-only and was consumed."""
        start = self.pos
        while not self.at_end() and self.source[self.pos] in " \t":
            self.advance(1)
        if self.at_end():
            return False
        ch = self.source[self.pos]
        if ch == "\n":
            self.advance(1)
            return True
        if ch == "#":
            nl = self.source.find("\n", self.pos)
            self.advance((nl if nl != -1 else len(self.source)) - self.pos)
            return False
        width = _indent_width(self.source[start : self.pos], self.line)
        if width > self.indents[-1]:
            self.indents.append(width)
            self.emit(INDENT, "")
        else:
            while width < self.indents[-1]:
                self.indents.pop()
                self.emit(DEDENT, "")
            if width != self.indents[-1]:
                raise self.error("inconsistent dedent: no matching indentation level")
        return False

    def lex_token(self) -> None:
        self.line_has_tokens = True
        line, col = self.line, self.col
        src, pos = self.source, self.pos

        prefix = _STRING_PREFIX_RE.match(src, pos).group()
        after = pos + len(prefix)
        if after < len(src) and src[after] in "'\"":
            if "f" in prefix.lower():
                self.lex_fstring(prefix, line, col)
            else:
                self.lex_string(prefix, line, col)
            return

        if src[pos].isdigit() or src[pos] == ".":
            m = _NUMBER_RE.match(src, pos)
            if m:
                self.emit(NUMBER, m.group(), line, col)
                self.advance(len(m.group()))
                return

        m = _NAME_RE.match(src, pos)
        if m:
            word = m.group()
            terminal = syntax_string(word) if word in KEYWORDS else NAME
            self.emit(terminal, word, line, col)
            self.advance(len(word))
            return

        for op in OPERATORS:
            if src.startswith(op, pos):
                if op in _OPEN:
                    self.bracket_depth += 1
                elif op in _CLOSE:
                    self.bracket_depth = max(0, self.bracket_depth - 1)
                self.emit(syntax_string(op), op, line, col)
                self.advance(len(op))
                return

        raise self.error(f"unexpected character {src[pos]!r}")

    def _string_body_end(self, open_pos: int, quote: str) -> int:
        """Index just past the closing quote; raises on unterminated string."""
        src = self.source
        triple = src.startswith(quote * 3, open_pos)
        closer = quote * 3 if triple else quote
        i = open_pos + len(closer)
        while i < len(src):
            ch = src[i]
            if ch == "\\":
                i += 2
                continue
            if not triple and ch == "\n":
                break
            if src.startswith(closer, i):
                return i + len(closer)
            i += 1
        raise self.error("unterminated string literal")

    def lex_string(self, prefix: str, line: int, col: int) -> None:
        open_pos = self.pos + len(prefix)
        end = self._string_body_end(open_pos, self.source[open_pos])
        surface = self.source[self.pos : end]
        self.emit(STRING, surface, line, col)
        self.advance(end - self.pos)

    def lex_fstring(self, prefix: str, line: int, col: int) -> None:
        # Opaque-span treatment: the interior is one FSTRING_STRING token.
        open_pos = self.pos + len(prefix)
        quote = self.source[open_pos]
        end = self._string_body_end(open_pos, quote)
        triple = self.source.startswith(quote * 3, open_pos)
        closer = quote * 3 if triple else quote
        head_end = open_pos + len(closer)
        body_end = end - len(closer)
        self.emit(FSTRING_START, self.source[self.pos : head_end], line, col)
        self.advance(head_end - self.pos)
        if body_end > self.pos:
            self.emit(FSTRING_STRING, self.source[self.pos : body_end])
            self.advance(body_end - self.pos)
        self.emit(FSTRING_END, closer)
        self.advance(len(closer))


def lex(source: str) -> list[LexToken]:
    """Tokenize UTF-8 source text into (terminal, surface) tokens."""
    return _Lexer(source).run()


def lex_terminals(source: str) -> list[tuple[Symbol, str]]:
    """Convenience form consumed by recognition and the metrics module."""
    return [(t.terminal, t.surface) for t in lex(source)]
