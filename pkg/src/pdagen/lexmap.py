"""Vocabulary-to-terminal classification and boolean vocabulary masks.

Vocabulary entries are whole lexical tokens, never subword fragments.
Classification priority: exact syntax-string match, then control aliases,
then NUMBER, STRING, NAME. Anything else is unclassifiable and permanently
masked.
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass

from .grammar import Symbol, syntax_string, token_type
from .pda import Pda, ValidSet

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_NUMBER_RE = re.compile(
    r"(?:0[xX][0-9a-fA-F_]+|0[oO][0-7_]+|0[bB][01_]+"
    r"|(?:\d[\d_]*\.[\d_]*|\.\d[\d_]*|\d[\d_]*)(?:[eE][+-]?\d+)?[jJ]?)\Z"
)
_STRING_RE = re.compile(r"[rRbBuU]{0,2}('(?:[^'\\\n]|\\.)*'|\"(?:[^\"\\\n]|\\.)*\")\Z")

# fixed spellings for structural token-types in whole-token vocabularies
CONTROL_ALIASES = {
    "\n": "NEWLINE",
    "<newline>": "NEWLINE",
    "<indent>": "INDENT",
    "<dedent>": "DEDENT",
    "<endmarker>": "ENDMARKER",
    "</s>": "ENDMARKER",
}

UNCLASSIFIABLE = "unclassifiable"


@dataclass(frozen=True)
class TerminalClass:
    terminal: Symbol | None  # None when unclassifiable
    matcher: str  # 'literal', a token-type rule id, or 'unclassifiable'


def classify(token: str, literals: frozenset[str] | set[str]) -> TerminalClass:
    """Classify one complete token against a grammar's syntax-string set."""
    if token in literals:
        return TerminalClass(syntax_string(token), "literal")
    alias = CONTROL_ALIASES.get(token)
    if alias is not None:
        return TerminalClass(token_type(alias), alias)
    if _NUMBER_RE.match(token):
        return TerminalClass(token_type("NUMBER"), "NUMBER")
    if _STRING_RE.match(token):
        return TerminalClass(token_type("STRING"), "STRING")
    if _NAME_RE.match(token):
        return TerminalClass(token_type("NAME"), "NAME")
    return TerminalClass(None, UNCLASSIFIABLE)


@dataclass(frozen=True)
class VocabMask:
    allowed: tuple[bool, ...]
    terminal_of: tuple[Symbol | None, ...]

    @property
    def allowed_count(self) -> int:
        return sum(self.allowed)

    def allowed_indices(self) -> list[int]:
        return [i for i, ok in enumerate(self.allowed) if ok]


class Vocabulary:
    """A token-text vocabulary with cached per-entry classification."""

    def __init__(self, entries: list[str], pda: Pda):
        self.entries = list(entries)
        literals = frozenset(pda.literals)
        known = set(pda.token_types)
        self.classes: list[TerminalClass] = []
        for text in self.entries:
            cls = classify(text, literals)
            if cls.terminal is not None and cls.terminal.kind == "tok" \
                    and cls.terminal.name not in known:
                cls = TerminalClass(None, UNCLASSIFIABLE)
            self.classes.append(cls)

    def __len__(self) -> int:
        return len(self.entries)


def build_mask(valid: ValidSet, vocab: Vocabulary) -> VocabMask:
    """allowed[i] is true iff entry i's terminal is a key of the valid set."""
    allowed = []
    terminal_of = []
    for cls in vocab.classes:
        terminal_of.append(cls.terminal)
        allowed.append(cls.terminal is not None and cls.terminal in valid)
    return VocabMask(tuple(allowed), tuple(terminal_of))


def mask_to_bytes(mask: VocabMask) -> bytes:
    """Wire format: u32 little-endian size, then a bitset packed LSB-first."""
    size = len(mask.allowed)
    out = bytearray(struct.pack("<I", size))
    bits = bytearray((size + 7) // 8)
    for i, ok in enumerate(mask.allowed):
        if ok:
            bits[i // 8] |= 1 << (i % 8)
    out.extend(bits)
    return bytes(out)


def mask_from_bytes(data: bytes) -> list[bool]:
    if len(data) < 4:
        raise ValueError("mask payload too short")
    (size,) = struct.unpack_from("<I", data, 0)
    need = 4 + (size + 7) // 8
    if len(data) != need:
        raise ValueError(f"mask payload length {len(data)}, expected {need}")
    return [bool(data[4 + i // 8] >> (i % 8) & 1) for i in range(size)]


def mask_to_json(mask: VocabMask) -> str:
    """Debug form documented alongside the binary format. ``terminals``
    carries each entry's terminal name (null when unclassifiable) so
    thin clients can spell prefix tokens without grammar knowledge."""
    return json.dumps(
        {
            "allowed": mask.allowed_indices(),
            "size": len(mask.allowed),
            "terminals": [t.name if t else None for t in mask.terminal_of],
        },
        sort_keys=True,
    )
