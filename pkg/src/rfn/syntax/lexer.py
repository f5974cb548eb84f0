"""Tokenizer for `.rfn` sources."""

from __future__ import annotations

from dataclasses import dataclass

from ..diagnostics import LexError, SourceLocation

KEYWORDS = frozenset(
    {
        "module", "refines", "abstract", "import", "as", "default",
        "type", "datatype", "function", "predicate", "method", "constructor",
        "lemma", "class", "var", "ghost", "protected", "returns",
        "requires", "ensures", "modifies", "reads", "decreases", "invariant",
        "if", "then", "else", "while", "assert", "assume", "return", "break",
        "modify", "label", "new", "match", "case", "old", "fresh",
        "true", "false", "null", "this", "in",
        "int", "bool", "object", "set", "seq",
    }
)

# longest first
SYMBOLS = (
    "...", "==>", "!in",
    ":=", ":|", "==", "!=", "<=", ">=", "&&", "||", "=>",
    "(", ")", "{", "}", "[", "]", "<", ">", ",", ";", ":", ".",
    "+", "-", "*", "/", "%", "!", "=", "|",
)

UNICODE_ALIASES = {"≠": "!=", "≤": "<=", "≥": ">=", "⟨": "<", "⟩": ">"}

KW = "KW"
IDENT = "IDENT"
INT = "INT"
SYM = "SYM"
EOF = "EOF"


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    loc: SourceLocation

    def is_(self, text: str) -> bool:
        return self.kind in (KW, SYM) and self.text == text

    def __repr__(self) -> str:
        return f"{self.kind}({self.text!r})"


def _ident_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_"


def _ident_part(ch: str) -> bool:
    return ch.isalnum() or ch in "_'"


def tokenize(text: str, filename: str = "<input>") -> list:
    """Split `text` into tokens. The trailing EOF token is not included."""
    tokens = []
    i, line, col = 0, 1, 1
    n = len(text)

    def loc() -> SourceLocation:
        return SourceLocation(filename, line, col)

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r\f﻿":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        start = loc()
        if _ident_start(ch):
            j = i + 1
            while j < n and _ident_part(text[j]):
                j += 1
            word = text[i:j]
            tokens.append(Token(KW if word in KEYWORDS else IDENT, word, start))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token(INT, text[i:j], start))
            col += j - i
            i = j
            continue
        if ch in UNICODE_ALIASES:
            tokens.append(Token(SYM, UNICODE_ALIASES[ch], start))
            i += 1
            col += 1
            continue
        for sym in SYMBOLS:
            if text.startswith(sym, i):
                if sym == "!in" and i + 3 < n and _ident_part(text[i + 3]):
                    continue
                tokens.append(Token(SYM, sym, start))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise LexError(f"illegal character {ch!r}", start)
    return tokens
