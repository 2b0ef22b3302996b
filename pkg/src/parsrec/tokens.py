"""Tokenization and word-class mapping for reference strings."""

from __future__ import annotations

import enum
from typing import NamedTuple


class WordClass(str, enum.Enum):
    NUMBER = "number"
    CAPWORD = "capword"
    UPPERLETT = "upperlett"
    ALLCAPS = "allcaps"
    LOWERWORD = "lowerword"
    MIXEDWORD = "mixedword"
    COMMA = "comma"
    DOT = "dot"
    SEMICOLON = "semicolon"
    COLON = "colon"
    HYPHEN = "hyphen"
    LPAREN = "lparen"
    RPAREN = "rparen"
    LBRACKET = "lbracket"
    RBRACKET = "rbracket"
    QUOTE = "quote"
    SLASH = "slash"
    AMP = "amp"
    OTHER = "other"


_PUNCT = {
    ",": WordClass.COMMA,
    ".": WordClass.DOT,
    ";": WordClass.SEMICOLON,
    ":": WordClass.COLON,
    "-": WordClass.HYPHEN,
    "–": WordClass.HYPHEN,
    "—": WordClass.HYPHEN,
    "(": WordClass.LPAREN,
    ")": WordClass.RPAREN,
    "[": WordClass.LBRACKET,
    "]": WordClass.RBRACKET,
    "/": WordClass.SLASH,
    "&": WordClass.AMP,
    "'": WordClass.QUOTE,
    '"': WordClass.QUOTE,
    "“": WordClass.QUOTE,
    "”": WordClass.QUOTE,
    "‘": WordClass.QUOTE,
    "’": WordClass.QUOTE,
}


class Token(NamedTuple):
    surface: str
    wclass: WordClass


def tokenize(s: str) -> list[str]:
    """Alphanumeric runs are tokens; other non-space characters stand alone."""
    tokens: list[str] = []
    run: list[str] = []
    for ch in s:
        if ch.isalnum():
            run.append(ch)
            continue
        if run:
            tokens.append("".join(run))
            run = []
        if not ch.isspace():
            tokens.append(ch)
    if run:
        tokens.append("".join(run))
    return tokens


def classify(tok: str) -> WordClass:
    assert tok, "classify() needs a non-empty token"
    if tok.isdigit():
        return WordClass.NUMBER
    if tok.isalpha():
        if len(tok) == 1 and tok.isupper():
            return WordClass.UPPERLETT
        if tok[0].isupper() and tok[1:].islower() and len(tok) > 1:
            return WordClass.CAPWORD
        if len(tok) >= 2 and tok.isupper():
            return WordClass.ALLCAPS
        if tok.islower():
            return WordClass.LOWERWORD
        return WordClass.MIXEDWORD
    if tok.isalnum():
        return WordClass.MIXEDWORD
    if len(tok) == 1:
        return _PUNCT.get(tok, WordClass.OTHER)
    return WordClass.OTHER


def class_sequence(s: str) -> list[Token]:
    return [Token(t, classify(t)) for t in tokenize(s)]
