"""Core reference types and field-value normalization."""

from __future__ import annotations

import enum
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator


class FieldType(str, enum.Enum):
    AUTHOR = "author"
    SOURCE = "source"
    YEAR = "year"
    VOLUME = "volume"
    ISSUE = "issue"
    PAGE = "page"

    @classmethod
    def parse(cls, name: str) -> "FieldType":
        try:
            return cls(name)
        except ValueError:
            raise ValueError(f"unknown field type: {name!r}") from None


FIELD_TYPES: tuple[FieldType, ...] = tuple(FieldType)

ParserId = str

_WS_RUN = re.compile(r"\s+")
_EDGE_PUNCT = ".,;:"


def normalize_value(raw: str) -> str:
    """Canonical form used whenever two field values are compared.

    NFC, whitespace collapsed, lowercased, edge ``.,;:`` stripped. The strip
    and trim are repeated until stable so the function is idempotent on
    inputs like ``"a . "``.
    """
    text = unicodedata.normalize("NFC", raw)
    text = _WS_RUN.sub(" ", text).lower()
    while True:
        stripped = text.strip().strip(_EDGE_PUNCT)
        if stripped == text:
            return text
        text = stripped


@dataclass(frozen=True)
class MetadataField:
    ftype: FieldType
    value: str

    def __post_init__(self) -> None:
        if not isinstance(self.ftype, FieldType):
            object.__setattr__(self, "ftype", FieldType.parse(self.ftype))
        if not self.value.strip():
            raise ValueError("field value must be non-empty")


@dataclass(frozen=True)
class ParsedReference:
    fields: tuple[MetadataField, ...] = ()

    @classmethod
    def of(cls, pairs: Iterable[tuple[FieldType | str, str]]) -> "ParsedReference":
        return cls(tuple(MetadataField(t, v) for t, v in pairs))

    def __iter__(self) -> Iterator[MetadataField]:
        return iter(self.fields)

    def __len__(self) -> int:
        return len(self.fields)

    def of_type(self, ftype: FieldType) -> list[MetadataField]:
        return [f for f in self.fields if f.ftype is ftype]


EMPTY = ParsedReference()


def fields_of_type(p: ParsedReference, t: FieldType) -> Counter[str]:
    """Multiset of normalized type-``t`` values; empty-normalized values dropped."""
    out: Counter[str] = Counter()
    for f in p.fields:
        if f.ftype is t:
            norm = normalize_value(f.value)
            if norm:
                out[norm] += 1
    return out


@dataclass(frozen=True)
class LabeledReference:
    id: str
    string: str
    truth: ParsedReference = field(default_factory=ParsedReference)
    style: str | None = None

    def __post_init__(self) -> None:
        if not self.string:
            raise ValueError(f"reference {self.id!r} has an empty string")
