"""Candidate reference parsers.

The built-in parsers are deterministic pattern parsers. Each targets one
citation style with a full-string pattern; when that pattern does not match
it falls back to generic per-field rules whose strength is set by the
parser's field skills. This gives a pool where every parser is good
somewhere and none is best everywhere.
"""

from __future__ import annotations

import json
import logging
import queue
import re
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Protocol

from .refmodel import EMPTY, FIELD_TYPES, FieldType, MetadataField, ParsedReference, ParserId

log = logging.getLogger(__name__)

A, S, Y, V, I, P = (FieldType.AUTHOR, FieldType.SOURCE, FieldType.YEAR,
                    FieldType.VOLUME, FieldType.ISSUE, FieldType.PAGE)


class Parser(Protocol):
    def parse(self, s: str) -> ParsedReference: ...


# ---------------------------------------------------------- name patterns

INITIALS_FIRST = r"(?:[A-Z]\.\s?)+[A-Z][a-z]+"
SURNAME_COMMA = r"[A-Z][a-z]+, (?:[A-Z]\. )*[A-Z]\."
SURNAME_BARE = r"[A-Z][a-z]+ [A-Z]{1,2}\b"

AUTHOR_FORMS = {
    "initials_first": INITIALS_FIRST,
    "surname_comma": SURNAME_COMMA,
    "surname_bare": SURNAME_BARE,
}

_SRC = r"(?P<source>[A-Z][A-Za-z ]*?)"

STYLE_PATTERNS: dict[str, tuple[re.Pattern, str]] = {
    "bracket": (re.compile(
        rf"\[\d+\] (?P<authors>{INITIALS_FIRST}(?:, {INITIALS_FIRST})*), (?P<title>[^,]+), {_SRC} "
        r"(?P<volume>\d+)(?: \((?P<issue>\d{1,2})\))? \((?P<year>\d{4})\) (?P<page>\d+[–-]\d+)\.?"),
        "initials_first"),
    "dotenum": (re.compile(
        rf"\d+\. (?P<authors>{SURNAME_BARE}(?:, {SURNAME_BARE})*) \((?P<year>\d{{4}})\) (?P<title>[^.]+)\. "
        rf"{_SRC} (?P<volume>\d+)(?:\((?P<issue>\d{{1,2}})\))?:(?P<page>\d+[-–]\d+)\.?"),
        "surname_bare"),
    "apa": (re.compile(
        rf"(?P<authors>{SURNAME_COMMA}(?:, {SURNAME_COMMA})*(?:,? & {SURNAME_COMMA})?) \((?P<year>\d{{4}})\)\. "
        rf"(?P<title>[^.]+)\. {_SRC}, (?P<volume>\d+)(?:\((?P<issue>\d{{1,2}})\))?, (?P<page>\d+[–-]\d+)\.?"),
        "surname_comma"),
    "ieee": (re.compile(
        rf"\[\d+\] (?P<authors>{INITIALS_FIRST}(?:, {INITIALS_FIRST})*(?:,? and {INITIALS_FIRST})?), "
        rf"\"(?P<title>[^\"]+),\" {_SRC}, vol\. (?P<volume>\d+)(?:, no\. (?P<issue>\d+))?, "
        r"pp\. (?P<page>\d+[-–]\d+), (?P<year>\d{4})\.?"),
        "initials_first"),
}

# ----------------------------------------------------------- field rules

_YEAR_ANY = re.compile(r"\b\d{4}\b")
_YEAR_STANDALONE = re.compile(r"(?<![\d–-])\b(?:19|20)\d{2}\b(?![\d–-])")
_PAGE_ANY = re.compile(r"\d+\s?[–-]\s?\d+")
_PAGE_ENDASH = re.compile(r"\d+–\d+")
_VOL_ISSUE = re.compile(r"(\d+)\s?\((\d{1,2})\)")
_VOLUME_STRONG = [
    re.compile(r"vol\.\s?(\d+)"),
    _VOL_ISSUE,
    re.compile(r"\b(?:19|20)\d{2}, (\d+)\b"),
    re.compile(r"(\d+) \((?:19|20)\d{2}\)"),
    re.compile(r"(\d+):\d+"),
    re.compile(r", (\d+), \d+[–-]"),
]
_ISSUE_STRONG = [re.compile(r"no\.\s?(\d+)"), _VOL_ISSUE]
_ISSUE_WEAK = re.compile(r"\((\d{1,2})\)")
_TITLE_RUN = re.compile(r"[A-Z][a-z]+(?:(?: of| the| and| with| for| in)* [A-Z][a-z]+)*")
_LEAD_ENUM = re.compile(r"^\s*(?:\[\d+\]|\d+\.)\s*")


def _year(s: str, strong: bool) -> list[str]:
    return (_YEAR_STANDALONE if strong else _YEAR_ANY).findall(s)[-1:]


def _page(s: str, strong: bool) -> list[str]:
    if strong:
        found = _PAGE_ANY.findall(s)
        return found[-1:]
    m = _PAGE_ENDASH.search(s)
    return [m.group()] if m else []


def _volume(s: str, strong: bool) -> list[str]:
    for pat in (_VOLUME_STRONG if strong else _VOLUME_STRONG[1:2]):
        m = pat.search(s)
        if m:
            return [m.group(1)]
    return []


def _issue(s: str, strong: bool) -> list[str]:
    if strong:
        for pat in _ISSUE_STRONG:
            m = pat.search(s)
            if m:
                return [m.group(m.lastindex or 1)]
        return []
    m = _ISSUE_WEAK.search(s)
    return [m.group(1)] if m else []


def _looks_like_person(s: str, m: re.Match) -> bool:
    before = s[:m.start()]
    after = s[m.end():]
    return bool(re.search(r"[A-Z]\.\s?$", before) or re.match(r",? (?:[A-Z]\.|[A-Z]{1,2}\b)", after))


def _source(s: str, strong: bool) -> list[str]:
    runs = [m for m in _TITLE_RUN.finditer(s) if not _looks_like_person(s, m)]
    if strong:
        return [runs[-1].group()] if runs else []
    multi = [m for m in runs if " " in m.group()]
    return [multi[0].group()] if multi else []


def _author(s: str, strong: bool, form: str | None) -> list[str]:
    if form is None:
        head = _LEAD_ENUM.sub("", s).split(",")[0].strip()
        return [head] if head else []
    found = re.findall(AUTHOR_FORMS[form], s)
    return found if strong else found[:1]


STRONG_SKILL = 0.75


@dataclass(frozen=True)
class BuiltinParserConfig:
    id: ParserId
    target_style: str | None
    field_skills: Mapping[FieldType, float] = field(default_factory=dict)
    author_form: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("parser id must be non-empty")
        if self.target_style is not None and self.target_style not in STYLE_PATTERNS:
            raise ValueError(f"no pattern for style {self.target_style!r}")
        for ft, skill in self.field_skills.items():
            FieldType(ft)
            if not 0.0 <= skill <= 1.0:
                raise ValueError(f"skill for {ft} must be in [0, 1], got {skill}")

    def skill(self, ft: FieldType) -> float:
        return float(self.field_skills.get(ft, 0.0))


class BuiltinParser:
    """Style-pattern parser with skill-gated fallback rules.

    Skill 0 disables a field entirely. Otherwise the full-style pattern
    yields the field, and the fallback uses the strong rule when the skill
    is at least ``STRONG_SKILL`` and the weak rule below that.
    """

    def __init__(self, config: BuiltinParserConfig):
        self.config = config
        self.id = config.id
        self._enabled = {ft for ft in FIELD_TYPES if config.skill(ft) > 0}
        self._strong = {ft for ft in FIELD_TYPES if config.skill(ft) >= STRONG_SKILL}
        if config.target_style is not None:
            self._pattern, form = STYLE_PATTERNS[config.target_style]
            self._author_form = config.author_form or form
        else:
            self._pattern = None
            self._author_form = config.author_form

    def __repr__(self) -> str:
        return f"BuiltinParser({self.id!r}, style={self.config.target_style!r})"

    def parse(self, s: str) -> ParsedReference:
        text = s.strip()
        if not text:
            return EMPTY
        if self._pattern is not None:
            m = self._pattern.fullmatch(text)
            if m:
                return self._from_match(m)
        return self._fallback(text)

    def _from_match(self, m: re.Match) -> ParsedReference:
        found: list[tuple[int, FieldType, str]] = []
        if A in self._enabled:
            start = m.start("authors")
            for am in re.finditer(AUTHOR_FORMS[self._author_form], m.group("authors")):
                found.append((start + am.start(), A, am.group()))
        for ft in (S, Y, V, I, P):
            if ft in self._enabled and m.group(ft.value) is not None:
                found.append((m.start(ft.value), ft, m.group(ft.value)))
        found.sort(key=lambda x: x[0])
        return ParsedReference(tuple(MetadataField(ft, v) for _, ft, v in found))

    def _fallback(self, s: str) -> ParsedReference:
        rules: dict[FieldType, Callable[[str, bool], list[str]]] = {
            A: lambda t, strong: _author(t, strong, self._author_form),
            S: _source, Y: _year, V: _volume, I: _issue, P: _page,
        }
        out = []
        for ft in FIELD_TYPES:
            if ft in self._enabled:
                out += [MetadataField(ft, v) for v in rules[ft](s, ft in self._strong) if v.strip()]
        return ParsedReference(tuple(out))


def _skills(author: float, source: float, year: float, volume: float, issue: float,
            page: float) -> dict[FieldType, float]:
    return {A: author, S: source, Y: year, V: volume, I: issue, P: page}


def default_configs() -> list[BuiltinParserConfig]:
    specialist = _skills(author=1.0, source=0.5, year=0.5, volume=0.5, issue=0.5, page=0.5)
    return [
        BuiltinParserConfig("bracket", "bracket", specialist),
        BuiltinParserConfig("dotenum", "dotenum", specialist),
        BuiltinParserConfig("apa", "apa", specialist),
        BuiltinParserConfig("ieee", "ieee", specialist),
        BuiltinParserConfig("yearpage", None,
                            _skills(author=0.3, source=0.3, year=1.0, volume=1.0, issue=1.0, page=1.0)),
    ]


# ------------------------------------------------------------------- pool


class ParserPool:
    """Parsers keyed by id, iterated in lexicographic id order."""

    def __init__(self, entries: Iterable[tuple[ParserId, Parser]]):
        items = list(entries)
        ids = [pid for pid, _ in items]
        dupes = sorted({pid for pid in ids if ids.count(pid) > 1})
        if dupes:
            raise ValueError(f"duplicate parser id(s): {', '.join(dupes)}")
        if not items:
            raise ValueError("a parser pool needs at least one parser")
        if len(items) < 2:
            log.warning("parser pool has a single parser; parser selection is vacuous")
        self._parsers = dict(sorted(items, key=lambda kv: kv[0]))

    @property
    def ids(self) -> list[ParserId]:
        return list(self._parsers)

    def __len__(self) -> int:
        return len(self._parsers)

    def __contains__(self, pid: object) -> bool:
        return pid in self._parsers

    def get(self, pid: ParserId) -> Parser:
        try:
            return self._parsers[pid]
        except KeyError:
            raise KeyError(f"unknown parser id: {pid!r}") from None

    def parse(self, pid: ParserId, s: str) -> ParsedReference:
        return self.get(pid).parse(s)

    def parse_all(self, s: str) -> dict[ParserId, ParsedReference]:
        return {pid: p.parse(s) for pid, p in self._parsers.items()}

    def subset(self, ids: Iterable[ParserId]) -> "ParserPool":
        return ParserPool((pid, self.get(pid)) for pid in ids)

    def memoized(self) -> "ParserPool":
        """Same parsers, each caching its output per input string."""
        return ParserPool((pid, _Memo(p)) for pid, p in self._parsers.items())


class _Memo:
    def __init__(self, parser: Parser):
        self._parser = parser
        self._cache: dict[str, ParsedReference] = {}

    def parse(self, s: str) -> ParsedReference:
        out = self._cache.get(s)
        if out is None:
            out = self._cache[s] = self._parser.parse(s)
        return out


def builtin_pool(configs: Iterable[BuiltinParserConfig] | None = None,
                 extra: Iterable[tuple[ParserId, Parser]] = ()) -> ParserPool:
    configs = default_configs() if configs is None else list(configs)
    return ParserPool([(c.id, BuiltinParser(c)) for c in configs] + list(extra))


# --------------------------------------------------------- external parser


class ExternalParserError(RuntimeError):
    pass


class ExternalParser:
    """Adapter for a child process speaking newline-delimited JSON.

    Request ``{"id": ..., "string": ...}``, response ``{"id": ..., "fields":
    [{"type": ..., "value": ...}, ...]}``. Timeouts, malformed lines and a
    dead child all yield an empty reference and bump ``warnings``. One
    request is in flight at a time.
    """

    def __init__(self, id: ParserId, command: str | list[str], timeout: float = 5.0):
        self.id = id
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self.warnings = 0
        self._lock = threading.Lock()
        self._counter = 0
        self._spawn()

    def _spawn(self) -> None:
        try:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, encoding="utf-8", bufsize=1,
            )
        except OSError as exc:
            raise ExternalParserError(f"cannot start parser {self.id!r}: {exc}") from exc
        self._lines: queue.Queue[str | None] = queue.Queue()
        threading.Thread(target=self._pump, args=(self._proc, self._lines), daemon=True).start()

    @staticmethod
    def _pump(proc: subprocess.Popen, lines: "queue.Queue[str | None]") -> None:
        for line in proc.stdout:
            lines.put(line)
        lines.put(None)

    def _warn(self, msg: str) -> ParsedReference:
        self.warnings += 1
        log.warning("external parser %s: %s", self.id, msg)
        return EMPTY

    def parse(self, s: str) -> ParsedReference:
        if not s.strip():
            return EMPTY
        with self._lock:
            if self._proc.poll() is not None:
                self._spawn()
            self._counter += 1
            req_id = f"{self.id}-{self._counter}"
            try:
                self._proc.stdin.write(json.dumps({"id": req_id, "string": s}, ensure_ascii=False) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                return self._warn(f"write failed: {exc}")
            while True:
                try:
                    line = self._lines.get(timeout=self.timeout)
                except queue.Empty:
                    return self._warn(f"timed out after {self.timeout}s")
                if line is None:
                    return self._warn("process exited")
                try:
                    msg = json.loads(line)
                except json.JSONDecodeError:
                    return self._warn(f"malformed response line: {line.strip()[:80]!r}")
                if not isinstance(msg, dict):
                    return self._warn("response is not a JSON object")
                if msg.get("id") != req_id:
                    continue  # stale answer to a request that already timed out
                return self._decode(msg)

    def _decode(self, msg: dict) -> ParsedReference:
        out = []
        fields = msg.get("fields")
        if not isinstance(fields, list):
            return self._warn("response has no 'fields' list")
        for f in fields:
            try:
                ft = FieldType.parse(f["type"])
            except (ValueError, KeyError, TypeError):
                self._warn(f"ignoring field with unknown type: {f!r}")
                continue
            value = f.get("value")
            if isinstance(value, str) and value.strip():
                out.append(MetadataField(ft, value))
        return ParsedReference(tuple(out))

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=self.timeout)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "ExternalParser":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def external_parser(id: ParserId, command: str | list[str], timeout: float = 5.0) -> tuple[ParserId, ExternalParser]:
    return id, ExternalParser(id, command, timeout)
