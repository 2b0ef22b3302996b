"""Synthetic multi-style reference corpus, JSONL persistence and splitting.

Each record is a bibliographic entry rendered in one of several citation
styles. Ground-truth field values are the exact substrings the renderer
emitted, so every truth value is recoverable from the string.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .refmodel import FieldType, LabeledReference, MetadataField, ParsedReference

A, S, Y, V, I, P = (FieldType.AUTHOR, FieldType.SOURCE, FieldType.YEAR,
                    FieldType.VOLUME, FieldType.ISSUE, FieldType.PAGE)

SURNAMES = (
    "Adomavicius", "Tuzhilin", "Acilar", "Arslan", "Abbar", "Bouzeghoul", "Lopez", "Bobadilla",
    "Serradilla", "Hernando", "Ortega", "Burke", "Lemke", "Budka", "Gabrys", "Collins", "Sheridan",
    "Tkaczyk", "Beel", "Smith", "Nakamura", "Kowalski", "Petrov", "Moreau", "Rossi", "Schmidt",
    "Jensen", "Novak", "Horvath", "Silva", "Costa", "Chen", "Wang", "Zhang", "Kumar", "Patel",
    "Okafor", "Mensah", "Larsen", "Dubois", "Fischer", "Weber", "Keller", "Vogel", "Brennan",
    "Murphy", "Walsh", "Gallagher", "Fitzgerald", "Yamamoto", "Tanaka", "Suzuki", "Ivanova",
    "Sokolov", "Garcia", "Martinez", "Fernandez", "Romero", "Alvarez", "Haddad", "Nassar",
)

TITLE_WORDS = (
    "synthesis", "characterization", "of", "novel", "catalytic", "polymer", "membranes", "for",
    "selective", "oxidation", "a", "survey", "approach", "kinetic", "study", "the", "thermal",
    "stability", "metal", "organic", "frameworks", "in", "aqueous", "solution", "efficient",
    "recommender", "systems", "collaborative", "filtering", "method", "based", "on", "network",
    "analysis", "spectroscopic", "evidence", "reaction", "mechanisms", "and", "their", "role",
    "toward", "next", "generation", "improved", "measurement", "crystal", "structure", "ligand",
    "binding", "electrochemical", "properties", "chiral", "compounds", "with", "high", "yield",
)

JOURNALS = (
    "Expert Systems with Applications", "Journal of the American Chemical Society",
    "Chemical Reviews", "Organic Letters", "Inorganic Chemistry", "Knowledge Based Systems",
    "Journal of Organic Chemistry", "Angewandte Chemie", "Chemical Communications",
    "Journal of Physical Chemistry", "Information Sciences", "Nature", "Science",
    "Biochemistry", "Macromolecules", "Langmuir", "Analytical Chemistry",
    "Journal of Medicinal Chemistry", "Catalysis Science and Technology",
    "Physical Chemistry Chemical Physics", "Artificial Intelligence Review",
    "Green Chemistry", "Dalton Transactions", "Chemistry of Materials",
)


@dataclass(frozen=True)
class Record:
    """Style-independent bibliographic facts behind one reference."""

    authors: tuple[tuple[str, str], ...]  # (surname, initials such as "AM")
    title: str
    source: str
    year: int
    volume: int
    issue: int | None
    first_page: int
    last_page: int


# A render is a list of segments: (text, field type) for values, (text, None) for separators.
Segment = tuple[str, "FieldType | None"]


@dataclass(frozen=True)
class Jitter:
    swap_dash: bool = False
    drop_final_dot: bool = False
    double_space: int | None = None  # index among separator spaces to double


@dataclass(frozen=True)
class StyleTemplate:
    name: str
    render_segments: Callable[[Record, int], list[Segment]]

    def render(self, rec: Record, number: int = 1, jitter: Jitter = Jitter()) -> tuple[str, ParsedReference]:
        segs = list(self.render_segments(rec, number))
        if jitter.swap_dash:
            segs = [(_swap_dash(t), f) if f is P else (t, f) for t, f in segs]
        if jitter.drop_final_dot and segs and segs[-1][1] is None and segs[-1][0].endswith("."):
            segs[-1] = (segs[-1][0][:-1], None)
        if jitter.double_space is not None:
            spaces = [(i, j) for i, (t, f) in enumerate(segs) if f is None for j, ch in enumerate(t) if ch == " "]
            if spaces:
                i, j = spaces[jitter.double_space % len(spaces)]
                t = segs[i][0]
                segs[i] = (t[:j] + " " + t[j:], None)
        string = "".join(t for t, _ in segs)
        truth = ParsedReference(tuple(MetadataField(f, t) for t, f in segs if f is not None))
        return string, truth


def _swap_dash(t: str) -> str:
    return t.replace("–", "\0").replace("-", "–").replace("\0", "-")


# ------------------------------------------------------------- author forms


def _initials_first(sur: str, ini: str, spaced: bool) -> str:
    dots = (" " if spaced else "").join(f"{c}." for c in ini)
    return f"{dots} {sur}"


def _surname_comma(sur: str, ini: str) -> str:
    return f"{sur}, " + " ".join(f"{c}." for c in ini)


def _join_authors(names: list[str], sep: str, last_sep: str | None = None) -> list[Segment]:
    out: list[Segment] = []
    for k, name in enumerate(names):
        if k:
            out.append((last_sep if last_sep is not None and k == len(names) - 1 else sep, None))
        out.append((name, A))
    return out


# ----------------------------------------------------------------- styles


def _render_bracket(r: Record, n: int) -> list[Segment]:
    # [3] G. Adomavicius, A. Tuzhilin, Toward the next generation, Journal 17 (6) (2005) 734–749.
    segs: list[Segment] = [(f"[{n}] ", None)]
    segs += _join_authors([_initials_first(s, i, False) for s, i in r.authors], ", ")
    segs += [(f", {r.title}, ", None), (r.source, S), (" ", None), (str(r.volume), V)]
    if r.issue is not None:
        segs += [(" (", None), (str(r.issue), I), (")", None)]
    segs += [(" (", None), (str(r.year), Y), (") ", None), (f"{r.first_page}–{r.last_page}", P), (".", None)]
    return segs


def _render_dotenum(r: Record, n: int) -> list[Segment]:
    # 14. Adomavicius G, Tuzhilin A (2005) Toward the next generation. Journal 17(6):734-749.
    segs: list[Segment] = [(f"{n}. ", None)]
    segs += _join_authors([f"{s} {i}" for s, i in r.authors], ", ")
    segs += [(" (", None), (str(r.year), Y), (f") {r.title}. ", None), (r.source, S), (" ", None),
             (str(r.volume), V)]
    if r.issue is not None:
        segs += [("(", None), (str(r.issue), I), (")", None)]
    segs += [(":", None), (f"{r.first_page}-{r.last_page}", P), (".", None)]
    return segs


def _render_acs(r: Record, n: int) -> list[Segment]:
    # Adomavicius, G.; Tuzhilin, A. Toward the next generation. Journal 2005, 17 (6), 734–749.
    segs = _join_authors([_surname_comma(s, i) for s, i in r.authors], "; ")
    segs += [(f" {r.title}. ", None), (r.source, S), (" ", None), (str(r.year), Y), (", ", None),
             (str(r.volume), V)]
    if r.issue is not None:
        segs += [(" (", None), (str(r.issue), I), (")", None)]
    segs += [(", ", None), (f"{r.first_page}–{r.last_page}", P), (".", None)]
    return segs


def _render_apa(r: Record, n: int) -> list[Segment]:
    # Adomavicius, G., & Tuzhilin, A. (2005). Toward the next generation. Journal, 17(6), 734–749.
    names = [_surname_comma(s, i) for s, i in r.authors]
    segs = _join_authors(names, ", ", ", & ")
    segs += [(" (", None), (str(r.year), Y), (f"). {r.title}. ", None), (r.source, S), (", ", None),
             (str(r.volume), V)]
    if r.issue is not None:
        segs += [("(", None), (str(r.issue), I), (")", None)]
    segs += [(", ", None), (f"{r.first_page}–{r.last_page}", P), (".", None)]
    return segs


def _render_ieee(r: Record, n: int) -> list[Segment]:
    # [3] G. Adomavicius and A. Tuzhilin, "Toward the next generation," Journal, vol. 17, no. 6, pp. 734-749, 2005.
    names = [_initials_first(s, i, True) for s, i in r.authors]
    last_sep = " and " if len(names) == 2 else ", and "
    segs: list[Segment] = [(f"[{n}] ", None)]
    segs += _join_authors(names, ", ", last_sep)
    segs += [(f', "{r.title}," ', None), (r.source, S), (", vol. ", None), (str(r.volume), V)]
    if r.issue is not None:
        segs += [(", no. ", None), (str(r.issue), I)]
    segs += [(", pp. ", None), (f"{r.first_page}-{r.last_page}", P), (", ", None), (str(r.year), Y), (".", None)]
    return segs


STYLES: dict[str, StyleTemplate] = {
    t.name: t
    for t in (
        StyleTemplate("bracket", _render_bracket),
        StyleTemplate("dotenum", _render_dotenum),
        StyleTemplate("acs", _render_acs),
        StyleTemplate("apa", _render_apa),
        StyleTemplate("ieee", _render_ieee),
    )
}
DEFAULT_STYLES = tuple(STYLES)


def get_styles(names: Sequence[str] | None = None) -> list[StyleTemplate]:
    if names is None:
        return list(STYLES.values())
    unknown = [n for n in names if n not in STYLES]
    if unknown:
        raise ValueError(f"unknown style(s): {', '.join(unknown)}; known: {', '.join(STYLES)}")
    return [STYLES[n] for n in names]


# ------------------------------------------------------------- generation


def _record_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, i]))


def random_record(rng: np.random.Generator) -> Record:
    n_auth = int(rng.integers(1, 5))
    surnames = rng.choice(len(SURNAMES), size=n_auth, replace=False)
    authors = []
    for k in surnames:
        n_ini = 1 if rng.random() < 0.7 else 2
        ini = "".join(chr(ord("A") + int(c)) for c in rng.integers(0, 26, size=n_ini))
        authors.append((SURNAMES[int(k)], ini))
    n_words = int(rng.integers(3, 9))
    words = [TITLE_WORDS[int(k)] for k in rng.integers(0, len(TITLE_WORDS), size=n_words)]
    title = " ".join(words)
    title = title[0].upper() + title[1:]
    first = int(min(2500, max(1, round(np.exp(rng.uniform(0.0, np.log(2500)))))))
    return Record(
        authors=tuple(authors),
        title=title,
        source=JOURNALS[int(rng.integers(0, len(JOURNALS)))],
        year=int(rng.integers(1950, 2024)),
        volume=int(rng.integers(1, 201)),
        issue=int(rng.integers(1, 13)) if rng.random() < 0.7 else None,
        first_page=first,
        last_page=first + int(rng.integers(1, 31)),
    )


def random_jitter(rng: np.random.Generator, prob: float) -> Jitter:
    draws = rng.random(3)
    return Jitter(
        swap_dash=bool(draws[0] < prob),
        drop_final_dot=bool(draws[1] < prob),
        double_space=int(rng.integers(0, 1 << 16)) if draws[2] < prob else None,
    )


def generate(n: int, styles: Sequence[StyleTemplate] | None = None, seed: int = 0,
             jitter_prob: float = 0.1) -> list[LabeledReference]:
    """``n`` labeled references; styles assigned round-robin.

    Record ``i`` draws everything from a generator seeded by ``(seed, i)``,
    so any prefix or subset can be regenerated independently.
    """
    styles = list(STYLES.values()) if styles is None else list(styles)
    if not styles:
        raise ValueError("generate() needs at least one style")
    if n < 0:
        raise ValueError("n must be >= 0")
    out = []
    for i in range(n):
        rng = _record_rng(seed, i)
        style = styles[i % len(styles)]
        rec = random_record(rng)
        number = int(rng.integers(1, 151))
        jit = random_jitter(rng, jitter_prob)
        string, truth = style.render(rec, number, jit)
        out.append(LabeledReference(id=f"ref-{i:06d}", string=string, truth=truth, style=style.name))
    return out


# ----------------------------------------------------------------- splits


@dataclass(frozen=True)
class SplitSpec:
    parser_train: float = 0.40
    meta_train: float = 0.30
    test: float = 0.30
    seed: int = 0

    def __post_init__(self) -> None:
        fr = (self.parser_train, self.meta_train, self.test)
        if any(f <= 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be positive and sum to 1, got {fr}")


def split(data: Sequence[LabeledReference], spec: SplitSpec = SplitSpec()):
    """Seeded shuffle, then floor-sized cuts; the remainder goes to test."""
    n = len(data)
    order = np.random.default_rng(spec.seed).permutation(n)
    n_parser = int(np.floor(n * spec.parser_train))
    n_meta = int(np.floor(n * spec.meta_train))
    shuffled = [data[int(k)] for k in order]
    return shuffled[:n_parser], shuffled[n_parser:n_parser + n_meta], shuffled[n_parser + n_meta:]


# -------------------------------------------------------------------- I/O


class CorpusFormatError(ValueError):
    pass


def to_json(ref: LabeledReference) -> dict:
    return {
        "id": ref.id,
        "string": ref.string,
        "style": ref.style,
        "fields": [{"type": f.ftype.value, "value": f.value} for f in ref.truth],
    }


def from_json(obj: dict) -> LabeledReference:
    fields = tuple(MetadataField(FieldType.parse(f["type"]), f["value"]) for f in obj["fields"])
    return LabeledReference(id=obj["id"], string=obj["string"], truth=ParsedReference(fields),
                            style=obj.get("style"))


def dumps_jsonl(data: Sequence[LabeledReference]) -> str:
    return "".join(json.dumps(to_json(r), ensure_ascii=False) + "\n" for r in data)


def save_jsonl(data: Sequence[LabeledReference], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_jsonl(data))


def load_jsonl(path: str | Path) -> list[LabeledReference]:
    out = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                ref = from_json(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise CorpusFormatError(f"{path}:{lineno}: {exc}") from exc
            if ref.id in seen:
                raise CorpusFormatError(f"{path}:{lineno}: duplicate id {ref.id!r}")
            seen.add(ref.id)
            out.append(ref)
    return out


def corpus_hash(data: Sequence[LabeledReference]) -> str:
    return hashlib.sha256(dumps_jsonl(data).encode("utf-8")).hexdigest()


def style_counts(data: Sequence[LabeledReference]) -> dict[str, int]:
    return dict(sorted(Counter(r.style or "" for r in data).items()))
