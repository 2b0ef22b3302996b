"""Heuristic and word-class n-gram features for reference strings."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .learn import ForestParams, fit_forest, forest_importance
from .tokens import Token, WordClass, class_sequence, tokenize

Ngram = tuple[WordClass, ...]

HEURISTIC_NAMES = (
    "len_chars",
    "n_comma",
    "frac_comma",
    "n_dot",
    "frac_dot",
    "n_semicolon",
    "frac_semicolon",
    "starts_bracket",
    "starts_dotenum",
)
N_HEURISTICS = len(HEURISTIC_NAMES)
NGRAM_SIZES = (3, 4)
DEFAULT_K = 150
DEFAULT_MIN_DF = 5

_BRACKET_START = re.compile(r"\[[^\]]{1,6}\]")
_DOTENUM_START = re.compile(r"\d{1,4}\.")


def ngram_name(g: Ngram) -> str:
    return "-".join(c.value for c in g)


def _class_names(g: Ngram) -> tuple[str, ...]:
    return tuple(c.value for c in g)


def make_ngram(classes: Iterable[WordClass | str]) -> Ngram:
    g = tuple(WordClass(c) for c in classes)
    if len(g) not in NGRAM_SIZES:
        raise ValueError(f"n-gram length must be 3 or 4, got {len(g)}")
    return g


def extract_heuristics(s: str) -> list[float]:
    n_tokens = len(tokenize(s))
    out = [float(len(s))]
    for ch in ",.;":
        n = s.count(ch)
        out += [float(n), n / n_tokens if n_tokens else 0.0]
    head = s.lstrip()
    out.append(1.0 if _BRACKET_START.match(head) else 0.0)
    out.append(1.0 if _DOTENUM_START.match(head) else 0.0)
    return out


def enumerate_ngrams(seq: Sequence[Token | WordClass]) -> Counter[Ngram]:
    classes = [t.wclass if isinstance(t, Token) else t for t in seq]
    grams: Counter[Ngram] = Counter()
    for size in NGRAM_SIZES:
        for i in range(len(classes) - size + 1):
            grams[tuple(classes[i:i + size])] += 1
    return grams


@dataclass(frozen=True)
class FeatureSpec:
    selected_ngrams: tuple[Ngram, ...]
    scaler_mean: tuple[float, ...]
    scaler_std: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(set(self.selected_ngrams)) != len(self.selected_ngrams):
            raise ValueError("selected n-grams contain duplicates")
        for g in self.selected_ngrams:
            if len(g) not in NGRAM_SIZES:
                raise ValueError(f"bad n-gram length {len(g)}")
        dim = self.dim
        if len(self.scaler_mean) != dim or len(self.scaler_std) != dim:
            raise ValueError(f"scaler arrays must have length {dim}")
        if any(sd < 0 for sd in self.scaler_std):
            raise ValueError("scaler stddev must be >= 0")

    @property
    def dim(self) -> int:
        return N_HEURISTICS + len(self.selected_ngrams)

    @classmethod
    def identity(cls, ngrams: Sequence[Ngram] = ()) -> "FeatureSpec":
        d = N_HEURISTICS + len(ngrams)
        return cls(tuple(ngrams), (0.0,) * d, (1.0,) * d)

    def feature_names(self) -> list[str]:
        return list(HEURISTIC_NAMES) + [ngram_name(g) for g in self.selected_ngrams]


def raw_vector(s: str, ngrams: Sequence[Ngram]) -> list[float]:
    grams = enumerate_ngrams(class_sequence(s))
    return extract_heuristics(s) + [float(grams.get(g, 0)) for g in ngrams]


def fit_scaler(vectors) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Per-dimension mean and population stddev."""
    rows = [list(v) for v in vectors]
    if not rows:
        raise ValueError("fit_scaler needs at least one vector")
    if len({len(r) for r in rows}) != 1:
        raise ValueError("vectors have mismatched lengths")
    arr = np.asarray(rows, dtype=float)
    return tuple(arr.mean(axis=0).tolist()), tuple(arr.std(axis=0).tolist())


def _standardize(raw: np.ndarray, spec: FeatureSpec) -> np.ndarray:
    mean = np.asarray(spec.scaler_mean)
    std = np.asarray(spec.scaler_std)
    scale = np.where(std > 0, std, 1.0)
    shift = np.where(std > 0, mean, 0.0)
    return (raw - shift) / scale


def extract_vector(s: str, spec: FeatureSpec) -> np.ndarray:
    return _standardize(np.asarray(raw_vector(s, spec.selected_ngrams)), spec)


def extract_matrix(strings: Sequence[str], spec: FeatureSpec) -> np.ndarray:
    raw = np.asarray([raw_vector(s, spec.selected_ngrams) for s in strings], dtype=float)
    raw = raw.reshape(len(strings), spec.dim)
    return _standardize(raw, spec)


def candidate_ngrams(strings: Iterable[str], min_df: int = DEFAULT_MIN_DF) -> tuple[list[Ngram], list[Counter]]:
    per_string = [enumerate_ngrams(class_sequence(s)) for s in strings]
    total: Counter[Ngram] = Counter()
    for c in per_string:
        total.update(c)
    cands = sorted((g for g, n in total.items() if n >= min_df), key=_class_names)
    return cands, per_string


def ngram_importances(data: Sequence[tuple[str, str]], forest_params: ForestParams = ForestParams(),
                      min_df: int = DEFAULT_MIN_DF) -> dict[Ngram, float]:
    """Forest importance of every candidate n-gram for predicting the label."""
    cands, per_string = candidate_ngrams([s for s, _ in data], min_df)
    if not cands:
        return {}
    X = np.asarray([[c.get(g, 0) for g in cands] for c in per_string], dtype=float)
    imp = forest_importance(fit_forest(X, [lab for _, lab in data], forest_params))
    return dict(zip(cands, imp.tolist()))


def select_ngram_features(data: Sequence[tuple[str, str]], k: int = DEFAULT_K,
                          forest_params: ForestParams = ForestParams(), seed: int | None = None,
                          min_df: int = DEFAULT_MIN_DF) -> list[Ngram]:
    """Top-``k`` candidate n-grams by forest importance, most important first.

    ``data`` pairs each string with its best-parser label. Equal importances
    fall back to class-name order.
    """
    if not data:
        raise ValueError("select_ngram_features needs non-empty data")
    if k <= 0:
        return []
    if seed is not None:
        forest_params = replace(forest_params, seed=seed)
    imp = ngram_importances(data, forest_params, min_df)
    ranked = sorted(imp, key=lambda g: (-imp[g], _class_names(g)))
    return ranked[:k]


def build_feature_spec(data: Sequence[tuple[str, str]], k: int = DEFAULT_K,
                       forest_params: ForestParams = ForestParams(),
                       min_df: int = DEFAULT_MIN_DF) -> FeatureSpec:
    """Select n-grams, then freeze the scaler on the same strings."""
    ngrams = select_ngram_features(data, k, forest_params, min_df=min_df)
    raws = [raw_vector(s, ngrams) for s, _ in data]
    mean, std = fit_scaler(raws)
    return FeatureSpec(tuple(ngrams), mean, std)
