"""Parser recommenders and baselines.

Two recommenders pick parsers per input string:

* ``parsrec_ref`` scores every parser with a ridge model of its expected
  reference F1 and applies the top one to the whole string;
* ``parsrec_field`` scores every (parser, field type) pair with a logistic
  model of extraction correctness and assembles the output from the top
  parser of each type.

The baselines are the best single parser, a static per-type hybrid table
and a k-of-n voting ensemble. ``ParsRecModel`` bundles all of them and
round-trips through a JSON model file.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import evaluation
from .features import DEFAULT_K, DEFAULT_MIN_DF, FeatureSpec, build_feature_spec, extract_matrix, extract_vector, make_ngram
from .learn import (ForestParams, LinearModel, LogisticModel, fit_logistic, fit_ridge, predict_linear,
                    predict_proba)
from .parserpool import ParserPool
from .refmodel import (FIELD_TYPES, FieldType, LabeledReference, ParsedReference, ParserId,
                       fields_of_type, normalize_value)

log = logging.getLogger(__name__)

MODEL_VERSION = 1
SYSTEM_NAMES = ("best_single", "hybrid", "voting", "parsrec_ref", "parsrec_field")

Outputs = list[dict[ParserId, ParsedReference]]
Ranking = list[tuple[ParserId, float]]


@dataclass(frozen=True)
class MetaConfig:
    k_ngrams: int = DEFAULT_K
    min_df: int = DEFAULT_MIN_DF
    forest: ForestParams = ForestParams()
    ridge_lambda: float = 1e-6
    logistic_lambda: float = 1e-3
    logistic_tol: float = 1e-6
    logistic_max_iter: int = 500
    label_rule: str = "exact"  # or "overlap"


def run_pool(pool: ParserPool, refs: Sequence[LabeledReference]) -> Outputs:
    return [pool.parse_all(r.string) for r in refs]


def _rank(scores: Mapping[ParserId, float]) -> Ranking:
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


# ------------------------------------------------------------- ParsRec-Ref


@dataclass(frozen=True)
class RefMetaModel:
    spec: FeatureSpec
    per_parser: dict[ParserId, LinearModel]


def train_parsrec_ref(meta_split: Sequence[LabeledReference], pool: ParserPool, spec: FeatureSpec,
                      lam: float = 1e-6, outputs: Outputs | None = None) -> RefMetaModel:
    if not meta_split:
        raise ValueError("meta split is empty")
    outputs = run_pool(pool, meta_split) if outputs is None else outputs
    X = extract_matrix([r.string for r in meta_split], spec)
    models = {}
    for pid in pool.ids:
        y = [evaluation.reference_f1(out[pid], r.truth) for out, r in zip(outputs, meta_split)]
        models[pid] = fit_ridge(X, y, lam)
    return RefMetaModel(spec, models)


def recommend_ref(m: RefMetaModel, s: str) -> Ranking:
    """All parsers, best predicted F1 first (clamped to [0, 1])."""
    x = extract_vector(s, m.spec)
    return _rank({pid: min(1.0, max(0.0, predict_linear(lm, x))) for pid, lm in m.per_parser.items()})


def parse_with_ref(m: RefMetaModel, pool: ParserPool, s: str) -> ParsedReference:
    return pool.parse(recommend_ref(m, s)[0][0], s)


# ----------------------------------------------------------- ParsRec-Field


@dataclass(frozen=True)
class FieldMetaModel:
    spec: FeatureSpec
    per_pair: dict[tuple[ParserId, FieldType], LogisticModel]

    @property
    def parsers(self) -> list[ParserId]:
        return sorted({pid for pid, _ in self.per_pair})


def field_correct(pred: ParsedReference, truth: ParsedReference, ft: FieldType, rule: str = "exact") -> bool:
    """Exact: same multiset of normalized values (both empty counts). Overlap: any shared value."""
    p, t = fields_of_type(pred, ft), fields_of_type(truth, ft)
    if rule == "exact":
        return p == t
    if rule == "overlap":
        return (not p and not t) or bool(p & t)
    raise ValueError(f"unknown label rule {rule!r}")


def train_parsrec_field(meta_split: Sequence[LabeledReference], pool: ParserPool, spec: FeatureSpec,
                        lam: float = 1e-3, tol: float = 1e-6, max_iter: int = 500, label_rule: str = "exact",
                        outputs: Outputs | None = None) -> FieldMetaModel:
    if not meta_split:
        raise ValueError("meta split is empty")
    outputs = run_pool(pool, meta_split) if outputs is None else outputs
    X = extract_matrix([r.string for r in meta_split], spec)
    models = {}
    for pid in pool.ids:
        for ft in FIELD_TYPES:
            y = [int(field_correct(out[pid], r.truth, ft, label_rule)) for out, r in zip(outputs, meta_split)]
            models[(pid, ft)] = fit_logistic(X, y, lam, tol, max_iter)
    return FieldMetaModel(spec, models)


def recommend_field(m: FieldMetaModel, s: str) -> dict[FieldType, Ranking]:
    x = extract_vector(s, m.spec)
    return {ft: _rank({pid: predict_proba(m.per_pair[(pid, ft)], x) for pid in m.parsers}) for ft in FIELD_TYPES}


def merge_by_type(rankings: Mapping[FieldType, Sequence[ParserId]], pool: ParserPool, s: str,
                  fallback: bool = False) -> ParsedReference:
    """Take each type's fields from its chosen parser; each parser runs at most once.

    With ``fallback`` a type whose first choice emits nothing falls through
    to the next parser in its ranking. Fields keep their parser's output
    order, parsers are visited in id order.
    """
    outputs: dict[ParserId, ParsedReference] = {}
    chosen: dict[FieldType, ParserId] = {}
    for ft in FIELD_TYPES:
        candidates = list(rankings[ft]) if fallback else list(rankings[ft])[:1]
        for pid in candidates:
            if pid not in outputs:
                outputs[pid] = pool.parse(pid, s)
            if outputs[pid].of_type(ft) or not fallback:
                chosen[ft] = pid
                break
    return ParsedReference(tuple(f for pid in sorted(outputs) for f in outputs[pid]
                                 if chosen.get(f.ftype) == pid))


def parse_with_field(m: FieldMetaModel, pool: ParserPool, s: str, fallback: bool = False) -> ParsedReference:
    ranks = recommend_field(m, s)
    return merge_by_type({ft: [pid for pid, _ in r] for ft, r in ranks.items()}, pool, s, fallback)


# --------------------------------------------------------------- baselines


def best_single(meta_split: Sequence[LabeledReference], pool: ParserPool, outputs: Outputs | None = None) -> ParserId:
    """Parser with the highest micro-F1 over the split; ties to the smallest id."""
    outputs = run_pool(pool, meta_split) if outputs is None else outputs
    best, best_f1 = None, -1.0
    for pid in pool.ids:
        f1 = evaluation.corpus_metrics([(out[pid], r.truth) for out, r in zip(outputs, meta_split)]).f1
        if f1 > best_f1:
            best, best_f1 = pid, f1
    return best


HybridTable = dict[FieldType, ParserId]


def hybrid_table(meta_split: Sequence[LabeledReference], pool: ParserPool, outputs: Outputs | None = None) -> HybridTable:
    """Per field type, the parser with the highest per-type micro-F1."""
    outputs = run_pool(pool, meta_split) if outputs is None else outputs
    table = {}
    for ft in FIELD_TYPES:
        best, best_f1 = None, -1.0
        for pid in pool.ids:
            total = evaluation.MatchCounts()
            for out, r in zip(outputs, meta_split):
                total = total + evaluation.match_type(out[pid], r.truth, ft)
            f1 = evaluation.Metrics.from_counts(total).f1
            if f1 > best_f1:
                best, best_f1 = pid, f1
        table[ft] = best
    return table


def parse_hybrid(table: HybridTable, pool: ParserPool, s: str, fallback: bool = False) -> ParsedReference:
    return merge_by_type({ft: [table[ft]] for ft in FIELD_TYPES}, pool, s, fallback)


def vote(outputs: Mapping[ParserId, ParsedReference], k: int = 3) -> ParsedReference:
    """Fields whose (type, normalized value) appears in at least ``k`` parsers' outputs."""
    if k < 1:
        raise ValueError("vote threshold must be >= 1")
    support: Counter = Counter()
    for pid in sorted(outputs):
        support.update({(f.ftype, normalize_value(f.value)) for f in outputs[pid]})
    out, emitted = [], set()
    for pid in sorted(outputs):
        for f in outputs[pid]:
            key = (f.ftype, normalize_value(f.value))
            if key[1] and support[key] >= k and key not in emitted:
                emitted.add(key)
                out.append(f)
    return ParsedReference(tuple(out))


def parse_voting(pool: ParserPool, s: str, k: int = 3) -> ParsedReference:
    return vote(pool.parse_all(s), k)


# ------------------------------------------------------------ model bundle


@dataclass
class ParsRecModel:
    parsers: list[ParserId]
    spec: FeatureSpec
    ref: RefMetaModel
    field: FieldMetaModel
    hybrid: HybridTable
    best_single: ParserId
    train_meta: dict = field(default_factory=dict)

    def systems(self, pool: ParserPool, vote_threshold: int = 3,
                fallback: bool = False) -> dict[str, Callable[[str], ParsedReference]]:
        self.check_pool(pool)
        return {
            "best_single": lambda s: pool.parse(self.best_single, s),
            "hybrid": lambda s: parse_hybrid(self.hybrid, pool, s, fallback),
            "voting": lambda s: parse_voting(pool, s, vote_threshold),
            "parsrec_ref": lambda s: parse_with_ref(self.ref, pool, s),
            "parsrec_field": lambda s: parse_with_field(self.field, pool, s, fallback),
        }

    def check_pool(self, pool: ParserPool) -> None:
        if pool.ids != self.parsers:
            raise ValueError(f"model was trained on parsers {self.parsers}, pool has {pool.ids}")

    # -- serialization

    def to_json(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "parsers": list(self.parsers),
            "feature_spec": {
                "ngrams": [[c.value for c in g] for g in self.spec.selected_ngrams],
                "scaler_mean": list(self.spec.scaler_mean),
                "scaler_std": list(self.spec.scaler_std),
            },
            "ref_models": {pid: {"w": m.weights.tolist(), "b": m.intercept} for pid, m in self.ref.per_parser.items()},
            "field_models": {
                f"{pid}|{ft.value}": {"w": m.weights.tolist(), "b": m.intercept, "degenerate": m.degenerate}
                for (pid, ft), m in self.field.per_pair.items()
            },
            "hybrid_table": {ft.value: pid for ft, pid in self.hybrid.items()},
            "best_single": self.best_single,
            "train_meta": self.train_meta,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, allow_nan=False) + "\n"

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def from_json(cls, doc: dict) -> "ParsRecModel":
        if doc.get("version") != MODEL_VERSION:
            raise ModelFormatError(f"unsupported model version {doc.get('version')!r}")
        try:
            fs = doc["feature_spec"]
            spec = FeatureSpec(tuple(make_ngram(g) for g in fs["ngrams"]),
                               tuple(map(float, fs["scaler_mean"])), tuple(map(float, fs["scaler_std"])))
            parsers = list(doc["parsers"])
            ref = {}
            for pid in parsers:
                m = doc["ref_models"][pid]
                ref[pid] = LinearModel(_weights(m["w"], spec.dim, f"ref model {pid}"), float(m["b"]))
            pairs = {}
            for pid in parsers:
                for ft in FIELD_TYPES:
                    m = doc["field_models"][f"{pid}|{ft.value}"]
                    pairs[(pid, ft)] = LogisticModel(_weights(m["w"], spec.dim, f"field model {pid}|{ft.value}"),
                                                     float(m["b"]), degenerate=bool(m.get("degenerate", False)))
            hybrid = {FieldType.parse(k): v for k, v in doc["hybrid_table"].items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"malformed model file: {exc}") from exc
        if set(hybrid) != set(FIELD_TYPES):
            raise ModelFormatError("hybrid table must cover all six field types")
        unknown = {doc["best_single"], *hybrid.values()} - set(parsers)
        if unknown:
            raise ModelFormatError(f"model references unknown parsers: {sorted(unknown)}")
        return cls(parsers, spec, RefMetaModel(spec, ref), FieldMetaModel(spec, pairs), hybrid,
                   doc["best_single"], dict(doc.get("train_meta", {})))

    @classmethod
    def load(cls, path: str | Path) -> "ParsRecModel":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ModelFormatError(f"{path}: not valid JSON: {exc}") from exc
        return cls.from_json(doc)


class ModelFormatError(ValueError):
    pass


def _weights(w, dim: int, what: str) -> np.ndarray:
    arr = np.asarray(w, dtype=float)
    if arr.shape != (dim,):
        raise ModelFormatError(f"{what}: expected {dim} weights, found {arr.size}")
    return arr


def train(meta_split: Sequence[LabeledReference], pool: ParserPool, config: MetaConfig = MetaConfig(),
          train_meta: dict | None = None) -> ParsRecModel:
    """Select features and fit both recommenders plus the baselines on one split."""
    if not meta_split:
        raise ValueError("meta split is empty")
    outputs = run_pool(pool, meta_split)
    labels = [evaluation.oracle_parser(out, r.truth) for out, r in zip(outputs, meta_split)]
    spec = build_feature_spec([(r.string, lab) for r, lab in zip(meta_split, labels)], config.k_ngrams,
                              config.forest, config.min_df)
    ref = train_parsrec_ref(meta_split, pool, spec, config.ridge_lambda, outputs)
    fld = train_parsrec_field(meta_split, pool, spec, config.logistic_lambda, config.logistic_tol,
                              config.logistic_max_iter, config.label_rule, outputs)
    return ParsRecModel(
        parsers=pool.ids,
        spec=spec,
        ref=ref,
        field=fld,
        hybrid=hybrid_table(meta_split, pool, outputs),
        best_single=best_single(meta_split, pool, outputs),
        train_meta=dict(train_meta or {}),
    )
