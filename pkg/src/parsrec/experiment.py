"""End-to-end train/evaluate runs on a split corpus."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

from . import evaluation, meta
from .corpus import SplitSpec, corpus_hash, split
from .meta import MetaConfig, ParsRecModel
from .parserpool import ParserPool
from .refmodel import FIELD_TYPES, LabeledReference

log = logging.getLogger(__name__)


def is_parsrec_pair(a: str, b: str) -> bool:
    return a.startswith("parsrec") or b.startswith("parsrec")


def train_on_corpus(corpus: Sequence[LabeledReference], pool: ParserPool, seed: int,
                    config: MetaConfig = MetaConfig(), split_spec: SplitSpec | None = None) -> ParsRecModel:
    """Split with ``seed``, then train on the meta part; the forest seed follows ``seed``."""
    spec = split_spec or SplitSpec(seed=seed)
    _, meta_split, _ = split(corpus, spec)
    config = replace(config, forest=replace(config.forest, seed=seed))
    if not meta_split:
        raise ValueError("the meta-training split is empty; use a larger corpus")
    return meta.train(meta_split, pool.memoized(), config,
                      train_meta={"seed": seed, "corpus_hash": corpus_hash(corpus)})


@dataclass
class Diagnostics:
    oracle_ref_f1: float
    oracle_field_f1: float
    ref_top1_matches_oracle: float
    ref_top1_achieves_oracle_f1: float
    field_winner_share: dict[str, dict[str, float]] = field(default_factory=dict)


def evaluate_model(model: ParsRecModel, test_split: Sequence[LabeledReference], pool: ParserPool,
                   vote_threshold: int = 3, fallback: bool = False) -> tuple[evaluation.EvalReport, Diagnostics]:
    """Score the five systems on ``test_split`` and compute oracle bounds."""
    if not test_split:
        raise ValueError("test split is empty")
    memo = pool.memoized()
    report = evaluation.evaluate_systems(test_split, model.systems(memo, vote_threshold, fallback),
                                         compare=is_parsrec_pair)
    outputs = [memo.parse_all(r.string) for r in test_split]
    truths = [r.truth for r in test_split]
    o_ref = evaluation.Metrics.from_counts(evaluation.oracle_ref_counts(outputs, truths)).f1
    o_fld = evaluation.Metrics.from_counts(evaluation.oracle_field_counts(outputs, truths)).f1

    same = achieves = 0
    winners = {ft.value: {pid: 0 for pid in model.parsers} for ft in FIELD_TYPES}
    for out, r in zip(outputs, test_split):
        top = meta.recommend_ref(model.ref, r.string)[0][0]
        best = evaluation.oracle_parser(out, r.truth)
        same += top == best
        achieves += evaluation.reference_f1(out[top], r.truth) == evaluation.reference_f1(out[best], r.truth)
        for ft, ranking in meta.recommend_field(model.field, r.string).items():
            winners[ft.value][ranking[0][0]] += 1
    n = len(test_split)
    share = {ft: {pid: c / n for pid, c in row.items()} for ft, row in winners.items()}
    return report, Diagnostics(o_ref, o_fld, same / n, achieves / n, share)


@dataclass
class RunResult:
    model: ParsRecModel
    report: evaluation.EvalReport
    diagnostics: Diagnostics
    seconds: float


def run(corpus: Sequence[LabeledReference], pool: ParserPool, seed: int, config: MetaConfig = MetaConfig(),
        vote_threshold: int = 3, fallback: bool = False) -> RunResult:
    t0 = time.perf_counter()
    model = train_on_corpus(corpus, pool, seed, config)
    _, _, test = split(corpus, SplitSpec(seed=seed))
    report, diag = evaluate_model(model, test, pool, vote_threshold, fallback)
    return RunResult(model, report, diag, time.perf_counter() - t0)

