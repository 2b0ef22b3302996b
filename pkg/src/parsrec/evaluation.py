"""Field-level matching, micro-averaged metrics and paired significance tests."""

from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import betainc

from .refmodel import FIELD_TYPES, FieldType, LabeledReference, ParsedReference, fields_of_type


@dataclass(frozen=True)
class MatchCounts:
    tp: int = 0
    n_pred: int = 0
    n_truth: int = 0

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        return MatchCounts(self.tp + other.tp, self.n_pred + other.n_pred, self.n_truth + other.n_truth)


def _values(p: ParsedReference, t: FieldType, strict: bool) -> Counter:
    if strict:
        return Counter(f.value for f in p.fields if f.ftype is t)
    return fields_of_type(p, t)


def match_type(pred: ParsedReference, truth: ParsedReference, t: FieldType, strict: bool = False) -> MatchCounts:
    """Multiset overlap of type-``t`` values; ``strict`` compares raw text instead of normalized."""
    p = _values(pred, t, strict)
    g = _values(truth, t, strict)
    return MatchCounts(sum((p & g).values()), sum(p.values()), sum(g.values()))


def match_fields(pred: ParsedReference, truth: ParsedReference, strict: bool = False) -> MatchCounts:
    total = MatchCounts()
    for t in FIELD_TYPES:
        total = total + match_type(pred, truth, t, strict)
    return total


def f1_from_counts(c: MatchCounts) -> float:
    if c.n_pred == 0 and c.n_truth == 0:
        return 1.0
    if c.tp == 0:
        return 0.0
    # 2PR/(P+R) with P = tp/n_pred, R = tp/n_truth
    return 2.0 * c.tp / (c.n_pred + c.n_truth)


def reference_f1(pred: ParsedReference, truth: ParsedReference) -> float:
    return f1_from_counts(match_fields(pred, truth))


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    fp_rate: float
    fn_rate: float

    @classmethod
    def from_counts(cls, c: MatchCounts) -> "Metrics":
        p = c.tp / c.n_pred if c.n_pred else 1.0
        r = c.tp / c.n_truth if c.n_truth else 1.0
        return cls.from_pr(p, r)

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "Metrics":
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(precision, recall, f1, 1.0 - precision, 1.0 - recall)


def corpus_metrics(pairs: Sequence[tuple[ParsedReference, ParsedReference]], strict: bool = False) -> Metrics:
    """Micro-averaged metrics over (prediction, truth) pairs."""
    if not pairs:
        raise ValueError("corpus_metrics needs at least one pair")
    total = MatchCounts()
    for pred, truth in pairs:
        total = total + match_fields(pred, truth, strict)
    return Metrics.from_counts(total)


# ---------------------------------------------------------------- t-test


@dataclass(frozen=True)
class TTest:
    mean_diff: float
    t: float
    df: int
    p: float
    degenerate: bool = False


def student_t_sf2(t: float, df: int) -> float:
    """Two-tailed P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return float(betainc(df / 2.0, 0.5, x))


def paired_t_test(diffs: Sequence[float]) -> TTest:
    d = np.asarray(diffs, dtype=float)
    n = d.size
    if n < 2:
        raise ValueError("paired_t_test needs at least two differences")
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    # constant series whose mean is not exactly representable leave rounding-level spread
    if sd <= 1e-12 * float(np.abs(d).max()):
        if mean == 0.0:
            return TTest(0.0, 0.0, n - 1, 1.0, degenerate=True)
        return TTest(mean, math.copysign(math.inf, mean), n - 1, 0.0, degenerate=True)
    t = mean / (sd / math.sqrt(n))
    return TTest(mean, t, n - 1, student_t_sf2(t, n - 1))


# ---------------------------------------------------------------- oracles


def _dinkelbach(options: Sequence[Sequence[tuple[int, int]]], n_truth: int, max_iter: int = 100) -> MatchCounts:
    """Pick one (tp, n_pred) option per slot to maximize 2*sum(tp) / (sum(n_pred) + n_truth)."""
    lam = 0.0
    best = None
    for _ in range(max_iter):
        tp = npred = 0
        for opts in options:
            # ties prefer fewer predictions, then more hits
            o = max(opts, key=lambda x: (2 * x[0] - lam * x[1], -x[1], x[0]))
            tp += o[0]
            npred += o[1]
        best = MatchCounts(tp, npred, n_truth)
        denom = npred + n_truth
        new_lam = 2.0 * tp / denom if denom else 1.0
        if abs(new_lam - lam) < 1e-15:
            break
        lam = new_lam
    return best


def oracle_ref_counts(outputs: Sequence[Mapping[str, ParsedReference]], truths: Sequence[ParsedReference]) -> MatchCounts:
    """Best achievable pooled counts when one parser is chosen per reference."""
    options = [[(c.tp, c.n_pred) for c in (match_fields(p, t) for p in out.values())]
               for out, t in zip(outputs, truths)]
    n_truth = sum(match_fields(ParsedReference(), t).n_truth for t in truths)
    return _dinkelbach(options, n_truth)


def oracle_field_counts(outputs: Sequence[Mapping[str, ParsedReference]], truths: Sequence[ParsedReference]) -> MatchCounts:
    """Best achievable pooled counts when one parser is chosen per (reference, type)."""
    options = []
    n_truth = 0
    for out, truth in zip(outputs, truths):
        for ft in FIELD_TYPES:
            counts = [match_type(p, truth, ft) for p in out.values()]
            options.append([(c.tp, c.n_pred) for c in counts])
            n_truth += counts[0].n_truth if counts else 0
    return _dinkelbach(options, n_truth)


def oracle_parser(outputs: Mapping[str, ParsedReference], truth: ParsedReference) -> str:
    """Parser with the highest reference F1; ties go to the smallest id."""
    best, best_f1 = None, -1.0
    for pid in sorted(outputs):
        f1 = reference_f1(outputs[pid], truth)
        if f1 > best_f1:
            best, best_f1 = pid, f1
    return best


# ----------------------------------------------------------------- report


@dataclass
class SystemResult:
    name: str
    metrics: Metrics
    counts: MatchCounts
    per_reference_f1: list[float] = field(repr=False)


@dataclass
class EvalReport:
    systems: dict[str, SystemResult]
    pairwise: dict[tuple[str, str], TTest]

    def to_json(self) -> dict:
        return {
            "n_references": len(next(iter(self.systems.values())).per_reference_f1) if self.systems else 0,
            "systems": {
                name: {**asdict(r.metrics), **asdict(r.counts), "per_reference_f1": r.per_reference_f1}
                for name, r in self.systems.items()
            },
            "pairwise": [
                {"a": a, "b": b, **asdict(tt), "t": _finite_or_str(tt.t)} for (a, b), tt in self.pairwise.items()
            ],
        }

    def dumps(self, include_series: bool = False) -> str:
        doc = self.to_json()
        if not include_series:
            for row in doc["systems"].values():
                row.pop("per_reference_f1")
        return json.dumps(doc, indent=2, allow_nan=False)

    def table(self) -> str:
        lines = [f"{'system':<16}{'P':>8}{'R':>8}{'F1':>8}{'FP rate':>9}{'FN rate':>9}"]
        for name, r in self.systems.items():
            m = r.metrics
            lines.append(f"{name:<16}{m.precision:>8.4f}{m.recall:>8.4f}{m.f1:>8.4f}{m.fp_rate:>9.4f}{m.fn_rate:>9.4f}")
        if self.pairwise:
            lines.append("")
            lines.append(f"{'A':<16}{'B':<16}{'mean dF1':>10}{'t':>10}{'df':>7}{'p':>11}")
            for (a, b), tt in self.pairwise.items():
                flag = " *" if tt.degenerate else ""
                lines.append(f"{a:<16}{b:<16}{tt.mean_diff:>10.4f}{tt.t:>10.3f}{tt.df:>7d}{tt.p:>11.3g}{flag}")
        return "\n".join(lines)


def _finite_or_str(x: float) -> float | str:
    # degenerate zero-variance tests carry t = +-inf, which JSON cannot hold
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def evaluate_outputs(names: Sequence[str], predictions: Mapping[str, Sequence[ParsedReference]],
                     truths: Sequence[ParsedReference],
                     compare: Callable[[str, str], bool] | None = None) -> EvalReport:
    """Score precomputed per-system predictions against aligned truths."""
    systems = {}
    for name in names:
        preds = predictions[name]
        counts = [match_fields(p, t) for p, t in zip(preds, truths)]
        total = MatchCounts()
        for c in counts:
            total = total + c
        systems[name] = SystemResult(name, Metrics.from_counts(total), total, [f1_from_counts(c) for c in counts])
    pairwise = {}
    for a, b in itertools.combinations(names, 2):
        if compare is not None and not compare(a, b):
            continue
        if len(truths) < 2:
            continue
        diffs = np.subtract(systems[a].per_reference_f1, systems[b].per_reference_f1)
        pairwise[(a, b)] = paired_t_test(diffs)
    return EvalReport(systems, pairwise)


def evaluate_systems(test_split: Sequence[LabeledReference],
                     systems: Mapping[str, Callable[[str], ParsedReference]],
                     compare: Callable[[str, str], bool] | None = None) -> EvalReport:
    if not systems:
        raise ValueError("evaluate_systems needs at least one system")
    names = list(systems)
    preds = {name: [fn(r.string) for r in test_split] for name, fn in systems.items()}
    return evaluate_outputs(names, preds, [r.truth for r in test_split], compare)
