import itertools
import math
import unicodedata

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parsrec import corpus
from parsrec.evaluation import (EvalReport, MatchCounts, Metrics, corpus_metrics, evaluate_systems, f1_from_counts,
                                match_fields, oracle_field_counts, oracle_parser, oracle_ref_counts, paired_t_test,
                                reference_f1)
from parsrec.refmodel import EMPTY, FIELD_TYPES, ParsedReference

SIX = ParsedReference.of([("author", "A. Smith"), ("source", "J Chem"), ("year", "2005"), ("volume", "17"),
                          ("issue", "6"), ("page", "734–749")])


def test_match_fields_examples():
    assert match_fields(SIX, SIX) == MatchCounts(6, 6, 6)
    wrong_year = ParsedReference.of([(f.ftype, "1999" if f.ftype.value == "year" else f.value) for f in SIX])
    assert match_fields(wrong_year, SIX) == MatchCounts(5, 6, 6)
    assert match_fields(EMPTY, SIX) == MatchCounts(0, 0, 6)


def test_match_is_normalized_unless_strict():
    pred = ParsedReference.of([("page", "734–749."), ("author", "a. smith")])
    truth = ParsedReference.of([("page", "734–749"), ("author", "A. Smith")])
    assert match_fields(pred, truth) == MatchCounts(2, 2, 2)
    assert match_fields(pred, truth, strict=True) == MatchCounts(0, 2, 2)


def test_reference_f1_conventions():
    assert f1_from_counts(MatchCounts(5, 6, 6)) == pytest.approx(0.8333, abs=1e-4)
    assert reference_f1(EMPTY, EMPTY) == 1.0
    assert reference_f1(EMPTY, SIX) == 0.0
    assert reference_f1(SIX, EMPTY) == 0.0
    other = ParsedReference.of([("year", "1900")])
    assert reference_f1(other, SIX) == 0.0


@pytest.mark.parametrize("p, r, f1", [(1 - 0.094, 1 - 0.132, 0.886), (1 - 0.075, 1 - 0.107, 0.909)])
def test_quoted_rates_reproduce_quoted_f1(p, r, f1):
    m = Metrics.from_pr(p, r)
    assert m.f1 == pytest.approx(f1, abs=1e-3)
    assert (m.fp_rate, m.fn_rate) == pytest.approx((1 - p, 1 - r))


def test_quoted_relative_deltas():
    assert (0.909 / 0.886 - 1) * 100 == pytest.approx(2.6, abs=0.1)
    assert (0.094 - 0.075) / 0.094 * 100 == pytest.approx(20.2, abs=0.1)
    assert (0.132 - 0.107) / 0.132 * 100 == pytest.approx(18.9, abs=0.1)


def test_corpus_metrics_perfect_and_empty():
    m = corpus_metrics([(SIX, SIX), (EMPTY, EMPTY)])
    assert (m.precision, m.recall, m.f1, m.fp_rate, m.fn_rate) == (1.0, 1.0, 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        corpus_metrics([])


# ------------------------------------------------ brute-force recount oracle

def _naive_norm(v: str) -> str:
    v = " ".join(unicodedata.normalize("NFC", v).split()).lower()
    prev = None
    while prev != v:
        prev = v
        v = v.strip().strip(".,;:")
    return v


def _naive_counts(pairs):
    tp = n_pred = n_truth = 0
    for pred, truth in pairs:
        pool = [(f.ftype, _naive_norm(f.value)) for f in truth if _naive_norm(f.value)]
        n_truth += len(pool)
        for f in pred:
            key = (f.ftype, _naive_norm(f.value))
            if not key[1]:
                continue
            n_pred += 1
            if key in pool:
                pool.remove(key)
                tp += 1
    return tp, n_pred, n_truth


values = st.sampled_from(["2005", "2005.", " 17", "Smith, A.", "smith, a", "734–749", "J. Chem", ";", "6"])
refs = st.lists(st.tuples(st.sampled_from(FIELD_TYPES), values), max_size=8).map(ParsedReference.of)


@settings(max_examples=300)
@given(st.lists(st.tuples(refs, refs), min_size=1, max_size=50))
def test_corpus_metrics_equals_naive_recount(pairs):
    total = MatchCounts()
    for pred, truth in pairs:
        total = total + match_fields(pred, truth)
    assert (total.tp, total.n_pred, total.n_truth) == _naive_counts(pairs)
    m = corpus_metrics(pairs)
    assert m.fp_rate + m.precision == 1.0 and m.fn_rate + m.recall == 1.0


def test_corpus_metrics_equals_naive_recount_on_generated_data(pool):
    data = corpus.generate(50, seed=13)
    for pid in pool.ids:
        pairs = [(pool.parse(pid, r.string), r.truth) for r in data]
        c = sum((match_fields(p, t) for p, t in pairs), MatchCounts())
        assert (c.tp, c.n_pred, c.n_truth) == _naive_counts(pairs)


@given(refs, refs)
def test_reference_f1_is_symmetric(a, b):
    assert reference_f1(a, b) == reference_f1(b, a)


# --------------------------------------------------------------- t-test

def test_t_test_closed_form_df2():
    tt = paired_t_test([1, 2, 3])
    t = 2 * math.sqrt(3)
    p_closed = 2 * (1 - 0.5 * (1 + t / math.sqrt(2 + t * t)))
    assert tt.t == pytest.approx(3.4641, abs=1e-3)
    assert tt.df == 2
    assert tt.p == pytest.approx(p_closed, abs=1e-12)
    assert tt.p == pytest.approx(0.0742, abs=1e-3)


def test_t_test_degenerate_cases():
    zero = paired_t_test([0, 0, 0])
    assert (zero.p, zero.degenerate) == (1.0, True)
    const = paired_t_test([0.2, 0.2, 0.2])
    assert (const.p, const.degenerate, const.t) == (0.0, True, math.inf)
    with pytest.raises(ValueError):
        paired_t_test([1.0])


diffs = st.lists(st.floats(-1, 1, allow_nan=False), min_size=2, max_size=40).filter(lambda d: np.std(d) > 1e-6)


@given(diffs, st.floats(1e-3, 1e3))
def test_t_test_scale_invariance_and_symmetry(d, c):
    base = paired_t_test(d)
    assert 0.0 <= base.p <= 1.0
    assert paired_t_test([c * x for x in d]).p == pytest.approx(base.p, rel=1e-6, abs=1e-12)
    neg = paired_t_test([-x for x in d])
    assert neg.t == pytest.approx(-base.t)
    assert neg.p == pytest.approx(base.p, rel=1e-9, abs=1e-15)


def test_t_test_matches_closed_form_df1():
    # df = 1 is Cauchy: two-tailed p = 1 - 2 atan(|t|) / pi
    tt = paired_t_test([1.0, 3.0])
    assert tt.p == pytest.approx(1 - 2 * math.atan(abs(tt.t)) / math.pi, abs=1e-12)


# --------------------------------------------------------------- oracles

def _brute_ref(outputs, truths):
    best = -1.0
    for choice in itertools.product(*[sorted(o) for o in outputs]):
        c = sum((match_fields(o[pid], t) for o, pid, t in zip(outputs, choice, truths)), MatchCounts())
        best = max(best, Metrics.from_counts(c).f1)
    return best


def _brute_field(outputs, truths):
    slots = []
    for o, t in zip(outputs, truths):
        for ft in FIELD_TYPES:
            opts = set()
            for pred in o.values():
                sub = ParsedReference(tuple(f for f in pred if f.ftype is ft))
                tsub = ParsedReference(tuple(f for f in t if f.ftype is ft))
                m = match_fields(sub, tsub)
                opts.add((m.tp, m.n_pred))
            slots.append(sorted(opts))
    n_truth = sum(match_fields(EMPTY, t).n_truth for t in truths)
    best = -1.0
    for choice in itertools.product(*slots):
        c = MatchCounts(sum(x[0] for x in choice), sum(x[1] for x in choice), n_truth)
        best = max(best, Metrics.from_counts(c).f1)
    return best


small_refs = st.lists(st.tuples(st.sampled_from(FIELD_TYPES[:3]), st.sampled_from(["1", "2", "3"])),
                      max_size=4).map(ParsedReference.of)
outputs_st = st.lists(st.tuples(st.fixed_dictionaries({"a": small_refs, "b": small_refs, "c": small_refs}),
                                small_refs), min_size=1, max_size=4)


@settings(max_examples=150, deadline=None)
@given(outputs_st)
def test_oracles_match_brute_force(rows):
    outputs = [o for o, _ in rows]
    truths = [t for _, t in rows]
    ref = Metrics.from_counts(oracle_ref_counts(outputs, truths)).f1
    fld = Metrics.from_counts(oracle_field_counts(outputs, truths)).f1
    assert ref == pytest.approx(_brute_ref(outputs, truths), abs=1e-12)
    assert fld == pytest.approx(_brute_field(outputs, truths), abs=1e-12)
    assert fld >= ref - 1e-12
    for pid in ("a", "b", "c"):
        single = corpus_metrics([(o[pid], t) for o, t in zip(outputs, truths)]).f1
        assert ref >= single - 1e-12


def test_oracle_parser_prefers_smallest_id_on_ties():
    out = {"z": SIX, "a": SIX, "m": EMPTY}
    assert oracle_parser(out, SIX) == "a"


# --------------------------------------------------------------- reports

def test_evaluate_systems_examples():
    data = corpus.generate(20, seed=2)
    truth_of = {r.string: r.truth for r in data}
    perfect = {"perfect": truth_of.__getitem__}
    report = evaluate_systems(data, perfect, compare=lambda a, b: True)
    assert report.systems["perfect"].metrics.f1 == 1.0
    assert report.pairwise == {}

    twins = {"a": truth_of.__getitem__, "b": truth_of.__getitem__}
    report = evaluate_systems(data, twins, compare=lambda a, b: True)
    tt = report.pairwise[("a", "b")]
    assert (tt.mean_diff, tt.p, tt.degenerate) == (0.0, 1.0, True)


def test_report_json_handles_infinite_t():
    data = corpus.generate(10, seed=2)
    truth_of = {r.string: r.truth for r in data}
    systems = {"good": truth_of.__getitem__, "bad": lambda s: EMPTY}
    report = evaluate_systems(data, systems, compare=lambda a, b: True)
    doc = report.to_json()
    assert doc["pairwise"][0]["t"] == "inf"
    assert '"per_reference_f1"' not in report.dumps()
    assert '"per_reference_f1"' in report.dumps(include_series=True)
    assert "good" in report.table()
    assert isinstance(report, EvalReport)
