"""Command-line entry point: generate, train, recommend, parse, evaluate.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Iterator, Sequence

from . import experiment, meta
from .corpus import (CorpusFormatError, SplitSpec, generate, get_styles, load_jsonl, save_jsonl, split,
                     style_counts)
from .features import ngram_name
from .learn import ForestParams
from .meta import MetaConfig, ModelFormatError, ParsRecModel
from .parserpool import ExternalParserError, ParserPool, builtin_pool, default_configs, external_parser
from .refmodel import ParsedReference

log = logging.getLogger("parsrec")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
MODES = ("ref", "field", "single", "hybrid", "vote")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _writable(path: str) -> Path:
    p = Path(path)
    if not p.parent.exists() or not p.parent.is_dir():
        raise UsageError(f"cannot write {path}: directory {p.parent} does not exist")
    if p.exists() and p.is_dir():
        raise UsageError(f"cannot write {path}: it is a directory")
    return p


def _readable(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _load_corpus(path: str):
    try:
        return load_jsonl(_readable(path))
    except CorpusFormatError as exc:
        raise DataError(str(exc)) from exc


def _load_model(path: str) -> ParsRecModel:
    try:
        return ParsRecModel.load(_readable(path))
    except ModelFormatError as exc:
        raise DataError(str(exc)) from exc


def _build_pool(args) -> ParserPool:
    configs = default_configs()
    if args.parsers:
        wanted = [p.strip() for p in args.parsers.split(",") if p.strip()]
        known = {c.id for c in configs}
        unknown = [p for p in wanted if p not in known]
        if unknown:
            raise UsageError(f"unknown built-in parser(s): {', '.join(unknown)}; known: {', '.join(sorted(known))}")
        configs = [c for c in configs if c.id in wanted]
    extra = []
    for spec in args.external_parser or []:
        pid, sep, command = spec.partition("=")
        if not sep or not pid or not command:
            raise UsageError(f"--external-parser expects id=command, got {spec!r}")
        try:
            extra.append(external_parser(pid, command, args.external_timeout))
        except ExternalParserError as exc:
            raise UsageError(str(exc)) from exc
    try:
        return builtin_pool(configs, extra)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _input_lines(args) -> Iterator[str]:
    if args.string is not None:
        lines = [args.string]
    elif args.input:
        lines = _readable(args.input).read_text(encoding="utf-8").splitlines()
    else:
        lines = (line.rstrip("\n") for line in sys.stdin)
    for n, line in enumerate(lines, 1):
        if not line.strip():
            log.warning("skipping empty input line %d", n)
            continue
        yield line


def _fields_json(p: ParsedReference) -> list[dict]:
    return [{"type": f.ftype.value, "value": f.value} for f in p]


# --------------------------------------------------------------- commands


def cmd_generate(args) -> int:
    out = _writable(args.corpus)
    try:
        styles = get_styles([s.strip() for s in args.styles.split(",")] if args.styles else None)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.n < 0:
        raise UsageError("--n must be >= 0")
    data = generate(args.n, styles, args.seed, args.jitter)
    save_jsonl(data, out)
    counts = style_counts(data)
    if args.format == "json":
        print(json.dumps({"path": str(out), "n": len(data), "styles": counts}))
    else:
        print(f"wrote {len(data)} references to {out}")
        for name, c in counts.items():
            print(f"  {name:<10}{c:>7}")
    return EXIT_OK


def _meta_config(args) -> MetaConfig:
    if args.k_ngrams < 0:
        raise UsageError("--k-ngrams must be >= 0")
    forest = ForestParams(n_trees=args.trees, max_depth=args.max_depth, min_leaf=args.min_leaf,
                          seed=args.seed, n_jobs=args.jobs)
    return MetaConfig(k_ngrams=args.k_ngrams, min_df=args.min_df, forest=forest, ridge_lambda=args.ridge_lambda,
                      logistic_lambda=args.logistic_lambda, label_rule=args.label_rule)


def cmd_train(args) -> int:
    model_path = _writable(args.model)
    config = _meta_config(args)
    corpus = _load_corpus(args.corpus)
    pool = _build_pool(args)
    if len(pool) < 2:
        log.warning("training with a single parser: every recommendation will be that parser")
    try:
        model = experiment.train_on_corpus(corpus, pool, args.seed, config)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    model.save(model_path)

    n_parser, n_meta, n_test = (len(part) for part in split(corpus, SplitSpec(seed=args.seed)))
    degenerate = sorted(f"{pid}|{ft.value}" for (pid, ft), m in model.field.per_pair.items() if m.degenerate)
    summary = {
        "model": str(model_path),
        "split": {"parser_train": n_parser, "meta_train": n_meta, "test": n_test},
        "n_ngrams": len(model.spec.selected_ngrams),
        "top_ngrams": [ngram_name(g) for g in model.spec.selected_ngrams[:10]],
        "best_single": model.best_single,
        "hybrid_table": {ft.value: pid for ft, pid in model.hybrid.items()},
        "degenerate_field_models": degenerate,
    }
    if args.format == "json":
        print(json.dumps(summary, indent=2))
    else:
        print(f"model written to {model_path}")
        print(f"split sizes: parser-train {n_parser}, meta-train {n_meta}, test {n_test}")
        print(f"selected {summary['n_ngrams']} n-gram features; top {len(summary['top_ngrams'])}:")
        for name in summary["top_ngrams"]:
            print(f"  {name}")
        print(f"best single parser: {model.best_single}")
        print("hybrid table: " + ", ".join(f"{k}->{v}" for k, v in summary["hybrid_table"].items()))
        print(f"degenerate field models: {len(degenerate)} of {len(model.field.per_pair)}")
    return EXIT_OK


def cmd_recommend(args) -> int:
    model = _load_model(args.model)
    for s in _input_lines(args):
        ranking = meta.recommend_ref(model.ref, s)
        winners = {ft.value: r[0] for ft, r in meta.recommend_field(model.field, s).items()}
        if args.format == "json":
            print(json.dumps({
                "string": s,
                "ref_ranking": [{"parser": pid, "score": score} for pid, score in ranking],
                "field_winners": {ft: {"parser": pid, "probability": p} for ft, (pid, p) in winners.items()},
            }, ensure_ascii=False))
        else:
            print(s)
            print("  ref ranking:   " + ", ".join(f"{pid} ({score:.3f})" for pid, score in ranking))
            print("  field winners: " + ", ".join(f"{ft}->{pid} ({p:.3f})" for ft, (pid, p) in winners.items()))
    return EXIT_OK


def cmd_parse(args) -> int:
    model = _load_model(args.model)
    pool = _build_pool(args)
    try:
        systems = model.systems(pool, args.vote_threshold, args.fallback)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    name = {"ref": "parsrec_ref", "field": "parsrec_field", "single": "best_single",
            "hybrid": "hybrid", "vote": "voting"}[args.mode]
    for n, s in enumerate(_input_lines(args), 1):
        print(json.dumps({"id": f"line-{n}", "string": s, "fields": _fields_json(systems[name](s))},
                         ensure_ascii=False))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = _load_model(args.model)
    corpus = _load_corpus(args.corpus)
    pool = _build_pool(args)
    seed = args.seed if args.seed is not None else model.train_meta.get("seed")
    if seed is None:
        raise UsageError("--seed is required: the model file does not record its training seed")
    try:
        model.check_pool(pool)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _, _, test = split(corpus, SplitSpec(seed=seed))
    if not test:
        raise DataError("the test split is empty")
    report, diag = experiment.evaluate_model(model, test, pool, args.vote_threshold, args.fallback)
    if args.format == "json":
        doc = json.loads(report.dumps(include_series=args.series))
        doc["seed"] = seed
        doc["oracle"] = {"ref_f1": diag.oracle_ref_f1, "field_f1": diag.oracle_field_f1,
                         "ref_top1_matches_oracle": diag.ref_top1_matches_oracle,
                         "ref_top1_achieves_oracle_f1": diag.ref_top1_achieves_oracle_f1}
        doc["field_winner_share"] = diag.field_winner_share
        print(json.dumps(doc, indent=2, allow_nan=False))
    else:
        print(report.table())
        print()
        print(f"oracle F1 (per reference): {diag.oracle_ref_f1:.4f}")
        print(f"oracle F1 (per field):     {diag.oracle_field_f1:.4f}")
        print(f"ParsRec-Ref top-1 equals oracle parser: {diag.ref_top1_matches_oracle:.1%}")
    return EXIT_OK


# ----------------------------------------------------------------- parser


def _add_pool_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--parsers", help="comma-separated subset of built-in parser ids")
    p.add_argument("--external-parser", action="append", metavar="ID=COMMAND",
                   help="add an external line-protocol parser (repeatable)")
    p.add_argument("--external-timeout", type=float, default=5.0, metavar="SECONDS")


def _add_input_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--string", help="a single reference string (default: read lines from stdin)")
    p.add_argument("--input", help="file with one reference string per line")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="parsrec", description="Meta-learned bibliographic reference parser selection.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic labeled corpus")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--styles", help="comma-separated style names (default: all five)")
    g.add_argument("--jitter", type=float, default=0.1, help="per-record probability of each render glitch")
    g.add_argument("--corpus", required=True, help="output JSONL path")
    g.add_argument("--format", choices=("text", "json"), default="text")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="select features and fit both recommenders and baselines")
    t.add_argument("--corpus", required=True)
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--model", required=True, help="output model path")
    t.add_argument("--k-ngrams", type=int, default=150)
    t.add_argument("--min-df", type=int, default=5)
    t.add_argument("--trees", type=int, default=100)
    t.add_argument("--max-depth", type=int, default=12)
    t.add_argument("--min-leaf", type=int, default=2)
    t.add_argument("--jobs", type=int, default=1, help="threads for forest fitting (output is identical)")
    t.add_argument("--ridge-lambda", type=float, default=1e-6)
    t.add_argument("--logistic-lambda", type=float, default=1e-3)
    t.add_argument("--label-rule", choices=("exact", "overlap"), default="exact")
    t.add_argument("--format", choices=("text", "json"), default="text")
    _add_pool_args(t)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("recommend", help="rank parsers for each input string")
    r.add_argument("--model", required=True)
    r.add_argument("--format", choices=("text", "json"), default="text")
    _add_input_args(r)
    r.set_defaults(func=cmd_recommend)

    p = sub.add_parser("parse", help="parse input strings with a recommender or baseline")
    p.add_argument("--model", required=True)
    p.add_argument("--mode", choices=MODES, default="field")
    p.add_argument("--vote-threshold", type=int, default=3)
    p.add_argument("--fallback", action="store_true", help="field/hybrid: fall through to the next parser")
    _add_input_args(p)
    _add_pool_args(p)
    p.set_defaults(func=cmd_parse)

    e = sub.add_parser("evaluate", help="compare recommenders and baselines on the test split")
    e.add_argument("--model", required=True)
    e.add_argument("--corpus", required=True)
    e.add_argument("--seed", type=int, help="split seed (default: the model's training seed)")
    e.add_argument("--vote-threshold", type=int, default=3)
    e.add_argument("--fallback", action="store_true")
    e.add_argument("--series", action="store_true", help="include per-reference F1 series in JSON")
    e.add_argument("--format", choices=("text", "json"), default="text")
    _add_pool_args(e)
    e.set_defaults(func=cmd_evaluate)
    return ap


def _configure_logging() -> None:
    level = os.environ.get("PARSREC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    if getattr(args, "vote_threshold", 1) < 1:
        print("parsrec: error: --vote-threshold must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"parsrec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, UnicodeDecodeError) as exc:
        print(f"parsrec: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AssertionError, ValueError) as exc:
        log.exception("internal invariant violated")
        print(f"parsrec: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
