"""How many word-class n-grams do the recommenders need?

Trains on one corpus for each k in --ks and reports test micro-F1 of both
recommenders, so the default of 150 can be compared with smaller budgets.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from parsrec import corpus, experiment
from parsrec.meta import MetaConfig
from parsrec.parserpool import builtin_pool


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--ks", type=int, nargs="+", default=[0, 10, 50, 150])
    ap.add_argument("--trees", type=int, default=100)
    args = ap.parse_args(argv)

    pool = builtin_pool()
    data = corpus.generate(args.n, seed=args.seed)
    base = MetaConfig()
    base = replace(base, forest=replace(base.forest, n_trees=args.trees))
    print(f"{'k':>5}{'parsrec_ref':>14}{'parsrec_field':>16}{'top-1 = oracle':>17}{'seconds':>10}")
    for k in args.ks:
        res = experiment.run(data, pool, args.seed, replace(base, k_ngrams=k))
        f = {n: r.metrics.f1 for n, r in res.report.systems.items()}
        print(f"{k:>5}{f['parsrec_ref']:>14.4f}{f['parsrec_field']:>16.4f}"
              f"{res.diagnostics.ref_top1_matches_oracle:>17.3f}{res.seconds:>10.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
