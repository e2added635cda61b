"""Cumulative triangle violations against the number of sampled triplets.

Writes one CSV per scorer with columns scorer,triplets_checked,cumulative_violations
so the curves can be overlaid in any plotting tool.

    python scripts/violation_curve.py --n 60 --dim 4 --m 20000 --out curves.csv
"""

import argparse
import csv
import math
import sys

import numpy as np

from metric_audit.axioms import Tolerance, audit_matrix
from metric_audit.core import Dataset, build_score_matrix
from metric_audit.recognition import cosine_scorer, euclidean_scorer, one_shot_scorer, squared_euclidean_scorer
from metric_audit.sampling import sample_triplets


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--m", type=int, default=20000, help="triplets to sample")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="CSV path (default: stdout)")
    args = p.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    x = rng.normal(size=(args.n, args.dim))
    ds = Dataset.from_arrays(x, labels=rng.integers(1, 5, size=args.n))
    scorers = [
        euclidean_scorer(),
        squared_euclidean_scorer(),
        cosine_scorer(),
        one_shot_scorer(rng.normal(size=(20, args.dim))),
    ]
    m = min(args.m, math.comb(args.n, 3))
    plan = sample_triplets(args.n, m, args.seed)

    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["scorer", "triplets_checked", "cumulative_violations"])
    for scorer in scorers:
        matrix = build_score_matrix(scorer, ds, workers=args.workers)
        report = audit_matrix(matrix, ds, plan, Tolerance(), args.seed, workers=args.workers)
        for checked, cum in report.violation_curve:
            w.writerow([scorer.name, checked, cum])
        tri = report.axioms["triangle"]
        print(f"{scorer.name:12s} {str(report.classification):28s} triangle rate {tri.rate:.4f}", file=sys.stderr)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
