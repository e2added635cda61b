"""Histogram of s(a, b) - s(b, a) for a neighborhood-normalized scorer.

The gallery is a random 1-D point set; the base score is euclidean distance.
Prints the histogram as CSV (delta_center,count) and the off-zero mass.

    python scripts/symmetry_histogram.py --n 40 --bin-width 0.05
"""

import argparse
import csv
import sys

import numpy as np

from metric_audit.axioms import check_symmetry
from metric_audit.core import Dataset, build_score_matrix
from metric_audit.recognition import euclidean_scorer, neighborhood_normalized_scorer


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=float("-inf"))
    p.add_argument("--beta", type=float, default=float("inf"))
    p.add_argument("--bin-width", type=float, default=0.05)
    args = p.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    ds = Dataset.from_arrays(np.sort(rng.exponential(size=args.n)))
    scorer = neighborhood_normalized_scorer(euclidean_scorer(), ds, args.alpha, args.beta)
    matrix = build_score_matrix(scorer, ds)
    result, hist = check_symmetry(matrix, bin_width=args.bin_width)

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["delta_center", "count"])
    for center, count in hist.bins:
        w.writerow([f"{center:.4f}", count])
    total = sum(c for _, c in hist.bins)
    print(f"pairs {total}  violations {result.violation_count}  off-zero count {hist.off_zero_mass}",
          file=sys.stderr)


if __name__ == "__main__":
    main()
