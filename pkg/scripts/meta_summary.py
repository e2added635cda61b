"""Best metric vs best non-metric accuracy on the bundled tables.

    python scripts/meta_summary.py --trend-dir trends/
"""

import argparse
from pathlib import Path

from metric_audit.meta import DATASETS, bundled_results, summarize, write_trend_csv


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trend-dir", help="also write <dataset>_trend.csv files here")
    args = p.parse_args(argv)

    records = bundled_results()
    print(f"{'dataset':10s} {'records':>7s} {'metric':>7s} {'nonmetric':>9s} {'gap':>6s}")
    for name in DATASETS:
        s = summarize(records, name)
        print(f"{name:10s} {s['records']:7d} {s['best_metric']:7.2f} {s['best_nonmetric']:9.2f} {s['gap']:6.2f}")
        if args.trend_dir:
            out = Path(args.trend_dir)
            out.mkdir(parents=True, exist_ok=True)
            with open(out / f"{name.lower()}_trend.csv", "w", newline="") as fh:
                write_trend_csv(s, fh)


if __name__ == "__main__":
    main()
