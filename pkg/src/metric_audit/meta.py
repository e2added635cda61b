"""Published accuracy tables and the metric vs non-metric summary."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import ParseError

DATASETS = ("LFW", "Caltech15", "Caltech30")
FLAGS = ("metric", "nonmetric", "nonmetric_sideinfo")
HEADER = ["dataset", "year", "accuracy", "err", "metric", "citation"]

_BUNDLED = {"LFW": "lfw.csv", "Caltech15": "caltech15.csv", "Caltech30": "caltech30.csv"}


@dataclass(frozen=True)
class ResultRecord:
    dataset: str
    year: int
    accuracy: float
    err: float | None
    metric_flag: str
    citation_key: str

    @property
    def is_metric(self) -> bool:
        return self.metric_flag == "metric"


def _parse_row(row: list[str], lineno: int) -> ResultRecord:
    if len(row) != len(HEADER):
        raise ParseError(lineno, f"expected {len(HEADER)} fields, got {len(row)}")
    dataset, year, acc, err, flag, cite = (c.strip() for c in row)
    if dataset not in DATASETS:
        raise ParseError(lineno, f"unknown dataset {dataset!r}")
    if flag not in FLAGS:
        raise ParseError(lineno, f"unknown metric flag {flag!r}")
    try:
        year_i = int(year)
        acc_f = float(acc)
        err_f = float(err) if err else None
    except ValueError as exc:
        raise ParseError(lineno, str(exc)) from None
    if not 1990 <= year_i <= 2030:
        raise ParseError(lineno, f"year {year_i} outside [1990, 2030]")
    if not 0.0 <= acc_f <= 100.0:
        raise ParseError(lineno, f"accuracy {acc_f} outside [0, 100]")
    if err_f is not None and err_f < 0:
        raise ParseError(lineno, f"negative error {err_f}")
    return ResultRecord(dataset, year_i, acc_f, err_f, flag, cite)


def ingest_results(source) -> list[ResultRecord]:
    """Parse a results CSV (path, file object, or CSV text)."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        with open(source, newline="", encoding="utf-8") as fh:
            return ingest_results(fh)
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != HEADER:
        raise ParseError(1, "expected header " + ",".join(HEADER))
    return [_parse_row(row, n) for n, row in enumerate(reader, start=2) if row]


def bundled_results(dataset: str | None = None) -> list[ResultRecord]:
    names = [dataset] if dataset else list(DATASETS)
    out = []
    for name in names:
        if name not in _BUNDLED:
            raise KeyError(f"no bundled table for {name!r}; have {', '.join(DATASETS)}")
        text = resources.files(__package__).joinpath("data", _BUNDLED[name]).read_text(encoding="utf-8")
        out.extend(ingest_results(io.StringIO(text)))
    return out


def summarize(records, dataset: str) -> dict:
    """Best metric vs best non-metric accuracy for one dataset.

    Side-information results count as non-metric for the headline gap but keep
    their own flag in the per-year maxima. A flag group without results is
    reported as ``None``.
    """
    rows = [r for r in records if r.dataset == dataset]
    if not rows:
        raise ValueError(f"no records for dataset {dataset!r}")
    metric = [r.accuracy for r in rows if r.is_metric]
    nonmetric = [r.accuracy for r in rows if not r.is_metric]
    best_metric = max(metric) if metric else None
    best_nonmetric = max(nonmetric) if nonmetric else None
    gap = None
    if best_metric is not None and best_nonmetric is not None:
        gap = round(best_nonmetric - best_metric, 2)

    per_year: dict[tuple[int, str], float] = {}
    for r in rows:
        key = (r.year, r.metric_flag)
        per_year[key] = max(per_year.get(key, r.accuracy), r.accuracy)
    return {
        "dataset": dataset,
        "records": len(rows),
        "best_metric": best_metric,
        "best_nonmetric": best_nonmetric,
        "gap": gap,
        "per_year_max_by_flag": [
            {"year": y, "flag": f, "max_accuracy": per_year[(y, f)]}
            for y, f in sorted(per_year, key=lambda k: (k[0], FLAGS.index(k[1])))
        ],
    }


def write_trend_csv(summary: dict, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["year", "flag", "max_accuracy"])
    for row in summary["per_year_max_by_flag"]:
        w.writerow([row["year"], row["flag"], f"{row['max_accuracy']:.2f}"])
