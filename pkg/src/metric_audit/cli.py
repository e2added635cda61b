"""Command-line front end: ``metric-audit {audit,classify,recognize,plan,meta}``.

Exit codes: 0 success, 1 violations found under ``--fail-on-violation``,
2 usage error, 3 runtime error (the error class name is printed).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone

from . import __version__
from .axioms import AXIOMS, Tolerance, audit_matrix
from .core import build_score_matrix, read_dataset, read_score_matrix
from .errors import MetricAuditError
from .meta import DATASETS, bundled_results, ingest_results, summarize, write_trend_csv
from .recognition import (
    Labeler,
    PairInput,
    Recognizer,
    run_pair_matching,
    scorer_from_spec,
)
from .sampling import (
    RNG_NAME,
    STRATA,
    enumerate_triplets,
    read_plan_csv,
    sample_triplets,
    stratified_triplets,
    write_plan_csv,
)

SEED_ENV = "METRIC_AUDIT_SEED"
COMMANDS = ("audit", "classify", "recognize", "plan", "meta")


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    matrix: str | None = None
    scorer: str = "euclidean"
    triplets: str = "exhaustive"
    seed: int = 0
    strata: str | None = None
    replace: bool = False
    abs_eps: float = 1e-9
    rel_eps: float = 1e-9
    transform_scope: str = "global"
    bin_width: float = 0.01
    format: str = "json"
    output: str | None = None
    fail_on_violation: bool = False
    curve_csv: str | None = None
    histogram_csv: str | None = None
    violations_csv: str | None = None
    mode: str | None = None
    gallery: str | None = None
    probes: str | None = None
    tau: float | None = None
    k: int = 1
    claim: int | None = None
    n: int | None = None
    import_plan: str | None = None
    dataset: str | None = None
    # runtime only: never written into reports, must not change their bytes
    workers: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("workers")
        return d

    @classmethod
    def from_dict(cls, d: dict, **overrides) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        data = {k: v for k, v in d.items() if k in known}
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


def _readable(path: str) -> str:
    if not os.path.isfile(path) or not os.access(path, os.R_OK):
        raise argparse.ArgumentTypeError(f"cannot read file {path!r}")
    return path


def _triplet_spec(text: str) -> str:
    kind, _, arg = text.partition(":")
    if kind == "exhaustive" and not arg:
        return text
    if kind in ("sample", "stratified"):
        try:
            if int(arg) < 0:
                raise ValueError
        except ValueError:
            raise argparse.ArgumentTypeError(f"{kind} needs a non-negative count, e.g. {kind}:5000") from None
        return text
    if kind == "file" and arg:
        _readable(arg)
        return text
    raise argparse.ArgumentTypeError("expected exhaustive, sample:M, stratified:M or file:PATH")


def _strata(text: str) -> str:
    try:
        parsed = _parse_strata(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if set(parsed) - set(STRATA):
        raise argparse.ArgumentTypeError(f"strata must be among {', '.join(STRATA)}")
    return text


def _parse_strata(text: str) -> dict[str, float]:
    out = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        out[key.strip()] = float(value)
    return out


def _add_common_audit(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", type=_readable, help="dataset CSV (id,label,f0,...)")
    p.add_argument("--matrix", type=_readable, help="precomputed score-matrix CSV")
    p.add_argument("--scorer", default=None, help="scorer name or JSON spec, e.g. '{\"scorer\":\"cosine\"}'")
    p.add_argument("--triplets", type=_triplet_spec, default=None,
                   help="exhaustive | sample:M | stratified:M | file:PATH")
    p.add_argument("--seed", type=int, default=None, help=f"RNG seed (fallback ${SEED_ENV}, then 0)")
    p.add_argument("--strata", type=_strata, default=None,
                   help="proportions, e.g. all_same=0.2,two_same=0.6,all_distinct=0.2")
    p.add_argument("--replace", action="store_true", default=None, help="sample triplets with replacement")
    p.add_argument("--abs-eps", type=float, default=None)
    p.add_argument("--rel-eps", type=float, default=None)
    p.add_argument("--transform-scope", choices=("global", "triplet"), default=None,
                   help="maximum used by T: whole matrix (default) or each triplet")
    p.add_argument("--bin-width", type=float, default=None, help="symmetry histogram bin width")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--output", help="report path (default: stdout)")
    p.add_argument("--fail-on-violation", action="store_true", default=None,
                   help="exit 1 if any axiom violation is found")
    p.add_argument("--curve-csv", help="write the violation curve as CSV")
    p.add_argument("--histogram-csv", help="write the symmetry histogram as CSV")
    p.add_argument("--violations-csv", help="write every violation record as CSV")
    p.add_argument("--replay", type=_readable, help="re-run the config embedded in a previous report")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metric-audit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common_audit(sub.add_parser("audit", help="audit a scorer for the four metric axioms"))
    _add_common_audit(sub.add_parser("classify", help="audit without curve/histogram output"))

    rec = sub.add_parser("recognize", help="run a recognition mode over probe samples")
    rec.add_argument("--mode", required=True, choices=("pair", "verify", "identify", "search"))
    rec.add_argument("--gallery", type=_readable, help="training samples; one class model per label")
    rec.add_argument("--probes", type=_readable, required=True,
                     help="probe CSV (pair mode: features are the two halves concatenated)")
    rec.add_argument("--scorer", default="euclidean")
    rec.add_argument("--tau", type=float)
    rec.add_argument("--k", type=int, default=1)
    rec.add_argument("--claim", type=int, help="claimed class for verify (default: probe label)")
    rec.add_argument("--output")
    rec.add_argument("--workers", type=int, default=1)

    plan = sub.add_parser("plan", help="emit or import a triplet plan CSV")
    plan.add_argument("--n", type=int, help="population size")
    plan.add_argument("--input", type=_readable, help="dataset CSV (sets n and labels)")
    plan.add_argument("--triplets", type=_triplet_spec, default="exhaustive")
    plan.add_argument("--seed", type=int)
    plan.add_argument("--strata", type=_strata)
    plan.add_argument("--replace", action="store_true")
    plan.add_argument("--import", dest="import_plan", type=_readable, help="validate an existing plan CSV")
    plan.add_argument("--output")
    plan.add_argument("--workers", type=int, default=1)

    meta = sub.add_parser("meta", help="summarize published accuracy tables")
    meta.add_argument("--dataset", required=True, choices=DATASETS)
    meta.add_argument("--input", type=_readable, help="results CSV (default: bundled tables)")
    meta.add_argument("--format", choices=("json", "csv"), default="json")
    meta.add_argument("--output")
    meta.add_argument("--workers", type=int, default=1)
    return parser


def _resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    return int(env) if env else 0


def parse_args(argv=None) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    values = {k: v for k, v in vars(ns).items() if v is not None}
    replay = values.pop("replay", None)
    if replay:
        try:
            with open(replay, encoding="utf-8") as fh:
                embedded = json.load(fh)["config"]
        except (ValueError, KeyError) as exc:
            parser.error(f"--replay: no embedded config in {replay!r} ({exc})")
        values.pop("command")
        return RunConfig.from_dict(embedded, **values)
    if "seed" in vars(ns):
        values["seed"] = _resolve_seed(ns.seed)
    config = RunConfig(**values)
    if config.command in ("audit", "classify"):
        if not config.input and not config.matrix:
            parser.error(f"{config.command} needs --input or --matrix")
        if config.matrix and config.triplets.startswith("stratified") and not config.input:
            parser.error("stratified plans need --input for labels")
    if config.command == "recognize" and config.mode != "pair" and not config.gallery:
        parser.error(f"--mode {config.mode} needs --gallery")
    if config.command == "plan" and config.n is None and not config.input:
        parser.error("plan needs --n or --input")
    if config.workers < 1:
        parser.error("--workers must be >= 1")
    return config


# --- execution -------------------------------------------------------------


def _make_plan(config: RunConfig, n: int, labels=None):
    kind, _, arg = config.triplets.partition(":")
    if kind == "exhaustive":
        return enumerate_triplets(n)
    if kind == "sample":
        return sample_triplets(n, int(arg), config.seed, replace=config.replace)
    if kind == "stratified":
        props = _parse_strata(config.strata) if config.strata else None
        return stratified_triplets(labels, int(arg), props, config.seed)
    return read_plan_csv(arg, n)


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(payload: dict) -> str:
    payload["timestamp"] = datetime.now(timezone.utc).isoformat()
    return json.dumps(payload, indent=2) + "\n"


def _write_rows(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _audit(config: RunConfig) -> int:
    dataset = read_dataset(config.input) if config.input else None
    if config.matrix:
        matrix = read_score_matrix(config.matrix)
        scorer_desc = "precomputed"
    else:
        scorer = scorer_from_spec(config.scorer, dataset)
        matrix = build_score_matrix(scorer, dataset, workers=config.workers)
        scorer_desc = scorer.name
    plan = _make_plan(config, matrix.n, dataset.labels if dataset else None)
    full_stream = bool(config.violations_csv)
    report = audit_matrix(
        matrix, dataset, plan, Tolerance(config.abs_eps, config.rel_eps), config.seed,
        workers=config.workers, bin_width=config.bin_width, transform_scope=config.transform_scope,
        sample_limit=None if full_stream else 100,
    )
    report.scorer_name = scorer_desc

    if config.format == "json":
        payload = report.to_dict(include_plots=config.command == "audit")
        payload["rng"] = RNG_NAME
        payload["config"] = config.to_dict()
        _emit(_json(payload), config.output)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["axiom", "checked", "violations", "rate", "ci95_lo", "ci95_hi"])
        for name in AXIOMS:
            r = report.axioms[name]
            w.writerow([name, r.checked_count, r.violation_count, repr(r.rate), *map(repr, r.ci95)])
        w.writerow(["classification", str(report.classification), "", "", "", ""])
        _emit(buf.getvalue(), config.output)

    if config.curve_csv:
        _write_rows(config.curve_csv, ["triplets_checked", "cumulative_violations"], report.violation_curve)
    if config.histogram_csv:
        _write_rows(config.histogram_csv, ["delta_center", "count"],
                    [(repr(c), k) for c, k in report.symmetry_histogram.bins])
    if config.violations_csv:
        _write_rows(config.violations_csv, ["axiom", "indices", "values", "margin"], [
            (r.axiom, " ".join(map(str, r.indices)), " ".join(map(repr, r.values)), repr(r.margin))
            for r in report.all_violations()
        ])

    found = any(report.axioms[a].violation_count for a in AXIOMS)
    return 1 if config.fail_on_violation and found else 0


def _recognize(config: RunConfig) -> int:
    probes = read_dataset(config.probes)
    gallery = read_dataset(config.gallery) if config.gallery else None
    scorer = scorer_from_spec(config.scorer, gallery)
    labeler = Labeler(tau=config.tau, k=config.k)
    results = []
    if config.mode == "pair":
        for s in probes.samples:
            label = run_pair_matching(PairInput(s.values), scorer, labeler)
            results.append({"id": s.id, "truth": s.label, "labels": [label]})
    else:
        rec = Recognizer.from_dataset(gallery, scorer, labeler)
        for s in probes.samples:
            if config.mode == "verify":
                labels = [rec.verify(s, config.claim if config.claim is not None else s.label)]
            elif config.mode == "identify":
                labels = [rec.identify(s)]
            else:
                labels = rec.search(s)
            results.append({"id": s.id, "truth": s.label, "labels": labels})
    correct = sum(r["labels"][0] == r["truth"] for r in results)
    payload = {
        "mode": config.mode,
        "scorer": scorer.name,
        "results": results,
        "top1_agreement": correct / len(results),
        "config": config.to_dict(),
    }
    _emit(_json(payload), config.output)
    return 0


def _plan(config: RunConfig) -> int:
    dataset = read_dataset(config.input) if config.input else None
    n = config.n if config.n is not None else len(dataset)
    if config.import_plan:
        plan = read_plan_csv(config.import_plan, n)
        _emit(json.dumps(plan.describe(), indent=2) + "\n", config.output)
        return 0
    plan = _make_plan(config, n, dataset.labels if dataset else None)
    if config.output:
        write_plan_csv(plan, config.output)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "k"])
        for chunk in plan.chunks():
            w.writerows(chunk.tolist())
        sys.stdout.write(buf.getvalue())
    return 0


def _meta(config: RunConfig) -> int:
    records = ingest_results(config.input) if config.input else bundled_results()
    summary = summarize(records, config.dataset)
    if config.format == "csv":
        buf = io.StringIO()
        write_trend_csv(summary, buf)
        _emit(buf.getvalue(), config.output)
    else:
        summary["config"] = config.to_dict()
        _emit(_json(summary), config.output)
    return 0


def execute(config: RunConfig) -> int:
    handlers = {"audit": _audit, "classify": _audit, "recognize": _recognize, "plan": _plan, "meta": _meta}
    try:
        return handlers[config.command](config)
    except (MetricAuditError, ValueError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def main(argv=None) -> int:
    try:
        config = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return execute(config)


if __name__ == "__main__":
    sys.exit(main())
