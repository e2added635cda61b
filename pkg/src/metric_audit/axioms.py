"""Empirical checks of the four metric axioms on a score matrix.

Every check works on a dissimilarity matrix (smaller is more similar);
similarity matrices are converted with the T transform before auditing.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import Dataset, ScoreMatrix, build_score_matrix, transform_smaller_is_better
from .errors import DimensionError, IncompleteAudit, PlanError, PolarityError
from .sampling import TripletPlan, enumerate_triplets

AXIOMS = ("non_negativity", "identity", "symmetry", "triangle")
SAMPLE_LIMIT = 100
_Z95 = 1.959963984540054


@dataclass(frozen=True)
class Tolerance:
    abs_eps: float = 1e-9
    rel_eps: float = 1e-9

    def __post_init__(self):
        if self.abs_eps < 0 or self.rel_eps < 0:
            raise ValueError("tolerances must be non-negative")

    def slack(self, a, b):
        return self.abs_eps + self.rel_eps * np.maximum(np.abs(a), np.abs(b))

    def exceeds(self, a, b):
        """True where ``a > b`` by more than the slack."""
        return (np.asarray(a) - np.asarray(b)) > self.slack(a, b)


@dataclass(frozen=True)
class ViolationRecord:
    axiom: str
    indices: tuple[int, ...]
    values: tuple[float, ...]
    margin: float

    def to_dict(self) -> dict:
        return {
            "axiom": self.axiom,
            "indices": list(self.indices),
            "values": [float(v) for v in self.values],
            "margin": float(self.margin),
        }


def wilson_interval(k: int, n: int, z: float = _Z95) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    # clamp so lo <= p <= hi survives rounding at the extremes
    return (max(0.0, min(p, centre - half)), min(1.0, max(p, centre + half)))


@dataclass(frozen=True)
class AxiomResult:
    checked_count: int
    violation_count: int
    sample_violations: tuple[ViolationRecord, ...] = ()
    breakdown: Mapping[str, tuple[int, int]] | None = None

    def __post_init__(self):
        if not 0 <= self.violation_count <= self.checked_count:
            raise ValueError("violation_count must lie in [0, checked_count]")

    @property
    def rate(self) -> float:
        return self.violation_count / self.checked_count if self.checked_count else 0.0

    @property
    def ci95(self) -> tuple[float, float]:
        return wilson_interval(self.violation_count, self.checked_count)

    @property
    def passed(self) -> bool:
        return self.violation_count == 0

    def to_dict(self, limit: int = SAMPLE_LIMIT) -> dict:
        d = {
            "checked": self.checked_count,
            "violations": self.violation_count,
            "rate": self.rate,
            "ci95": list(self.ci95),
            "samples": [r.to_dict() for r in self.sample_violations[:limit]],
        }
        if self.breakdown is not None:
            d["breakdown"] = {k: {"checked": c, "violations": v} for k, (c, v) in self.breakdown.items()}
        return d


@dataclass(frozen=True)
class ClassificationLabel:
    value: str
    failed: tuple[str, ...] = ()

    def __str__(self) -> str:
        if self.value == "nonmetric":
            return "nonmetric{" + ",".join(self.failed) + "}"
        return self.value


@dataclass(frozen=True)
class SymmetryHistogram:
    bin_width: float
    bins: tuple[tuple[float, int], ...]

    @property
    def off_zero_mass(self) -> int:
        return sum(c for centre, c in self.bins if centre != 0.0)

    def to_dict(self) -> dict:
        return {
            "bin_width": self.bin_width,
            "bins": [{"center": c, "count": k} for c, k in self.bins],
        }


def _require_dissimilarity(matrix: ScoreMatrix) -> None:
    if matrix.polarity != "dissimilarity":
        raise PolarityError("axiom checks need a dissimilarity matrix; apply transform_smaller_is_better first")


def _ids(matrix: ScoreMatrix, ids) -> Sequence[int]:
    if ids is None:
        return range(matrix.n)
    if len(ids) != matrix.n:
        raise DimensionError(f"{len(ids)} ids for a {matrix.n}x{matrix.n} matrix")
    return ids


def check_non_negativity(matrix: ScoreMatrix, tol: Tolerance = Tolerance(), ids=None,
                         limit: int | None = SAMPLE_LIMIT) -> AxiomResult:
    _require_dissimilarity(matrix)
    ids = _ids(matrix, ids)
    s = matrix.scores
    bad = tol.exceeds(0.0, s)
    where = np.argwhere(bad)
    recs = tuple(
        ViolationRecord("non_negativity", (ids[i], ids[j]), (float(s[i, j]),), float(-s[i, j]))
        for i, j in where[:limit]
    )
    return AxiomResult(s.size, int(bad.sum()), recs)


def _duplicate_groups(x: np.ndarray) -> np.ndarray:
    """Group id per row; rows share an id iff they are bitwise identical."""
    raw = np.ascontiguousarray(x).view(np.dtype((np.void, x.dtype.itemsize * x.shape[1]))).ravel()
    _, inverse = np.unique(raw, return_inverse=True)
    return inverse.reshape(-1)


def check_identity(matrix: ScoreMatrix, dataset: Dataset | None = None, tol: Tolerance = Tolerance(),
                   limit: int | None = SAMPLE_LIMIT) -> AxiomResult:
    """Identity of indiscernibles, split into two sub-checks.

    ``identity_self``: each diagonal entry must be zero within ``tol``.
    ``identity_distinct``: for each unordered pair of samples whose feature
    vectors differ bitwise, neither direction may score zero within ``tol``.
    Without a dataset every pair counts as distinct.
    """
    _require_dissimilarity(matrix)
    s = matrix.scores
    n = matrix.n
    if dataset is not None and len(dataset) != n:
        raise DimensionError(f"dataset has {len(dataset)} samples, matrix is {n}x{n}")
    ids = dataset.ids if dataset is not None else list(range(n))

    diag = np.diag(s)
    self_bad = tol.exceeds(np.abs(diag), 0.0)
    recs = [
        ViolationRecord("identity_self", (ids[i],), (float(diag[i]),), float(abs(diag[i])))
        for i in np.flatnonzero(self_bad)
    ]

    iu, ju = np.triu_indices(n, k=1)
    if dataset is not None:
        groups = _duplicate_groups(dataset.matrix())
        keep = groups[iu] != groups[ju]
        iu, ju = iu[keep], ju[keep]
    fwd, bwd = s[iu, ju], s[ju, iu]
    zf = ~tol.exceeds(np.abs(fwd), 0.0)
    zb = ~tol.exceeds(np.abs(bwd), 0.0)
    distinct_bad = zf | zb
    tiny = float(np.nextafter(0.0, 1.0))
    for p in np.flatnonzero(distinct_bad):
        i, j = int(iu[p]), int(ju[p])
        v = fwd[p] if zf[p] else bwd[p]
        a, b = (i, j) if zf[p] else (j, i)
        # zero-detection has no natural margin; report the headroom left inside the tolerance
        margin = max(float(tol.slack(v, 0.0) - abs(v)), tiny)
        recs.append(ViolationRecord("identity_distinct", (ids[a], ids[b]), (float(v),), margin))

    n_self, v_self = n, int(self_bad.sum())
    n_dist, v_dist = len(iu), int(distinct_bad.sum())
    if limit is not None:
        recs = recs[:limit]
    return AxiomResult(
        n_self + n_dist,
        v_self + v_dist,
        tuple(recs),
        {"identity_self": (n_self, v_self), "identity_distinct": (n_dist, v_dist)},
    )


def symmetry_deltas(matrix: ScoreMatrix, ordered: bool = False) -> np.ndarray:
    """Delta(i, j) = d(i, j) - d(j, i) over unordered (i < j) or all ordered pairs."""
    s = matrix.scores
    if ordered:
        i, j = np.nonzero(~np.eye(matrix.n, dtype=bool))
    else:
        i, j = np.triu_indices(matrix.n, k=1)
    return s[i, j] - s[j, i]


def symmetry_histogram(deltas: np.ndarray, bin_width: float = 0.01) -> SymmetryHistogram:
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if deltas.size == 0:
        return SymmetryHistogram(bin_width, ())
    idx = np.floor(np.asarray(deltas) / bin_width + 0.5).astype(np.int64)
    keys, counts = np.unique(idx, return_counts=True)
    return SymmetryHistogram(
        bin_width,
        tuple((float(k * bin_width), int(c)) for k, c in zip(keys.tolist(), counts.tolist())),
    )


def check_symmetry(matrix: ScoreMatrix, tol: Tolerance = Tolerance(), bin_width: float = 0.01, ids=None,
                   limit: int | None = SAMPLE_LIMIT) -> tuple[AxiomResult, SymmetryHistogram]:
    ids = _ids(matrix, ids)
    s = matrix.scores
    iu, ju = np.triu_indices(matrix.n, k=1)
    a, b = s[iu, ju], s[ju, iu]
    delta = a - b
    bad = np.abs(delta) > tol.slack(a, b)
    recs = tuple(
        ViolationRecord("symmetry", (ids[iu[p]], ids[ju[p]]), (float(a[p]), float(b[p])), float(abs(delta[p])))
        for p in np.flatnonzero(bad)[:limit]
    )
    return AxiomResult(len(delta), int(bad.sum()), recs), symmetry_histogram(delta, bin_width)


def is_symmetric(matrix: ScoreMatrix, tol: Tolerance = Tolerance()) -> bool:
    s = matrix.scores
    return bool(np.all(np.abs(s - s.T) <= tol.slack(s, s.T)))


# (x, y, z) positions inside a triple; each row encodes d(x,z) <= d(x,y) + d(y,z)
_SYMMETRIC_ASSIGNMENTS = np.array([(0, 1, 2), (0, 2, 1), (1, 0, 2)])
_ORDERED_ASSIGNMENTS = np.array(list(itertools.permutations(range(3))))


def _triangle_chunk(s, triples, tol, assignments, local_transform):
    sub = s[triples[:, :, None], triples[:, None, :]]  # (k, 3, 3)
    if local_transform:
        sub = sub.max(axis=(1, 2))[:, None, None] - sub
    x, y, z = assignments[:, 0], assignments[:, 1], assignments[:, 2]
    lhs = sub[:, x, z]
    rhs = sub[:, x, y] + sub[:, y, z]
    bad = tol.exceeds(lhs, rhs)
    return bad, lhs, sub[:, x, y], sub[:, y, z]


def curve_checkpoints(total: int) -> list[int]:
    points, p = [], 10
    while p < total:
        points.append(p)
        p *= 10
    if total > 0:
        points.append(total)
    return points


def scan_triangle(matrix: ScoreMatrix, plan: TripletPlan, tol: Tolerance = Tolerance(), ids=None,
                  limit: int | None = SAMPLE_LIMIT, workers: int = 1, local_transform: bool = False,
                  symmetric: bool | None = None) -> tuple[AxiomResult, list[tuple[int, int]]]:
    """Triangle check plus the cumulative violation curve in plan order.

    With ``local_transform`` the matrix must hold similarity scores and each
    triple is converted with its own maximum (per-triplet T) instead of the
    global one.
    """
    if local_transform:
        if matrix.polarity != "similarity":
            raise PolarityError("per-triplet transform needs a similarity matrix")
    else:
        _require_dissimilarity(matrix)
    ids = _ids(matrix, ids)
    if plan.n > matrix.n:
        raise PlanError(f"plan over {plan.n} samples, matrix has {matrix.n}")
    if symmetric is None:
        symmetric = is_symmetric(matrix, tol)
    assignments = _SYMMETRIC_ASSIGNMENTS if symmetric else _ORDERED_ASSIGNMENTS
    s = matrix.scores

    def work(triples):
        if triples.size and (triples.min() < 0 or triples.max() >= matrix.n):
            raise PlanError("triple index out of range")
        bad, lhs, xy, yz = _triangle_chunk(s, triples, tol, assignments, local_transform)
        return triples, bad, lhs, xy, yz

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, plan.chunks()))
    else:
        parts = [work(c) for c in plan.chunks()]

    checkpoints = curve_checkpoints(plan.count)
    curve: list[tuple[int, int]] = []
    recs: list[ViolationRecord] = []
    done = violations = checked = 0
    cp = 0
    for triples, bad, lhs, xy, yz in parts:
        per_triple = bad.sum(axis=1)
        cum = np.cumsum(per_triple) + violations
        while cp < len(checkpoints) and checkpoints[cp] <= done + len(triples):
            curve.append((checkpoints[cp], int(cum[checkpoints[cp] - done - 1])))
            cp += 1
        if limit is None or len(recs) < limit:
            for t, a in np.argwhere(bad):
                if limit is not None and len(recs) >= limit:
                    break
                px, py, pz = assignments[a]
                tri = triples[t]
                recs.append(ViolationRecord(
                    "triangle",
                    (ids[tri[px]], ids[tri[py]], ids[tri[pz]]),
                    (float(lhs[t, a]), float(xy[t, a]), float(yz[t, a])),
                    float(lhs[t, a] - (xy[t, a] + yz[t, a])),
                ))
        violations += int(per_triple.sum())
        checked += bad.size
        done += len(triples)
    return AxiomResult(checked, violations, tuple(recs)), curve


def check_triangle(matrix: ScoreMatrix, plan: TripletPlan, tol: Tolerance = Tolerance(), ids=None,
                   limit: int | None = SAMPLE_LIMIT, workers: int = 1) -> AxiomResult:
    """Check d(x,z) <= d(x,y) + d(y,z) over every triple in ``plan``.

    A symmetric matrix gets the three middle-point inequalities per triple,
    an asymmetric one all six orderings. ``checked_count`` counts
    inequalities, and a violation's margin is d(x,z) - (d(x,y) + d(y,z)).
    """
    return scan_triangle(matrix, plan, tol, ids, limit, workers)[0]


def classify_function(results: Mapping[str, AxiomResult]) -> ClassificationLabel:
    missing = [a for a in AXIOMS if a not in results]
    if missing:
        raise IncompleteAudit(f"missing axiom results: {missing}")
    failed = tuple(a for a in AXIOMS if not results[a].passed)
    if not failed:
        return ClassificationLabel("metric")
    if len(failed) == 1:
        relaxed = {"triangle": "semimetric", "symmetry": "quasimetric", "identity": "pseudometric"}
        if failed[0] in relaxed:
            return ClassificationLabel(relaxed[failed[0]], failed)
    return ClassificationLabel("nonmetric", failed)


@dataclass
class AuditReport:
    scorer_name: str
    n: int
    tolerance: Tolerance
    seed: int | None
    plan: dict
    axioms: dict[str, AxiomResult]
    classification: ClassificationLabel
    transform: dict
    symmetry_histogram: SymmetryHistogram | None = None
    violation_curve: list[tuple[int, int]] | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self, include_plots: bool = True) -> dict:
        d = {
            "scorer": self.scorer_name,
            "n": self.n,
            "seed": self.seed,
            "tolerance": {"abs_eps": self.tolerance.abs_eps, "rel_eps": self.tolerance.rel_eps},
            "plan": self.plan,
            "transform": self.transform,
            "axioms": {name: self.axioms[name].to_dict() for name in AXIOMS},
            "classification": self.classification.value,
            "failed_axioms": list(self.classification.failed),
        }
        if include_plots:
            if self.symmetry_histogram is not None:
                d["symmetry_histogram"] = self.symmetry_histogram.to_dict()
            if self.violation_curve is not None:
                d["violation_curve"] = [list(p) for p in self.violation_curve]
        d.update(self.extra)
        return d

    def all_violations(self) -> list[ViolationRecord]:
        return [r for name in AXIOMS for r in self.axioms[name].sample_violations]


def audit_matrix(matrix: ScoreMatrix, dataset: Dataset | None = None, plan: TripletPlan | None = None,
                 tol: Tolerance = Tolerance(), seed: int | None = None, *, workers: int = 1,
                 bin_width: float = 0.01, transform_scope: str = "global",
                 sample_limit: int | None = SAMPLE_LIMIT) -> AuditReport:
    """Run all four checks on a raw matrix and classify the function behind it."""
    if transform_scope not in ("global", "triplet"):
        raise ValueError("transform_scope must be 'global' or 'triplet'")
    ids = dataset.ids if dataset is not None else None
    if matrix.polarity == "similarity":
        d = transform_smaller_is_better(matrix)
        transform = {"applied": True, "scope": transform_scope, "s_max": d.s_max}
    else:
        d = matrix
        transform = {"applied": False}
    if plan is None:
        plan = enumerate_triplets(matrix.n)

    nonneg = check_non_negativity(d, tol, ids, sample_limit)
    ident = check_identity(d, dataset, tol, sample_limit)
    sym, hist = check_symmetry(d, tol, bin_width, ids, sample_limit)
    local = matrix.polarity == "similarity" and transform_scope == "triplet"
    tri, curve = scan_triangle(
        matrix if local else d, plan, tol, ids, sample_limit, workers,
        local_transform=local, symmetric=sym.passed,
    )
    results = {"non_negativity": nonneg, "identity": ident, "symmetry": sym, "triangle": tri}
    return AuditReport(
        scorer_name=matrix.scorer_name,
        n=matrix.n,
        tolerance=tol,
        seed=seed,
        plan=plan.describe(),
        axioms=results,
        classification=classify_function(results),
        transform=transform,
        symmetry_histogram=hist,
        violation_curve=curve,
    )


def run_audit(scorer, dataset: Dataset, plan: TripletPlan | None = None, tol: Tolerance = Tolerance(),
              seed: int | None = None, **kw) -> AuditReport:
    workers = kw.get("workers", 1)
    matrix = build_score_matrix(scorer, dataset, workers=workers)
    return audit_matrix(matrix, dataset, plan, tol, seed, **kw)
