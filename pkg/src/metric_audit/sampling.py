"""Exhaustive and seeded-random pair/triplet plans.

Random plans use numpy's Philox generator (counter-based, 64-bit keyed), so a
plan is fully determined by ``(n, m, seed)`` for a given numpy release.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import EmptyStratum, OverSampled, ParseError, PlanError, TooFewSamples

RNG_NAME = "numpy.Philox"

STRATA = ("all_same", "two_same", "all_distinct")

# Above this fraction of C(n, 3), sample by shuffling the enumeration instead
# of rejecting duplicates.
_SHUFFLE_FRACTION = 0.5
_CHUNK = 65536


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


@dataclass(frozen=True)
class TripletPlan:
    """An ordered collection of index triples (i < j < k) over ``range(n)``.

    Exhaustive plans are generated lazily; random plans hold an ``(m, 3)``
    array.
    """

    mode: str
    n: int
    count: int
    seed: int | None = None
    strata_spec: Mapping[str, float] | None = None
    replace: bool = False
    _triples: np.ndarray | None = field(default=None, repr=False, compare=False)

    def chunks(self, size: int = _CHUNK) -> Iterator[np.ndarray]:
        """Yield the plan in order as int64 arrays of shape (<=size, 3)."""
        if self._triples is not None:
            for start in range(0, len(self._triples), size):
                yield self._triples[start:start + size]
            return
        combos = itertools.combinations(range(self.n), 3)
        while True:
            block = list(itertools.islice(combos, size))
            if not block:
                return
            yield np.array(block, dtype=np.int64)

    def __iter__(self) -> Iterator[tuple[int, int, int]]:
        for chunk in self.chunks():
            for row in chunk:
                yield (int(row[0]), int(row[1]), int(row[2]))

    def __len__(self) -> int:
        return self.count

    def to_array(self) -> np.ndarray:
        if self._triples is not None:
            return self._triples
        return np.concatenate(list(self.chunks())) if self.count else np.empty((0, 3), np.int64)

    def describe(self) -> dict:
        d = {"mode": self.mode, "n": self.n, "count": self.count}
        if self.seed is not None:
            d["seed"] = self.seed
            d["rng"] = RNG_NAME
        if self.replace:
            d["replace"] = True
        if self.strata_spec is not None:
            d["strata"] = {k: self.strata_spec[k] for k in STRATA if k in self.strata_spec}
        return d


def _fixed(mode, n, triples, seed=None, strata=None, replace=False) -> TripletPlan:
    triples = np.ascontiguousarray(triples, dtype=np.int64).reshape(-1, 3)
    triples.setflags(write=False)
    return TripletPlan(mode, n, len(triples), seed, strata, replace, triples)


def enumerate_triplets(n: int) -> TripletPlan:
    if n < 3:
        raise TooFewSamples(f"need at least 3 samples for triplets, got {n}")
    return TripletPlan("exhaustive", n, math.comb(n, 3))


def _draw_ordered_distinct(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    """``size`` uniformly random sorted triples of distinct indices (with replacement across rows)."""
    out = np.empty((0, 3), dtype=np.int64)
    while len(out) < size:
        need = size - len(out)
        raw = rng.integers(0, n, size=(need + need // 2 + 8, 3))
        ok = (raw[:, 0] != raw[:, 1]) & (raw[:, 0] != raw[:, 2]) & (raw[:, 1] != raw[:, 2])
        out = np.concatenate([out, np.sort(raw[ok], axis=1)[:need]])
    return out


def _sample_distinct(rng, n: int, m: int, population: np.ndarray | None = None) -> np.ndarray:
    total = math.comb(n, 3) if population is None else len(population)
    if m == 0:
        return np.empty((0, 3), dtype=np.int64)
    if m > _SHUFFLE_FRACTION * total:
        if population is None:
            population = np.array(list(itertools.combinations(range(n), 3)), dtype=np.int64)
        return population[rng.permutation(total)[:m]]
    seen: set[int] = set()
    rows: list[np.ndarray] = []
    while len(seen) < m:
        if population is None:
            batch = _draw_ordered_distinct(rng, n, m - len(seen))
        else:
            batch = population[rng.integers(0, total, size=m - len(seen))]
        keys = (batch[:, 0] * n + batch[:, 1]) * n + batch[:, 2]
        for key, row in zip(keys.tolist(), batch):
            if key not in seen:
                seen.add(key)
                rows.append(row)
                if len(seen) == m:
                    break
    return np.array(rows, dtype=np.int64)


def sample_triplets(n: int, m: int, seed: int, replace: bool = False) -> TripletPlan:
    """``m`` uniformly random unordered triples from ``range(n)``.

    Without replacement (the default) the triples are distinct and ``m`` may not
    exceed C(n, 3). With ``replace=True`` each triple is an independent uniform
    draw, which permits ``m`` larger than the population.
    """
    if n < 3:
        raise TooFewSamples(f"need at least 3 samples for triplets, got {n}")
    if m < 0:
        raise PlanError("m must be non-negative")
    rng = make_rng(seed)
    if replace:
        triples = _draw_ordered_distinct(rng, n, m)
    else:
        if m > math.comb(n, 3):
            raise OverSampled(f"cannot draw {m} distinct triples from C({n},3) = {math.comb(n, 3)}")
        triples = _sample_distinct(rng, n, m)
    return _fixed("uniform_random", n, triples, seed=seed, replace=replace)


def triple_pattern(la, lb, lc) -> str:
    distinct = len({la, lb, lc})
    return {1: "all_same", 2: "two_same", 3: "all_distinct"}[distinct]


def stratum_sizes(labels: Sequence[int]) -> dict[str, int]:
    """Exact number of triples falling in each label pattern."""
    n = len(labels)
    _, counts = np.unique(np.asarray(labels), return_counts=True)
    all_same = sum(math.comb(int(k), 3) for k in counts)
    two_same = sum(math.comb(int(k), 2) * (n - int(k)) for k in counts)
    return {
        "all_same": all_same,
        "two_same": two_same,
        "all_distinct": math.comb(n, 3) - all_same - two_same,
    }


def largest_remainder(m: int, proportions: Mapping[str, float]) -> dict[str, int]:
    quotas = {k: m * proportions.get(k, 0.0) for k in STRATA}
    counts = {k: math.floor(q) for k, q in quotas.items()}
    short = m - sum(counts.values())
    # ties go to the earlier stratum in STRATA order
    order = sorted(STRATA, key=lambda k: (-(quotas[k] - counts[k]), STRATA.index(k)))
    for k in order[:short]:
        counts[k] += 1
    return counts


def _stratum_population(labels: np.ndarray, pattern: str) -> np.ndarray:
    n = len(labels)
    allt = np.array(list(itertools.combinations(range(n), 3)), dtype=np.int64)
    la, lb, lc = labels[allt[:, 0]], labels[allt[:, 1]], labels[allt[:, 2]]
    ndistinct = 1 + (la != lb).astype(int) + ((lc != la) & (lc != lb)).astype(int)
    want = {"all_same": 1, "two_same": 2, "all_distinct": 3}[pattern]
    return allt[ndistinct == want]


def _sample_stratum_rejection(rng, labels: np.ndarray, pattern: str, k: int) -> np.ndarray:
    n = len(labels)
    want = {"all_same": 1, "two_same": 2, "all_distinct": 3}[pattern]
    seen: set[int] = set()
    rows = []
    while len(rows) < k:
        batch = _draw_ordered_distinct(rng, n, 4 * (k - len(rows)) + 64)
        la, lb, lc = labels[batch[:, 0]], labels[batch[:, 1]], labels[batch[:, 2]]
        nd = 1 + (la != lb).astype(int) + ((lc != la) & (lc != lb)).astype(int)
        for row in batch[nd == want]:
            key = (int(row[0]) * n + int(row[1])) * n + int(row[2])
            if key not in seen:
                seen.add(key)
                rows.append(row)
                if len(rows) == k:
                    break
    return np.array(rows, dtype=np.int64).reshape(-1, 3)


# Strata are enumerated explicitly up to this many total triples.
_ENUMERATE_LIMIT = 2_000_000


def stratified_triplets(
    labels: Sequence[int],
    m: int,
    proportions: Mapping[str, float] | None = None,
    seed: int = 0,
) -> TripletPlan:
    """Sample ``m`` distinct triples split across label-match patterns.

    Patterns are ``all_same`` (one class), ``two_same`` (exactly one
    same-class pair) and ``all_distinct``. Per-stratum counts follow
    largest-remainder rounding of ``m * proportion``; sampling within a
    stratum is uniform without replacement and the final plan is shuffled.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if n < 3:
        raise TooFewSamples(f"need at least 3 samples for triplets, got {n}")
    if proportions is None:
        proportions = {k: 1 / 3 for k in STRATA}
    unknown = set(proportions) - set(STRATA)
    if unknown:
        raise PlanError(f"unknown strata {sorted(unknown)}; expected {STRATA}")
    if any(p < 0 for p in proportions.values()) or not math.isclose(sum(proportions.values()), 1.0, abs_tol=1e-9):
        raise PlanError("stratum proportions must be non-negative and sum to 1")
    sizes = stratum_sizes(labels.tolist())
    for k, p in proportions.items():
        if p > 0 and sizes[k] == 0:
            raise EmptyStratum(f"stratum {k!r} has proportion {p} but no triples in the data")
    counts = largest_remainder(m, proportions)
    for k, c in counts.items():
        if c > sizes[k]:
            raise OverSampled(f"stratum {k!r} needs {c} distinct triples but only has {sizes[k]}")

    rng = make_rng(seed)
    parts = []
    small = math.comb(n, 3) <= _ENUMERATE_LIMIT
    for k in STRATA:
        c = counts[k]
        if c == 0:
            continue
        if small:
            pop = _stratum_population(labels, k)
            parts.append(_sample_distinct(rng, n, c, population=pop))
        else:
            parts.append(_sample_stratum_rejection(rng, labels, k, c))
    triples = np.concatenate(parts) if parts else np.empty((0, 3), dtype=np.int64)
    triples = triples[rng.permutation(len(triples))]
    spec = {k: float(proportions.get(k, 0.0)) for k in STRATA}
    return _fixed("stratified", n, triples, seed=seed, strata=spec)


def enumerate_pairs(n: int, ordered: bool = False) -> Iterator[tuple[int, int]]:
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples for pairs, got {n}")
    if ordered:
        return itertools.permutations(range(n), 2)
    return itertools.combinations(range(n), 2)


def plan_from_triples(n: int, triples) -> TripletPlan:
    """Wrap explicit triples (e.g. from a replayed CSV) as a plan."""
    arr = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if arr.size:
        if arr.min() < 0 or arr.max() >= n:
            raise PlanError(f"triple index out of range for n={n}")
        if np.any((arr[:, 0] == arr[:, 1]) | (arr[:, 0] == arr[:, 2]) | (arr[:, 1] == arr[:, 2])):
            raise PlanError("triples must have three distinct indices")
        arr = np.sort(arr, axis=1)
    return _fixed("explicit", n, arr)


def write_plan_csv(plan: TripletPlan, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "k"])
        for chunk in plan.chunks():
            w.writerows(chunk.tolist())


def read_plan_csv(path, n: int) -> TripletPlan:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["i", "j", "k"]:
            raise ParseError(1, "expected header i,j,k")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                i, j, k = (int(c) for c in row)
            except ValueError:
                raise ParseError(lineno, f"bad triple {row!r}") from None
            rows.append((i, j, k))
    return plan_from_triples(n, rows)
