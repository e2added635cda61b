"""Domain types, dataset I/O, score-matrix construction and the T transform."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Literal, Mapping, Union

import numpy as np

from .errors import DimensionError, NonFiniteScore, ParseError, PolarityError

Polarity = Literal["similarity", "dissimilarity"]
POLARITIES = ("similarity", "dissimilarity")

AssumptionValue = Union[str, int, float]


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class AssumptionBag(Mapping[str, AssumptionValue]):
    """Immutable named parameter set attached to one pipeline stage."""

    def __init__(self, entries: Mapping[str, AssumptionValue] | None = None, **kw: AssumptionValue):
        data = dict(entries or {})
        data.update(kw)
        for key, value in data.items():
            if not isinstance(key, str):
                raise TypeError(f"assumption key must be str, got {key!r}")
            if not isinstance(value, (str, int, float)):
                raise TypeError(f"assumption {key!r} must be str or number, got {type(value).__name__}")
        self._entries = data

    def __getitem__(self, key: str) -> AssumptionValue:
        return self._entries[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __repr__(self) -> str:
        return f"AssumptionBag({self._entries!r})"

    def to_dict(self) -> dict[str, AssumptionValue]:
        return dict(self._entries)


@dataclass(frozen=True)
class RawSample:
    id: int
    label: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.size == 0:
            raise DimensionError(f"sample {self.id} has no values")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"sample {self.id} has non-finite values")
        object.__setattr__(self, "values", _readonly(v))


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.size == 0:
            raise DimensionError("feature vector must have length > 0")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature vector has non-finite entries")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def dim(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class Dataset:
    samples: tuple[RawSample, ...]

    def __post_init__(self):
        samples = tuple(self.samples)
        if not samples:
            raise ValueError("dataset needs at least one sample")
        dims = {s.values.size for s in samples}
        if len(dims) != 1:
            raise DimensionError(f"samples disagree on dimension: {sorted(dims)}")
        ids = [s.id for s in samples]
        if len(set(ids)) != len(ids):
            raise ValueError("sample ids must be unique")
        object.__setattr__(self, "samples", samples)

    @classmethod
    def from_arrays(cls, values, labels=None, ids=None) -> "Dataset":
        x = np.asarray(values, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        n = x.shape[0]
        labels = [1] * n if labels is None else list(labels)
        ids = list(range(n)) if ids is None else list(ids)
        return cls(tuple(RawSample(int(i), int(c), row) for i, c, row in zip(ids, labels, x)))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def dimension(self) -> int:
        return self.samples[0].values.size

    @property
    def ids(self) -> list[int]:
        return [s.id for s in self.samples]

    @property
    def labels(self) -> list[int]:
        return [s.label for s in self.samples]

    def matrix(self) -> np.ndarray:
        return np.stack([s.values for s in self.samples])


@dataclass(frozen=True)
class ScoreMatrix:
    scores: np.ndarray
    polarity: Polarity
    scorer_name: str = "unnamed"

    def __post_init__(self):
        if self.polarity not in POLARITIES:
            raise PolarityError(f"unknown polarity {self.polarity!r}")
        s = np.array(self.scores, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] == 0:
            raise DimensionError(f"score matrix must be square and non-empty, got shape {s.shape}")
        bad = np.argwhere(~np.isfinite(s))
        if bad.size:
            i, j = bad[0]
            raise NonFiniteScore(int(i), int(j), float(s[i, j]))
        object.__setattr__(self, "scores", _readonly(s))

    @property
    def n(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True)
class TransformedMatrix(ScoreMatrix):
    """Dissimilarity matrix T(s) = s_max - s derived from ``base``."""

    base: ScoreMatrix | None = field(default=None, repr=False)
    s_max: float = 0.0


def build_score_matrix(scorer, dataset: Dataset, workers: int = 1) -> ScoreMatrix:
    """Evaluate ``scorer`` on every ordered (probe, reference) pair, diagonal included.

    Rows are distributed across ``workers`` threads; the result does not
    depend on the worker count.
    """
    dim = getattr(scorer, "dim", None)
    if dim is not None and dim != dataset.dimension:
        raise DimensionError(f"scorer {scorer.name!r} expects dimension {dim}, dataset has {dataset.dimension}")
    x = dataset.matrix()
    n = x.shape[0]
    out = np.empty((n, n), dtype=np.float64)

    def fill(i: int) -> None:
        for j in range(n):
            v = float(scorer.pair(x[i], x[j]))
            if not math.isfinite(v):
                raise NonFiniteScore(i, j, v)
            out[i, j] = v

    if workers <= 1:
        for i in range(n):
            fill(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, range(n)))
    return ScoreMatrix(out, scorer.polarity, scorer.name)


def transform_smaller_is_better(matrix: ScoreMatrix, force: bool = False) -> TransformedMatrix:
    """Map similarity scores to dissimilarities with T(s) = s_max - s.

    ``s_max`` is the global maximum of the matrix. Dissimilarity input is
    refused unless ``force`` is set, since T would invert its meaning.
    """
    if matrix.polarity == "dissimilarity" and not force:
        raise PolarityError("matrix already has dissimilarity polarity; pass force=True to transform anyway")
    s_max = float(matrix.scores.max())
    return TransformedMatrix(
        s_max - matrix.scores,
        "dissimilarity",
        matrix.scorer_name,
        base=matrix,
        s_max=s_max,
    )


def as_dissimilarity(matrix: ScoreMatrix) -> ScoreMatrix:
    if matrix.polarity == "dissimilarity":
        return matrix
    return transform_smaller_is_better(matrix)


# --- CSV formats -----------------------------------------------------------


def _open_text(source) -> io.TextIOBase:
    if isinstance(source, (str, Path)):
        return open(source, newline="", encoding="utf-8")
    return source


def read_dataset(source) -> Dataset:
    """Read ``id,label,f0,...`` rows into a :class:`Dataset`."""
    fh = _open_text(source)
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(1, "empty dataset file")
        header = [h.strip() for h in header]
        expected = ["id", "label"] + [f"f{k}" for k in range(len(header) - 2)]
        if len(header) < 3 or header != expected:
            raise ParseError(1, f"expected header id,label,f0,...; got {','.join(header)}")
        samples = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(lineno, f"expected {len(header)} fields, got {len(row)}")
            try:
                samples.append(RawSample(int(row[0]), int(row[1]), [float(c) for c in row[2:]]))
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
        try:
            return Dataset(tuple(samples))
        except ValueError as exc:
            raise ParseError(len(samples) + 1, str(exc)) from None
    finally:
        if fh is not source:
            fh.close()


def write_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label"] + [f"f{k}" for k in range(dataset.dimension)])
        for s in dataset.samples:
            w.writerow([s.id, s.label] + [repr(float(v)) for v in s.values])


def read_score_matrix(source, scorer_name: str = "precomputed") -> ScoreMatrix:
    """Read a precomputed matrix: a ``polarity=...`` line then n rows of n reals."""
    fh = _open_text(source)
    try:
        first = fh.readline().strip().lstrip("#").strip()
        key, _, value = first.partition("=")
        if key.strip() != "polarity" or value.strip() not in POLARITIES:
            raise ParseError(1, "expected 'polarity=<similarity|dissimilarity>'")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rows.append([float(c) for c in line.split(",")])
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
        if not rows or any(len(r) != len(rows) for r in rows):
            raise ParseError(len(rows) + 1, "matrix must be square and non-empty")
        return ScoreMatrix(np.array(rows), value.strip(), scorer_name)
    finally:
        if fh is not source:
            fh.close()


def write_score_matrix(matrix: ScoreMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# polarity={matrix.polarity}\n")
        for row in matrix.scores:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
