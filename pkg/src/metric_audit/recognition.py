"""Recognition pipeline: feature extraction, class models, matching, labeling.

Also hosts the reference scorers used by the audits. Each scorer is a plain
callable on two feature vectors plus a polarity; how a scorer compares a
probe to a multi-exemplar class model is decided by :meth:`Scorer.score`.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import AssumptionBag, Dataset, FeatureVector, Polarity, RawSample, read_dataset
from .errors import (
    ClaimMismatch,
    ConfigError,
    DegenerateModel,
    DegenerateNeighborhood,
    DimensionError,
    TooFewClasses,
    ZeroVector,
)

NON_MATCH = 0


def _vec(x) -> np.ndarray:
    if isinstance(x, (FeatureVector, RawSample)):
        return x.values
    return np.asarray(x, dtype=np.float64).reshape(-1)


def better(a: float, b: float, polarity: Polarity) -> bool:
    """True if score ``a`` is a strictly better match than ``b``."""
    return a > b if polarity == "similarity" else a < b


def passes(score: float, tau: float, polarity: Polarity) -> bool:
    # strict on purpose: a score equal to tau is a non-match
    return better(score, tau, polarity)


@dataclass(frozen=True)
class FeatureExtractor:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    assumptions: AssumptionBag = field(default_factory=AssumptionBag)

    def __call__(self, sample) -> FeatureVector:
        return FeatureVector(self.fn(_vec(sample)))


def identity_extractor() -> FeatureExtractor:
    return FeatureExtractor("identity", lambda v: v)


def linear_extractor(P) -> FeatureExtractor:
    """x = P @ I for a fixed (D, nu) projection matrix P."""
    P = np.asarray(P, dtype=np.float64)
    return FeatureExtractor("linear", lambda v: P @ v, AssumptionBag(rows=P.shape[0], cols=P.shape[1]))


@dataclass(frozen=True)
class ClassModel:
    label: int
    exemplars: np.ndarray
    assumptions: AssumptionBag = field(default_factory=AssumptionBag)
    learned_state: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.label < 1:
            raise ConfigError("class labels must be >= 1 (0 is the non-match label)")
        x = np.array(self.exemplars, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[0] < 1:
            raise ConfigError("a class model needs at least one training vector")
        x.setflags(write=False)
        object.__setattr__(self, "exemplars", x)

    @classmethod
    def fit(cls, label: int, X: Iterable, assumptions: AssumptionBag | None = None) -> "ClassModel":
        x = np.stack([_vec(v) for v in X])
        return cls(label, x, assumptions or AssumptionBag(), {"mean": tuple(x.mean(axis=0).tolist())})


def models_from_dataset(dataset: Dataset, extractor: FeatureExtractor | None = None) -> list[ClassModel]:
    """One model per positive label; samples labeled 0 are skipped."""
    extractor = extractor or identity_extractor()
    groups: dict[int, list[np.ndarray]] = {}
    for s in dataset.samples:
        if s.label != NON_MATCH:
            groups.setdefault(s.label, []).append(extractor(s).values)
    return [ClassModel.fit(c, groups[c]) for c in sorted(groups)]


@dataclass(frozen=True)
class Scorer:
    name: str
    polarity: Polarity
    fn: Callable[[np.ndarray, np.ndarray], float] = field(repr=False)
    assumptions: AssumptionBag = field(default_factory=AssumptionBag)
    dim: int | None = None

    def pair(self, a, b) -> float:
        a, b = _vec(a), _vec(b)
        if a.shape != b.shape:
            raise DimensionError(f"cannot compare vectors of length {a.size} and {b.size}")
        if self.dim is not None and a.size != self.dim:
            raise DimensionError(f"{self.name} expects dimension {self.dim}, got {a.size}")
        return float(self.fn(a, b))

    __call__ = pair

    def score(self, probe, model: ClassModel) -> float:
        """Best score of ``probe`` against any exemplar of ``model`` (nearest-neighbour rule)."""
        scores = [self.pair(probe, x) for x in model.exemplars]
        return max(scores) if self.polarity == "similarity" else min(scores)


@dataclass(frozen=True)
class Labeler:
    """Maps a score set to a ranked label list.

    ``tau`` is the acceptance threshold (pair matching, verification) and the
    rejection threshold for identification and search; ``None`` disables
    rejection. ``polarity``, when set, must agree with the scorer.
    """

    tau: float | None = None
    k: int = 1
    polarity: Polarity | None = None
    assumptions: AssumptionBag = field(default_factory=AssumptionBag)

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")

    def check(self, scorer: Scorer) -> None:
        if self.polarity is not None and self.polarity != scorer.polarity:
            raise ConfigError(f"labeler expects {self.polarity} scores, scorer {scorer.name!r} is {scorer.polarity}")

    def label(self, scores: Mapping[int, float], polarity: Polarity) -> list[int]:
        sign = -1.0 if polarity == "similarity" else 1.0
        ranked = sorted(scores, key=lambda c: (sign * scores[c], c))
        if self.tau is not None:
            ranked = [c for c in ranked if passes(scores[c], self.tau, polarity)]
        return ranked[: self.k] or [NON_MATCH]


@dataclass(frozen=True)
class PairInput:
    """Two feature vectors concatenated end to end."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.size == 0 or v.size % 2:
            raise DimensionError("pair input needs two halves of equal length")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def of(cls, a, b) -> "PairInput":
        a, b = _vec(a), _vec(b)
        if a.size != b.size:
            raise DimensionError("pair halves must share a dimension")
        return cls(np.concatenate([a, b]))

    @property
    def first(self) -> np.ndarray:
        return self.values[: self.values.size // 2]

    @property
    def second(self) -> np.ndarray:
        return self.values[self.values.size // 2:]


# --- recognition modes -----------------------------------------------------


def run_pair_matching(pair: PairInput, scorer: Scorer, labeler: Labeler) -> int:
    """1 if the two halves match, else 0.

    The second half plays the single-exemplar class model, the first the probe.
    """
    if labeler.tau is None or labeler.k != 1:
        raise ConfigError("pair matching needs a threshold tau and k = 1")
    labeler.check(scorer)
    model = ClassModel(1, pair.second[None, :])
    return 1 if passes(scorer.score(pair.first, model), labeler.tau, scorer.polarity) else NON_MATCH


def run_verification(probe, claimed: int, models: Sequence[ClassModel], scorer: Scorer, labeler: Labeler) -> int:
    if not models:
        raise ConfigError("verification needs at least one model of the claimed class")
    if labeler.tau is None:
        raise ConfigError("verification needs a threshold tau")
    labeler.check(scorer)
    for m in models:
        if m.label != claimed:
            raise ClaimMismatch(f"model for class {m.label} supplied for claim {claimed}")
    scores = [scorer.score(probe, m) for m in models]
    best = max(scores) if scorer.polarity == "similarity" else min(scores)
    return claimed if passes(best, labeler.tau, scorer.polarity) else NON_MATCH


def class_scores(probe, models: Sequence[ClassModel], scorer: Scorer) -> dict[int, float]:
    """Best score per class label over all supplied models."""
    out: dict[int, float] = {}
    for m in models:
        s = scorer.score(probe, m)
        if m.label not in out or better(s, out[m.label], scorer.polarity):
            out[m.label] = s
    return out


def run_identification(probe, models: Sequence[ClassModel], scorer: Scorer, labeler: Labeler) -> int:
    if labeler.k != 1:
        raise ConfigError("identification returns a single label; use k = 1")
    labeler.check(scorer)
    scores = class_scores(probe, models, scorer)
    if len(scores) < 2:
        raise TooFewClasses(f"identification needs >= 2 classes, got {len(scores)}")
    return labeler.label(scores, scorer.polarity)[0]


def run_search(probe, models: Sequence[ClassModel], scorer: Scorer, labeler: Labeler) -> list[int]:
    labeler.check(scorer)
    scores = class_scores(probe, models, scorer)
    if labeler.k > len(scores):
        raise ConfigError(f"k = {labeler.k} exceeds the {len(scores)} available classes")
    return labeler.label(scores, scorer.polarity)


@dataclass(frozen=True)
class Recognizer:
    """F, the class models, R and L bundled together."""

    extractor: FeatureExtractor
    models: tuple[ClassModel, ...]
    scorer: Scorer
    labeler: Labeler

    @classmethod
    def from_dataset(cls, gallery: Dataset, scorer: Scorer, labeler: Labeler,
                     extractor: FeatureExtractor | None = None) -> "Recognizer":
        extractor = extractor or identity_extractor()
        return cls(extractor, tuple(models_from_dataset(gallery, extractor)), scorer, labeler)

    def _x(self, sample) -> np.ndarray:
        return self.extractor(sample).values

    def verify(self, sample, claimed: int) -> int:
        models = [m for m in self.models if m.label == claimed]
        if not models:
            raise ClaimMismatch(f"no model for claimed class {claimed}")
        return run_verification(self._x(sample), claimed, models, self.scorer, self.labeler)

    def identify(self, sample) -> int:
        return run_identification(self._x(sample), self.models, self.scorer, self.labeler)

    def search(self, sample) -> list[int]:
        return run_search(self._x(sample), self.models, self.scorer, self.labeler)


# --- reference scorers -----------------------------------------------------


def euclidean_scorer() -> Scorer:
    def fn(a, b):
        d = a - b
        return math.sqrt(d @ d)

    return Scorer("euclidean", "dissimilarity", fn)


def mahalanobis_w_scorer(W, sqrt: bool = False, sigmoid_bias: float | None = None) -> Scorer:
    """Quadratic form d_W(a, b) = (a - b)^T W (a - b) with an unconstrained W.

    W need not be symmetric or positive definite, so scores may be negative.
    ``sqrt=True`` returns the square root (non-finite for negative forms);
    ``sigmoid_bias=b`` wraps the form as sigmoid(b - d_W), a similarity.
    """
    W = np.array(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise DimensionError(f"W must be square, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ConfigError("W must be finite")
    W.setflags(write=False)

    def form(a, b):
        d = a - b
        return float(d @ W @ d)

    params = {"sqrt": int(sqrt)}
    if sigmoid_bias is not None:
        bias = float(sigmoid_bias)
        params["bias"] = bias

        def fn(a, b):
            return 1.0 / (1.0 + math.exp(-(bias - form(a, b))))

        return Scorer("mahalanobis_sigmoid", "similarity", fn, AssumptionBag(params), W.shape[0])
    if sqrt:
        def root(a, b):
            f = form(a, b)
            return math.sqrt(f) if f >= 0 else math.nan

        return Scorer("mahalanobis_sqrt", "dissimilarity", root, AssumptionBag(params), W.shape[0])
    return Scorer("mahalanobis", "dissimilarity", form, AssumptionBag(params), W.shape[0])


def squared_euclidean_scorer() -> Scorer:
    def fn(a, b):
        d = a - b
        return float(d @ d)

    return Scorer("sqeuclidean", "dissimilarity", fn)


def cosine_scorer(A=None) -> Scorer:
    """cos(theta) between A @ x1 and A @ x2 (A defaults to the identity)."""
    if A is not None:
        A = np.array(A, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.all(np.isfinite(A)):
            raise ConfigError("A must be a finite square matrix")
        A.setflags(write=False)

    def fn(x1, x2):
        a = x1 if A is None else A @ x1
        b = x2 if A is None else A @ x2
        # hypot avoids underflow of the squared norm for tiny vectors
        na, nb = math.hypot(*a), math.hypot(*b)
        if na == 0.0 or nb == 0.0:
            raise ZeroVector("cosine is undefined for a zero-norm vector")
        return float((a / na) @ (b / nb))

    return Scorer("cosine", "similarity", fn, dim=None if A is None else A.shape[0])


def one_shot_scorer(negatives) -> Scorer:
    """One-shot similarity against a fixed negative set.

    At score time each half x_i becomes the lone positive of a mean-difference
    linear model w_i = x_i - mu_N with bias b_i = w_i . (x_i + mu_N) / 2. Each
    model scores the other half and the two scores are averaged.
    """
    neg = np.array([_vec(v) for v in negatives], dtype=np.float64)
    if neg.ndim != 2 or len(neg) < 2:
        raise ConfigError("one-shot similarity needs at least 2 negatives")
    mu = neg.mean(axis=0)
    mu.setflags(write=False)

    def model_score(x, probe):
        w = x - mu
        if not np.any(w):
            raise DegenerateModel("positive exemplar coincides with the negative mean")
        return float(w @ probe - w @ (x + mu) / 2)

    def fn(x1, x2):
        return (model_score(x1, x2) + model_score(x2, x1)) / 2

    return Scorer("oss", "similarity", fn, AssumptionBag(negatives=len(neg)), neg.shape[1])


def neighborhood_normalized_scorer(base: Scorer, gallery: Dataset, alpha: float = -math.inf,
                                   beta: float = math.inf) -> Scorer:
    """Z-score a base score by the probe's own score band over a gallery.

    For probe x the band is every base score x -> g (g in the gallery, g != x)
    inside [alpha, beta]; the result is (base(x, y) - mean) / std with the
    population std. The band depends on the probe, so swapping the arguments
    generally changes the score.
    """
    if not alpha < beta:
        raise ConfigError("need alpha < beta")
    if len(gallery) < 3:
        raise ConfigError("neighborhood normalization needs a gallery of >= 3 samples")
    g = gallery.matrix()
    g.setflags(write=False)

    @functools.lru_cache(maxsize=4096)
    def band_stats(key: bytes) -> tuple[float, float]:
        x = np.frombuffer(key, dtype=np.float64)
        others = g[~np.all(g == x, axis=1)]
        s = np.array([base.pair(x, y) for y in others])
        s = s[(s >= alpha) & (s <= beta)]
        if s.size == 0:
            raise DegenerateNeighborhood("no gallery scores inside [alpha, beta]")
        sd = float(s.std())
        if sd == 0.0:
            raise DegenerateNeighborhood("score band has zero spread")
        return float(s.mean()), sd

    def fn(x, y):
        mean, sd = band_stats(np.ascontiguousarray(x, dtype=np.float64).tobytes())
        return (base.pair(x, y) - mean) / sd

    params = AssumptionBag(base=base.name, alpha=alpha, beta=beta, gallery=len(gallery))
    return Scorer(f"normalized_{base.name}", base.polarity, fn, params, gallery.dimension)


# --- scorer selection by spec ---------------------------------------------


def _matrix_param(value) -> np.ndarray:
    if isinstance(value, (str, Path)):
        return np.loadtxt(value, delimiter=",", ndmin=2)
    return np.asarray(value, dtype=np.float64)


def _bound(value, default):
    if value is None:
        return default
    return float(value)


SCORER_NAMES = ("euclidean", "sqeuclidean", "mahalanobis", "cosine", "oss", "normalized")


def scorer_from_spec(spec, dataset: Dataset | None = None) -> Scorer:
    """Build a scorer from a name or a JSON-style dict.

    ``{"scorer": "mahalanobis", "W": [[...]] | "w.csv", "sqrt": false, "bias": null}``,
    ``{"scorer": "cosine", "A": ...}``, ``{"scorer": "oss", "negatives": [[...]] | "neg.csv"}``,
    ``{"scorer": "normalized", "base": <spec>, "gallery": "g.csv", "alpha": .., "beta": ..}``.
    A normalized scorer without a gallery uses ``dataset``.
    """
    if isinstance(spec, str):
        text = spec.strip()
        spec = json.loads(text) if text.startswith("{") else {"scorer": text}
    spec = dict(spec)
    name = spec.get("scorer")
    if name == "euclidean":
        return euclidean_scorer()
    if name == "sqeuclidean":
        return squared_euclidean_scorer()
    if name == "mahalanobis":
        if "W" not in spec:
            raise ConfigError("mahalanobis scorer needs a W matrix")
        return mahalanobis_w_scorer(_matrix_param(spec["W"]), bool(spec.get("sqrt", False)), spec.get("bias"))
    if name == "cosine":
        return cosine_scorer(_matrix_param(spec["A"]) if spec.get("A") is not None else None)
    if name == "oss":
        if "negatives" not in spec:
            raise ConfigError("oss scorer needs negatives")
        return one_shot_scorer(_matrix_param(spec["negatives"]))
    if name == "normalized":
        base = scorer_from_spec(spec.get("base", "euclidean"), dataset)
        gallery = read_dataset(spec["gallery"]) if spec.get("gallery") else dataset
        if gallery is None:
            raise ConfigError("normalized scorer needs a gallery")
        return neighborhood_normalized_scorer(
            base, gallery, _bound(spec.get("alpha"), -math.inf), _bound(spec.get("beta"), math.inf)
        )
    raise ConfigError(f"unknown scorer {name!r}; choose from {', '.join(SCORER_NAMES)}")
