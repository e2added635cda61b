import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from metric_audit.core import (
    AssumptionBag,
    Dataset,
    FeatureVector,
    RawSample,
    ScoreMatrix,
    build_score_matrix,
    read_dataset,
    read_score_matrix,
    transform_smaller_is_better,
    write_dataset,
    write_score_matrix,
)
from metric_audit.errors import DimensionError, NonFiniteScore, ParseError, PolarityError
from metric_audit.recognition import (
    Scorer,
    cosine_scorer,
    euclidean_scorer,
    neighborhood_normalized_scorer,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_euclidean_matrix_two_points():
    m = build_score_matrix(euclidean_scorer(), Dataset.from_arrays([0.0, 3.0]))
    np.testing.assert_array_equal(m.scores, [[0, 3], [3, 0]])
    assert m.polarity == "dissimilarity"


def test_single_sample_matrix_holds_self_score():
    m = build_score_matrix(cosine_scorer(), Dataset.from_arrays([[1.0, 2.0]]))
    assert m.scores.shape == (1, 1)
    assert m.scores[0, 0] == pytest.approx(1.0)


def test_normalized_scorer_entries_are_asymmetric(line4):
    m = build_score_matrix(neighborhood_normalized_scorer(euclidean_scorer(), line4), line4)
    assert m.scores[0, 1] == pytest.approx(-1.298, abs=1e-3)
    assert m.scores[1, 0] == pytest.approx(-1.225, abs=1e-3)


def test_non_finite_score_reports_position():
    bad = Scorer("bad", "dissimilarity", lambda a, b: math.inf if a[0] > b[0] else 0.0)
    with pytest.raises(NonFiniteScore) as exc:
        build_score_matrix(bad, Dataset.from_arrays([0.0, 1.0]))
    assert (exc.value.i, exc.value.j) == (1, 0)


def test_scorer_dimension_mismatch():
    s = Scorer("fixed", "dissimilarity", lambda a, b: 0.0, dim=3)
    with pytest.raises(DimensionError):
        build_score_matrix(s, Dataset.from_arrays([[0.0, 1.0]]))


def test_matrix_is_deterministic_and_worker_independent(points20):
    s = cosine_scorer()
    a = build_score_matrix(s, points20)
    b = build_score_matrix(s, points20, workers=8)
    assert a.scores.tobytes() == b.scores.tobytes()


def test_transform_examples():
    t = transform_smaller_is_better(ScoreMatrix(np.array([[3.0, 1.0], [2.0, 3.0]]), "similarity"))
    np.testing.assert_array_equal(t.scores, [[0, 2], [1, 0]])
    assert t.s_max == 3.0 and t.polarity == "dissimilarity"

    const = transform_smaller_is_better(ScoreMatrix(np.full((3, 3), 7.5), "similarity"))
    assert not const.scores.any()


def test_transform_refuses_dissimilarity_without_force():
    m = ScoreMatrix(np.eye(2), "dissimilarity")
    with pytest.raises(PolarityError):
        transform_smaller_is_better(m)
    assert transform_smaller_is_better(m, force=True).s_max == 1.0


square = st.integers(1, 6).map(lambda k: (k, k))


# integer-valued scores keep s_max - s exact, so strict order reversal is checkable
@given(arrays(np.float64, square, elements=st.integers(-10**6, 10**6).map(float)))
def test_transform_properties(s):
    m = ScoreMatrix(s, "similarity")
    t = transform_smaller_is_better(m)
    assert t.scores.min() == 0
    assert np.all(t.scores >= 0)
    np.testing.assert_array_equal(t.scores == 0, s == s.max())
    a, b = s.ravel()[:, None], s.ravel()[None, :]
    ta, tb = t.scores.ravel()[:, None], t.scores.ravel()[None, :]
    np.testing.assert_array_equal(a < b, ta > tb)
    np.testing.assert_array_equal(a == b, ta == tb)
    # applying T twice restores the original ordering
    tt = transform_smaller_is_better(t, force=True).scores.ravel()
    np.testing.assert_array_equal(np.argsort(tt, kind="stable"), np.argsort(s.ravel(), kind="stable"))


@given(arrays(np.float64, square, elements=finite))
def test_transform_weakly_reverses_arbitrary_floats(s):
    t = transform_smaller_is_better(ScoreMatrix(s, "similarity")).scores.ravel()
    a = s.ravel()
    assert t.min() == 0 and np.all(t >= 0)
    order = np.argsort(a, kind="stable")
    assert np.all(np.diff(t[order]) <= 0)


def test_score_matrix_is_immutable():
    m = ScoreMatrix(np.zeros((2, 2)), "dissimilarity")
    with pytest.raises(ValueError):
        m.scores[0, 0] = 1.0


def test_invalid_types():
    with pytest.raises(DimensionError):
        FeatureVector([])
    with pytest.raises(ValueError):
        RawSample(0, 1, [math.nan])
    with pytest.raises(ValueError):
        Dataset((RawSample(0, 1, [1.0]), RawSample(0, 1, [2.0])))
    with pytest.raises(DimensionError):
        Dataset((RawSample(0, 1, [1.0]), RawSample(1, 1, [2.0, 3.0])))
    with pytest.raises(NonFiniteScore):
        ScoreMatrix(np.array([[0.0, math.nan], [0.0, 0.0]]), "dissimilarity")
    with pytest.raises(DimensionError):
        ScoreMatrix(np.zeros((2, 3)), "dissimilarity")


def test_assumption_bag():
    bag = AssumptionBag({"tau": 0.5}, k=2, name="x")
    assert dict(bag) == {"tau": 0.5, "k": 2, "name": "x"}
    with pytest.raises(TypeError):
        AssumptionBag(bad=[1, 2])


def test_dataset_csv_roundtrip(tmp_path, points20):
    path = tmp_path / "d.csv"
    write_dataset(points20, path)
    back = read_dataset(path)
    assert back.ids == points20.ids and back.labels == points20.labels
    assert back.matrix().tobytes() == points20.matrix().tobytes()


def test_dataset_csv_errors():
    with pytest.raises(ParseError):
        read_dataset(io.StringIO("id,label,x0\n0,1,2\n"))
    with pytest.raises(ParseError) as exc:
        read_dataset(io.StringIO("id,label,f0\n0,1,2\n1,1,oops\n"))
    assert exc.value.line == 3


def test_matrix_csv_roundtrip(tmp_path):
    m = ScoreMatrix(np.array([[0.0, 0.1], [1 / 3, 0.0]]), "similarity")
    path = tmp_path / "m.csv"
    write_score_matrix(m, path)
    assert path.read_text().startswith("# polarity=similarity\n")
    back = read_score_matrix(path)
    assert back.polarity == "similarity"
    assert back.scores.tobytes() == m.scores.tobytes()
    plain = read_score_matrix(io.StringIO("polarity=dissimilarity\n0,1\n1,0\n"))
    assert plain.n == 2
    with pytest.raises(ParseError):
        read_score_matrix(io.StringIO("polarity=dissimilarity\n0,1\n1\n"))
