"""Empirical auditing of similarity functions against the metric axioms."""

__version__ = "0.1.0"

from .axioms import (
    AXIOMS,
    AuditReport,
    AxiomResult,
    ClassificationLabel,
    Tolerance,
    ViolationRecord,
    audit_matrix,
    check_identity,
    check_non_negativity,
    check_symmetry,
    check_triangle,
    classify_function,
    run_audit,
)
from .core import (
    AssumptionBag,
    Dataset,
    FeatureVector,
    RawSample,
    ScoreMatrix,
    TransformedMatrix,
    build_score_matrix,
    read_dataset,
    read_score_matrix,
    transform_smaller_is_better,
)
from .recognition import (
    ClassModel,
    Labeler,
    PairInput,
    Recognizer,
    Scorer,
    cosine_scorer,
    euclidean_scorer,
    mahalanobis_w_scorer,
    neighborhood_normalized_scorer,
    one_shot_scorer,
    run_identification,
    run_pair_matching,
    run_search,
    run_verification,
    squared_euclidean_scorer,
)
from .sampling import (
    TripletPlan,
    enumerate_pairs,
    enumerate_triplets,
    sample_triplets,
    stratified_triplets,
)
