"""Cluster-partitioned biometric identification over ECG feature vectors.

The pipeline: preprocess raw enrollments into a standardized gallery,
split the gallery into k-means partitions on disk, route each probe to the
single partition its vector lands in, and match inside that partition with
PRD / cross-correlation confidence scoring.  The kselect and bench modules
provide the evidence (elbow curve, silhouette, timed benchmark) for
choosing the cluster count.
"""

from .bench import (
    BenchReport,
    QueryOutcome,
    TimedIdentification,
    build_decision_table,
    identify_clustered,
    identify_serial,
    make_queries,
    run_bench,
    time_reduction,
    write_query_csv,
)
from .gallery import (
    CSV_HEADER,
    FEATURE_NAMES,
    N_FEATURES,
    DuplicateHeaderError,
    EmptyGalleryError,
    GalleryCsvError,
    HeaderError,
    MalformedRowError,
    NonNumericCellError,
    RawRecord,
    ScalingStats,
    SubjectRecord,
    as_subject_records,
    fill_missing,
    fuse_enrollments,
    gallery_matrix,
    load_gallery_csv,
    load_stats,
    preprocess_gallery,
    round_features,
    save_stats,
    write_gallery_csv,
    zscore_apply,
    zscore_apply_records,
    zscore_fit,
)
from .kmeans import Assignment, ClusterModel, assign, assign_batch, kmeans_fit, ssq
from .kselect import (
    DecisionWeights,
    KDecisionRow,
    decide_k,
    detect_knee,
    elbow_curve,
    read_decision_rows,
    silhouette_avg,
    write_decision_csv,
    write_elbow_csv,
)
from .matcher import MatchResult, MatchThresholds, best_match, cc, confidence, prd
from .partitions import (
    PartitionIndex,
    PartitionIntegrityError,
    load_index,
    load_partition,
    load_serial,
    partition,
    verify_index,
)
from .synth import blob_centers, synth_gallery

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "BenchReport",
    "CSV_HEADER",
    "ClusterModel",
    "DecisionWeights",
    "DuplicateHeaderError",
    "EmptyGalleryError",
    "FEATURE_NAMES",
    "GalleryCsvError",
    "HeaderError",
    "KDecisionRow",
    "MalformedRowError",
    "MatchResult",
    "MatchThresholds",
    "N_FEATURES",
    "NonNumericCellError",
    "PartitionIndex",
    "PartitionIntegrityError",
    "QueryOutcome",
    "RawRecord",
    "ScalingStats",
    "SubjectRecord",
    "TimedIdentification",
    "as_subject_records",
    "assign",
    "assign_batch",
    "best_match",
    "blob_centers",
    "build_decision_table",
    "cc",
    "confidence",
    "decide_k",
    "detect_knee",
    "elbow_curve",
    "fill_missing",
    "fuse_enrollments",
    "gallery_matrix",
    "identify_clustered",
    "identify_serial",
    "kmeans_fit",
    "load_gallery_csv",
    "load_index",
    "load_partition",
    "load_serial",
    "load_stats",
    "make_queries",
    "partition",
    "prd",
    "preprocess_gallery",
    "read_decision_rows",
    "round_features",
    "run_bench",
    "save_stats",
    "silhouette_avg",
    "ssq",
    "synth_gallery",
    "time_reduction",
    "verify_index",
    "write_decision_csv",
    "write_elbow_csv",
    "write_gallery_csv",
    "write_query_csv",
    "zscore_apply",
    "zscore_apply_records",
    "zscore_fit",
]
