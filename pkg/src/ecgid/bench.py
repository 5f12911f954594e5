"""Timed clustered-vs-serial identification and the decision table.

The benchmark answers one question per cluster count: how much scan time
does partition routing save, and does it ever change the answer?  For each
query the clustered path is timed first (read the one partition file the
query's vector lands in, scan it), then the serial path (read the whole
gallery, scan everything).  Routing the query to its partition happens
*outside* the timed region — the cost under study is the scan, not the
centroid lookup.  In-memory mode preloads all records once and times only
the scans, isolating the algorithmic saving from file-system noise.

Timing uses the monotonic perf counter; each path gets one untimed warm-up
per query and the reported nanoseconds are the median over ``repeats``
timed runs.  Runs execute strictly sequentially on the calling thread —
the two paths are never interleaved inside a timed section.
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass
from pathlib import Path
from time import perf_counter_ns
from typing import Callable, Iterable, Sequence

import numpy as np

from .gallery import N_FEATURES, SubjectRecord
from .kmeans import (
    DEFAULT_MAX_ITER,
    DEFAULT_N_INIT,
    DEFAULT_TOL,
    assign,
    kmeans_fit,
)
from .kselect import DecisionWeights, KDecisionRow, decide_k, silhouette_avg
from .matcher import MatchThresholds, best_match
from .partitions import PartitionIndex, load_partition, load_serial, partition
from .synth import normalize_seed

DEFAULT_REPEATS = 5

QUERY_CSV_HEADER = (
    "query_id",
    "truth_id",
    "k",
    "t_serial_ns",
    "t_cluster_ns",
    "reduction_pct",
    "serial_hit",
    "cluster_hit",
)


@dataclass(frozen=True)
class TimedIdentification:
    """One identification run: who matched and how long the scan took."""

    hit_id: str | None
    elapsed_ns: int
    path: str  # "clustered" or "serial"
    cluster_label: int | None = None


@dataclass(frozen=True)
class QueryOutcome:
    """Median-timed result of one query on both paths."""

    truth_id: str
    t_serial_ns: float
    t_cluster_ns: float
    reduction_pct: float
    serial_hit: str | None
    clustered_hit: str | None
    cluster_label: int


@dataclass(frozen=True)
class BenchReport:
    """Aggregate benchmark outcome for one cluster count.

    ``t_avg_pct`` is the mean of the per-query reductions (mean of ratios);
    ``aggregate_reduction_pct`` compares summed totals instead and is kept
    only as a debugging view — the two disagree whenever per-query times
    vary, and the per-query mean is the one the decision table uses.
    """

    k: int
    rows: tuple[QueryOutcome, ...]
    t_avg_pct: float
    accuracy_pct: float
    aggregate_reduction_pct: float


def time_reduction(t_serial_ns: float, t_cluster_ns: float) -> float:
    """Percentage scan-time saving of the clustered path for one query."""
    if t_serial_ns <= 0:
        raise ValueError("serial time must be positive")
    return (t_serial_ns - t_cluster_ns) / t_serial_ns * 100.0


def identify_clustered(
    query: np.ndarray,
    index: PartitionIndex,
    thresholds: MatchThresholds = MatchThresholds(),
    *,
    partitions: Sequence[Sequence[SubjectRecord]] | None = None,
) -> TimedIdentification:
    """Route a query to its partition and scan only that partition.

    With ``partitions`` preloaded (in-memory mode) the timed region is the
    scan alone; otherwise it covers reading the partition file plus the
    scan.  Routing is always outside the timer.
    """
    label = assign(query, index.model)
    if partitions is None:
        start = perf_counter_ns()
        records = load_partition(index, label)
        result = best_match(query, records, thresholds)
        elapsed = perf_counter_ns() - start
    else:
        records = partitions[label]
        start = perf_counter_ns()
        result = best_match(query, records, thresholds)
        elapsed = perf_counter_ns() - start
    return TimedIdentification(result.hit_id, elapsed, "clustered", label)


def identify_serial(
    query: np.ndarray,
    gallery_path: str | Path,
    thresholds: MatchThresholds = MatchThresholds(),
    *,
    records: Sequence[SubjectRecord] | None = None,
) -> TimedIdentification:
    """Scan the entire gallery for a query (the unpartitioned baseline)."""
    if records is None:
        start = perf_counter_ns()
        loaded = load_serial(gallery_path)
        result = best_match(query, loaded, thresholds)
        elapsed = perf_counter_ns() - start
    else:
        start = perf_counter_ns()
        result = best_match(query, records, thresholds)
        elapsed = perf_counter_ns() - start
    return TimedIdentification(result.hit_id, elapsed, "serial", None)


def make_queries(
    gallery: Sequence[SubjectRecord],
    n_queries: int,
    noise_sigma: float,
    seed: int,
) -> list[tuple[str, np.ndarray]]:
    """Sample distinct gallery subjects and perturb their vectors.

    Returns (truth id, query vector) pairs.  ``noise_sigma == 0`` yields
    exact copies of the enrolled vectors.
    """
    if n_queries < 1:
        raise ValueError("n_queries must be positive")
    if n_queries > len(gallery):
        raise ValueError(
            f"cannot draw {n_queries} distinct subjects from a gallery "
            f"of {len(gallery)}"
        )
    if noise_sigma < 0.0:
        raise ValueError("noise_sigma must be non-negative")
    rng = np.random.default_rng(normalize_seed(seed))
    chosen = rng.choice(len(gallery), size=n_queries, replace=False)
    if noise_sigma > 0.0:
        noise = rng.normal(0.0, noise_sigma, size=(n_queries, N_FEATURES))
    else:
        noise = np.zeros((n_queries, N_FEATURES))
    return [
        (gallery[int(i)].subject_id, gallery[int(i)].vector + noise[j])
        for j, i in enumerate(chosen)
    ]


def run_bench(
    gallery_path: str | Path,
    index: PartitionIndex,
    queries: Sequence[tuple[str, np.ndarray]],
    thresholds: MatchThresholds = MatchThresholds(),
    *,
    repeats: int = DEFAULT_REPEATS,
    in_memory: bool = False,
) -> BenchReport:
    """Time every query on the clustered and serial paths and aggregate.

    Per query and path: one untimed warm-up, then ``repeats`` timed runs
    whose median is the reported time.  Accuracy counts clustered hits
    that equal the query's truth id.
    """
    if not queries:
        raise ValueError("queries must be non-empty")
    if repeats < 1:
        raise ValueError("repeats must be positive")
    preloaded_serial: list[SubjectRecord] | None = None
    preloaded_parts: list[list[SubjectRecord]] | None = None
    if in_memory:
        preloaded_serial = load_serial(gallery_path)
        preloaded_parts = [
            load_partition(index, label) for label in range(index.k)
        ]

    rows: list[QueryOutcome] = []
    for truth_id, qvec in queries:
        identify_clustered(
            qvec, index, thresholds, partitions=preloaded_parts
        )
        clustered = [
            identify_clustered(
                qvec, index, thresholds, partitions=preloaded_parts
            )
            for _ in range(repeats)
        ]
        identify_serial(
            qvec, gallery_path, thresholds, records=preloaded_serial
        )
        serial = [
            identify_serial(
                qvec, gallery_path, thresholds, records=preloaded_serial
            )
            for _ in range(repeats)
        ]
        t_cluster = float(statistics.median(r.elapsed_ns for r in clustered))
        t_serial = float(statistics.median(r.elapsed_ns for r in serial))
        rows.append(
            QueryOutcome(
                truth_id=truth_id,
                t_serial_ns=t_serial,
                t_cluster_ns=t_cluster,
                reduction_pct=time_reduction(t_serial, t_cluster),
                serial_hit=serial[-1].hit_id,
                clustered_hit=clustered[-1].hit_id,
                cluster_label=int(clustered[-1].cluster_label),
            )
        )

    t_avg = float(np.mean([row.reduction_pct for row in rows]))
    hits = sum(1 for row in rows if row.clustered_hit == row.truth_id)
    accuracy = 100.0 * hits / len(rows)
    total_serial = sum(row.t_serial_ns for row in rows)
    total_cluster = sum(row.t_cluster_ns for row in rows)
    aggregate = abs(total_serial - total_cluster) / total_serial * 100.0
    return BenchReport(
        k=index.k,
        rows=tuple(rows),
        t_avg_pct=t_avg,
        accuracy_pct=accuracy,
        aggregate_reduction_pct=aggregate,
    )


def build_decision_table(
    gallery_path: str | Path,
    k_range: Iterable[int],
    root_dir: str | Path,
    seed: int,
    *,
    thresholds: MatchThresholds = MatchThresholds(),
    weights: DecisionWeights = DecisionWeights(),
    n_queries: int = 100,
    noise_sigma: float = 0.0,
    repeats: int = DEFAULT_REPEATS,
    in_memory: bool = False,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    n_init: int = DEFAULT_N_INIT,
    report_sink: Callable[[BenchReport], None] | None = None,
) -> tuple[list[KDecisionRow], int]:
    """Fit, partition, and benchmark every cluster count in ``k_range``.

    One shared query batch (drawn from the gallery with ``seed``) is reused
    across all cluster counts so the rows are comparable.  Returns the
    scored decision rows and the winning k; ``report_sink`` receives each
    per-k benchmark report as it is produced.
    """
    gallery = load_serial(gallery_path)
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("k_range is empty")
    if ks[0] < 2:
        raise ValueError("decision table needs k >= 2")
    if ks[-1] > len(gallery):
        raise ValueError(
            f"largest k ({ks[-1]}) exceeds gallery size ({len(gallery)})"
        )
    queries = make_queries(gallery, n_queries, noise_sigma, seed)
    measured: list[KDecisionRow] = []
    for k in ks:
        model, assignment = kmeans_fit(
            gallery, k, seed, tol=tol, max_iter=max_iter, n_init=n_init
        )
        index = partition(gallery, model, root_dir)
        sil = silhouette_avg(gallery, assignment)
        report = run_bench(
            gallery_path,
            index,
            queries,
            thresholds,
            repeats=repeats,
            in_memory=in_memory,
        )
        if report_sink is not None:
            report_sink(report)
        measured.append(
            KDecisionRow(
                k=k,
                time_reduction_pct=report.t_avg_pct,
                accuracy_pct=report.accuracy_pct,
                silhouette_avg=sil,
            )
        )
    best_k, scored = decide_k(measured, weights)
    return scored, best_k


def serialize_query_csv(reports: Sequence[BenchReport]) -> str:
    """Render per-query benchmark rows (all cluster counts) as CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(QUERY_CSV_HEADER)
    for report in reports:
        for qid, row in enumerate(report.rows):
            writer.writerow(
                [
                    qid,
                    row.truth_id,
                    report.k,
                    format(row.t_serial_ns, ".17g"),
                    format(row.t_cluster_ns, ".17g"),
                    format(row.reduction_pct, ".17g"),
                    row.serial_hit if row.serial_hit is not None else "NONE",
                    row.clustered_hit
                    if row.clustered_hit is not None
                    else "NONE",
                ]
            )
    return buf.getvalue()


def write_query_csv(path: str | Path, reports: Sequence[BenchReport]) -> None:
    """Write the per-query detail CSV for a set of benchmark reports."""
    Path(path).write_text(serialize_query_csv(reports), encoding="utf-8")
