"""Cluster-count selection: elbow curve, silhouette, weighted decision.

Three signals feed the choice of how many partitions to split a gallery
into: the SSQ elbow curve (where does adding a cluster stop paying?), the
mean silhouette (how cleanly separated are the clusters?), and the
measured retrieval behavior (time reduction and identification accuracy).
``decide_k`` fuses the measured columns with a weighted sum; the elbow
knee and silhouette ranking are reported as supporting diagnostics but do
not constrain the argmax.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .gallery import SubjectRecord, gallery_matrix
from .kmeans import (
    DEFAULT_MAX_ITER,
    DEFAULT_N_INIT,
    DEFAULT_TOL,
    Assignment,
    kmeans_fit,
)

DEFAULT_TIME_WEIGHT = 0.2
DEFAULT_ACCURACY_WEIGHT = 0.5
DEFAULT_SILHOUETTE_WEIGHT = 0.3

_SIL_BLOCK = 128
_SIL_MEMBER_BLOCK = 2048

ELBOW_CSV_HEADER = ("k", "ssq")
DECISION_CSV_HEADER = ("k", "time_reduction", "accuracy", "silhouette", "score")


@dataclass(frozen=True)
class DecisionWeights:
    """Weights fusing time reduction, accuracy, and silhouette into a score.

    Must sum to 1.  Accuracy and time reduction are on a 0..100 scale while
    silhouette lives in [-1, 1], so with the default weighting the
    silhouette term acts as a small tie-breaking nudge rather than a
    dominant term — that imbalance is deliberate and matches how the
    decision table is scored.
    """

    time_weight: float = DEFAULT_TIME_WEIGHT
    accuracy_weight: float = DEFAULT_ACCURACY_WEIGHT
    silhouette_weight: float = DEFAULT_SILHOUETTE_WEIGHT

    def __post_init__(self) -> None:
        for name, w in (
            ("time_weight", self.time_weight),
            ("accuracy_weight", self.accuracy_weight),
            ("silhouette_weight", self.silhouette_weight),
        ):
            if not (0.0 <= w <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {w}")
        total = self.time_weight + self.accuracy_weight + self.silhouette_weight
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {total}")


@dataclass(frozen=True)
class KDecisionRow:
    """One decision-table row: measurements for a single cluster count."""

    k: int
    time_reduction_pct: float
    accuracy_pct: float
    silhouette_avg: float
    weighted_score: float | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be positive")
        if not (0.0 <= self.accuracy_pct <= 100.0):
            raise ValueError(
                f"accuracy_pct must lie in [0, 100], got {self.accuracy_pct}"
            )
        if not (-1.0 - 1e-12 <= self.silhouette_avg <= 1.0 + 1e-12):
            raise ValueError(
                f"silhouette_avg must lie in [-1, 1], got {self.silhouette_avg}"
            )
        if self.time_reduction_pct > 100.0:
            raise ValueError("time_reduction_pct cannot exceed 100")


def elbow_curve(
    gallery: Sequence[SubjectRecord],
    k_range: Iterable[int],
    seed: int,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    n_init: int = DEFAULT_N_INIT,
) -> list[tuple[int, float]]:
    """Final SSQ for each k: one independent seeded fit per k, ascending."""
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("k_range is empty")
    if ks[0] < 1:
        raise ValueError("k values must be positive")
    if ks[-1] > len(gallery):
        raise ValueError(
            f"largest k ({ks[-1]}) exceeds gallery size ({len(gallery)})"
        )
    curve = []
    for k in ks:
        model, _ = kmeans_fit(
            gallery, k, seed, tol=tol, max_iter=max_iter, n_init=n_init
        )
        curve.append((k, model.ssq))
    return curve


def detect_knee(curve: Sequence[tuple[int, float]]) -> int:
    """Pick the k with the largest discrete second difference of SSQ.

    The curve must hold at least three (k, ssq) points with strictly
    ascending k.  Endpoints cannot host a second difference and are never
    returned; ties go to the smaller k.
    """
    if len(curve) < 3:
        raise ValueError("need at least 3 curve points to detect a knee")
    ks = [k for k, _ in curve]
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("curve k values must be strictly ascending")
    best_k = None
    best_d2 = -np.inf
    for i in range(1, len(curve) - 1):
        d2 = curve[i - 1][1] - 2.0 * curve[i][1] + curve[i + 1][1]
        if d2 > best_d2:
            best_k, best_d2 = curve[i][0], d2
    return int(best_k)


def silhouette_avg(
    gallery: Sequence[SubjectRecord], assignment: Assignment
) -> float:
    """Mean silhouette over all records, Euclidean distance.

    For each record: a = mean distance to its own cluster's other members,
    b = smallest mean distance to any other cluster, score = (b - a) /
    max(a, b).  A record alone in its cluster scores 0, as does one where
    both means are 0.  Needs at least two distinct clusters.
    """
    _, points = gallery_matrix(gallery)
    labels = assignment.labels
    n = points.shape[0]
    if labels.shape[0] != n:
        raise ValueError(
            f"assignment covers {labels.shape[0]} records, gallery has {n}"
        )
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise ValueError("silhouette needs at least two distinct clusters")

    # Summed distance from every record to every cluster, double-chunked so
    # the (block, members, dim) intermediate stays small.  Kept in exact
    # (x - y)**2 form — see the kmeans module note on reassociation.
    sums = np.zeros((n, uniq.size), dtype=np.float64)
    for j, c in enumerate(uniq):
        members = points[labels == c]
        for ms in range(0, members.shape[0], _SIL_MEMBER_BLOCK):
            mblock = members[ms : ms + _SIL_MEMBER_BLOCK]
            for bs in range(0, n, _SIL_BLOCK):
                block = points[bs : bs + _SIL_BLOCK]
                diffs = block[:, None, :] - mblock[None, :, :]
                d = np.sqrt((diffs * diffs).sum(axis=2))
                sums[bs : bs + _SIL_BLOCK, j] += d.sum(axis=1)

    col_of = {int(c): j for j, c in enumerate(uniq)}
    own_col = np.array([col_of[int(c)] for c in labels])
    counts = np.array([(labels == c).sum() for c in uniq], dtype=np.int64)
    rows = np.arange(n)
    own_count = counts[own_col]
    own_sum = sums[rows, own_col]

    mean_other = sums / counts[None, :].astype(np.float64)
    mean_other[rows, own_col] = np.inf
    b = mean_other.min(axis=1)
    a = own_sum / np.maximum(own_count - 1, 1)

    denom = np.maximum(a, b)
    scores = np.zeros(n, dtype=np.float64)
    np.divide(b - a, denom, out=scores, where=denom > 0.0)
    scores[own_count <= 1] = 0.0
    return float(scores.mean())


def decide_k(
    rows: Sequence[KDecisionRow],
    weights: DecisionWeights = DecisionWeights(),
) -> tuple[int, list[KDecisionRow]]:
    """Score every row with the weighted sum and pick the best k.

    Returns (best_k, scored rows in input order).  Ties on the score go to
    the smaller k.
    """
    if not rows:
        raise ValueError("no decision rows to score")
    seen = set()
    for row in rows:
        if row.k in seen:
            raise ValueError(f"duplicate decision row for k={row.k}")
        seen.add(row.k)
    scored = [
        replace(
            row,
            weighted_score=(
                weights.time_weight * row.time_reduction_pct
                + weights.accuracy_weight * row.accuracy_pct
                + weights.silhouette_weight * row.silhouette_avg
            ),
        )
        for row in rows
    ]
    best = max(scored, key=lambda r: (r.weighted_score, -r.k))
    return best.k, scored


# --- CSV serialization -------------------------------------------------------


def serialize_elbow_csv(curve: Sequence[tuple[int, float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ELBOW_CSV_HEADER)
    for k, value in curve:
        writer.writerow([k, format(float(value), ".17g")])
    return buf.getvalue()


def write_elbow_csv(
    path: str | Path, curve: Sequence[tuple[int, float]]
) -> None:
    """Write an elbow curve as ``k,ssq`` rows."""
    Path(path).write_text(serialize_elbow_csv(curve), encoding="utf-8")


def serialize_decision_csv(rows: Sequence[KDecisionRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DECISION_CSV_HEADER)
    for row in rows:
        score = "" if row.weighted_score is None else format(
            row.weighted_score, ".17g"
        )
        writer.writerow(
            [
                row.k,
                format(row.time_reduction_pct, ".17g"),
                format(row.accuracy_pct, ".17g"),
                format(row.silhouette_avg, ".17g"),
                score,
            ]
        )
    return buf.getvalue()


def write_decision_csv(path: str | Path, rows: Sequence[KDecisionRow]) -> None:
    """Write a decision table as ``k,time_reduction,accuracy,silhouette,score``."""
    Path(path).write_text(serialize_decision_csv(rows), encoding="utf-8")


def read_decision_rows(path: str | Path) -> list[KDecisionRow]:
    """Load decision rows from CSV; the score column is optional.

    Accepts either the full 5-column decision header or the same header
    without ``score`` (for externally measured tables that still need
    scoring).  Any present score cells are ignored — scores are always
    recomputed by :func:`decide_k`.
    """
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError(f"{path}: empty decision CSV") from None
    full = list(DECISION_CSV_HEADER)
    bare = full[:-1]
    if header == full:
        width = 5
    elif header == bare:
        width = 4
    else:
        raise ValueError(
            f"{path}: bad header {header!r}; expected {','.join(full)} "
            f"(score column optional)"
        )
    rows: list[KDecisionRow] = []
    for lineno, cells in enumerate(reader, start=2):
        if not cells:
            continue
        if len(cells) != width:
            raise ValueError(
                f"{path}: row {lineno}: expected {width} columns, "
                f"got {len(cells)}"
            )
        try:
            rows.append(
                KDecisionRow(
                    k=int(cells[0]),
                    time_reduction_pct=float(cells[1]),
                    accuracy_pct=float(cells[2]),
                    silhouette_avg=float(cells[3]),
                )
            )
        except ValueError as exc:
            raise ValueError(f"{path}: row {lineno}: {exc}") from exc
    if not rows:
        raise ValueError(f"{path}: decision CSV has no data rows")
    return rows
