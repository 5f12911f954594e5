"""Seeded Lloyd k-means with greedy k-means++ initialization.

Built directly on numpy rather than delegating to an external clustering
library, because the surrounding pipeline needs guarantees those wrappers
do not make: bit-reproducible fits for a fixed seed, a per-pass SSQ trace,
a deterministic empty-cluster repair rule, and batch/single-vector
assignment that agree bitwise (partition files must land exactly where a
later query lookup will search).

Distances use the expanded ``(x - c)**2`` form everywhere instead of the
faster Gram identity: the identity reassociates floating-point sums, which
would let a batch assignment disagree with a single-vector assignment in
rare near-tie cases.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gallery import N_FEATURES, SubjectRecord, gallery_matrix
from .synth import normalize_seed

_ASSIGN_CHUNK = 4096

# Instances whose set-partition count fits under this limit are solved by
# exact enumeration instead of restarted Lloyd (see kmeans_fit).
_EXACT_PARTITION_LIMIT = 20_000

DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITER = 300
DEFAULT_N_INIT = 10


@dataclass(frozen=True, eq=False)
class ClusterModel:
    """Fitted centroids plus the metadata needed to reproduce the fit.

    ``ssq_trace`` holds the within-cluster sum of squares after every
    assignment pass of the winning start (non-increasing by construction);
    ``ssq`` equals its last entry.  A model reloaded from disk carries
    ``ssq_trace=None`` — the trace is a fit artifact, not part of the
    model's identity.
    """

    k: int
    centroids: np.ndarray
    ssq: float
    iterations: int
    seed: int
    tol: float
    ssq_trace: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be positive")
        cent = np.array(self.centroids, dtype=np.float64)
        if cent.shape != (self.k, N_FEATURES):
            raise ValueError(
                f"centroids must have shape ({self.k}, {N_FEATURES}), "
                f"got {cent.shape}"
            )
        if not np.all(np.isfinite(cent)):
            raise ValueError("centroids must be finite")
        if not (self.ssq >= 0.0):
            raise ValueError("ssq must be non-negative")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        cent.flags.writeable = False
        object.__setattr__(self, "centroids", cent)
        if self.ssq_trace is not None:
            object.__setattr__(
                self, "ssq_trace", tuple(float(v) for v in self.ssq_trace)
            )


@dataclass(frozen=True, eq=False)
class Assignment:
    """Cluster label per gallery record, aligned by index."""

    labels: np.ndarray

    def __post_init__(self) -> None:
        labels = np.array(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be non-negative")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)


def squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distances, chunked to bound peak memory."""
    points = np.asarray(points, dtype=np.float64)
    out = np.empty((points.shape[0], centroids.shape[0]), dtype=np.float64)
    for start in range(0, points.shape[0], _ASSIGN_CHUNK):
        chunk = points[start : start + _ASSIGN_CHUNK]
        diffs = chunk[:, None, :] - centroids[None, :, :]
        out[start : start + _ASSIGN_CHUNK] = (diffs * diffs).sum(axis=2)
    return out


def assign_batch(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Label every row of ``points`` with its nearest centroid.

    Ties go to the lowest centroid index.
    """
    return np.argmin(squared_distances(points, centroids), axis=1)


def assign(vector: np.ndarray, model: ClusterModel) -> int:
    """Label a single vector with its nearest centroid (ties: lowest index).

    Agrees bitwise with :func:`assign_batch` on the same data.
    """
    v = np.asarray(vector, dtype=np.float64)
    if v.shape != (N_FEATURES,):
        raise ValueError(f"expected vector of shape ({N_FEATURES},)")
    diffs = v[None, :] - model.centroids
    d2 = (diffs * diffs).sum(axis=1)
    return int(np.argmin(d2))


def _ssq_value(
    points: np.ndarray, labels: np.ndarray, centroids: np.ndarray
) -> float:
    diffs = points - centroids[labels]
    return float((diffs * diffs).sum())


def ssq(
    gallery: Sequence[SubjectRecord],
    model: ClusterModel,
    assignment: Assignment,
) -> float:
    """Within-cluster sum of squared distances for an existing assignment."""
    _, points = gallery_matrix(gallery)
    labels = assignment.labels
    if labels.shape[0] != points.shape[0]:
        raise ValueError(
            f"assignment covers {labels.shape[0]} records, "
            f"gallery has {points.shape[0]}"
        )
    if labels.size and labels.max() >= model.k:
        raise ValueError("assignment label out of range for model")
    return _ssq_value(points, labels, model.centroids)


def _kmeanspp_init(
    points: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray:
    """Greedy k-means++: sample several candidates per step, keep the one
    that minimizes the resulting potential."""
    n = points.shape[0]
    n_candidates = 2 + int(np.log(k))
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = points[first]
    diffs = points - centroids[0]
    d2 = (diffs * diffs).sum(axis=1)
    for c in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            # every point coincides with an existing centroid
            centroids[c] = points[int(rng.integers(n))]
            continue
        candidates = rng.choice(n, size=n_candidates, p=d2 / total)
        best_d2 = None
        best_pot = np.inf
        best_idx = int(candidates[0])
        for idx in candidates:
            cand_diffs = points - points[int(idx)]
            cand_d2 = np.minimum(d2, (cand_diffs * cand_diffs).sum(axis=1))
            pot = float(cand_d2.sum())
            if pot < best_pot:
                best_idx, best_pot, best_d2 = int(idx), pot, cand_d2
        centroids[c] = points[best_idx]
        d2 = best_d2
    return centroids


def _update_centroids(
    points: np.ndarray,
    labels: np.ndarray,
    centroids: np.ndarray,
    k: int,
) -> np.ndarray:
    new = np.empty_like(centroids)
    counts = np.bincount(labels, minlength=k)
    taken: set[int] = set()
    for c in range(k):
        if counts[c] > 0:
            new[c] = points[labels == c].mean(axis=0)
        else:
            # Deterministic repair: re-seed an emptied cluster to the point
            # farthest from its previous centroid (ties: lowest row index;
            # a point already claimed by another repair is passed over).
            diffs = points - centroids[c]
            d2 = (diffs * diffs).sum(axis=1)
            for idx in np.argsort(-d2, kind="stable"):
                if int(idx) not in taken:
                    break
            taken.add(int(idx))
            new[c] = points[int(idx)]
    return new


def _n_partitions(n: int, k: int) -> int:
    """Count set partitions of n items into at most k non-empty blocks."""
    # Stirling numbers of the second kind, S(n, j), via the standard DP.
    row = [1] + [0] * k  # S(0, 0) = 1
    for _ in range(n):
        new = [0] * (k + 1)
        for j in range(1, k + 1):
            new[j] = row[j - 1] + j * row[j]
        row = new
    return sum(row[1 : k + 1])


def _exact_small_labels(points: np.ndarray, k: int) -> np.ndarray:
    """Minimum-SSQ labeling of a tiny point set by exhaustive enumeration.

    Walks every set partition into at most k blocks (restricted growth
    strings, so label permutations are visited once) and keeps the first
    labeling achieving the lowest SSQ.  Per-block SSQ uses the identity
    sum|x|^2 - |sum x|^2 / m to avoid recomputing means.
    """
    n = points.shape[0]
    sq_norms = (points * points).sum(axis=1)
    labels = np.zeros(n, dtype=np.int64)
    best_labels = labels.copy()
    best_ssq = np.inf

    def rec(i: int, max_label: int) -> None:
        nonlocal best_labels, best_ssq
        if i == n:
            total = 0.0
            for lab in range(max_label + 1):
                members = labels == lab
                block = points[members]
                s = block.sum(axis=0)
                total += float(sq_norms[members].sum()) - float(
                    (s * s).sum()
                ) / len(block)
            if total < best_ssq:
                best_ssq = total
                best_labels = labels.copy()
            return
        for lab in range(min(max_label + 1, k - 1) + 1):
            labels[i] = lab
            rec(i + 1, max(max_label, lab))

    rec(1, 0)
    return best_labels


def _lloyd(
    points: np.ndarray,
    k: int,
    rng: np.random.Generator,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, np.ndarray, list[float], int]:
    return _lloyd_from(points, _kmeanspp_init(points, k, rng), tol, max_iter)


def _lloyd_from(
    points: np.ndarray,
    centroids: np.ndarray,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, np.ndarray, list[float], int]:
    k = centroids.shape[0]
    trace: list[float] = []
    iterations = 0
    for _ in range(max_iter):
        labels = assign_batch(points, centroids)
        trace.append(_ssq_value(points, labels, centroids))
        new_centroids = _update_centroids(points, labels, centroids, k)
        shift_d2 = ((new_centroids - centroids) ** 2).sum(axis=1)
        centroids = new_centroids
        iterations += 1
        if float(np.sqrt(shift_d2.max())) < tol:
            break
    # Final assignment pass so the returned labels, trace tail, and SSQ all
    # describe the centroids actually returned.
    labels = assign_batch(points, centroids)
    trace.append(_ssq_value(points, labels, centroids))
    return centroids, labels, trace, iterations


def kmeans_fit(
    gallery: Sequence[SubjectRecord],
    k: int,
    seed: int,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    n_init: int = DEFAULT_N_INIT,
) -> tuple[ClusterModel, Assignment]:
    """Fit k-means over a gallery.

    Runs ``n_init`` independent k-means++ starts derived from ``seed`` and
    keeps the fit with the lowest final SSQ (ties: earliest start).  Each
    start iterates Lloyd updates until the largest centroid displacement
    drops below ``tol`` or ``max_iter`` passes have run, then performs one
    final assignment pass so labels match the returned centroids.

    Tiny instances (set-partition count under an internal limit, roughly
    n <= 10 for k <= 3) skip the restarts: the minimum-SSQ labeling is
    found by exhaustive enumeration and then polished by the same Lloyd
    loop, so the result is the global optimum and every reported field has
    the same meaning as on the restart path.

    Bit-deterministic: the same gallery, k, seed, and options reproduce the
    same centroids, labels, and trace on every run.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if len(gallery) < k:
        raise ValueError(
            f"gallery has {len(gallery)} records; need at least k={k}"
        )
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be positive")
    if n_init < 1:
        raise ValueError("n_init must be positive")
    _, points = gallery_matrix(gallery)
    if _n_partitions(len(gallery), k) <= _EXACT_PARTITION_LIMIT:
        exact = _exact_small_labels(points, k)
        blocks = int(exact.max()) + 1
        init = np.stack(
            [points[exact == lab].mean(axis=0) for lab in range(blocks)]
            # If the optimum uses fewer than k blocks (all-duplicate data),
            # pad with repeats; the empty-cluster repair resolves them.
            + [points[exact == 0].mean(axis=0)] * (k - blocks)
        )
        centroids, labels, trace, iterations = _lloyd_from(
            points, init, tol, max_iter
        )
        final_ssq = trace[-1]
    else:
        children = np.random.SeedSequence(normalize_seed(seed)).spawn(n_init)
        best: tuple[float, np.ndarray, np.ndarray, list[float], int] | None = (
            None
        )
        for child in children:
            rng = np.random.default_rng(child)
            centroids, labels, trace, iterations = _lloyd(
                points, k, rng, tol, max_iter
            )
            if best is None or trace[-1] < best[0]:
                best = (trace[-1], centroids, labels, trace, iterations)
        final_ssq, centroids, labels, trace, iterations = best
    model = ClusterModel(
        k=k,
        centroids=centroids,
        ssq=final_ssq,
        iterations=iterations,
        seed=seed,
        tol=tol,
        ssq_trace=tuple(trace),
    )
    return model, Assignment(labels=labels)
