"""Probe-to-gallery similarity: PRD, cross-correlation, confidence fusion.

A probe vector is compared against candidate gallery vectors with two
complementary scores: percentage root-mean-square difference (PRD, lower
is better, reference-normalized and therefore asymmetric) and normalized
cross-correlation (CC, higher is better).  A candidate qualifies only if
PRD and CC both clear their thresholds; among qualifiers the winner is the
one with the highest fused confidence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gallery import N_FEATURES, SubjectRecord

DEFAULT_PRD_MAX = 14.0
DEFAULT_CC_MIN = 0.995


@dataclass(frozen=True)
class MatchThresholds:
    """Acceptance gates and fusion weights for candidate scoring."""

    prd_max: float = DEFAULT_PRD_MAX
    cc_min: float = DEFAULT_CC_MIN
    w_prd: float = 0.5
    w_cc: float = 0.5

    def __post_init__(self) -> None:
        if self.prd_max <= 0.0:
            raise ValueError("prd_max must be positive")
        if not (-1.0 <= self.cc_min <= 1.0):
            raise ValueError("cc_min must lie in [-1, 1]")
        if self.w_prd < 0.0 or self.w_cc < 0.0:
            raise ValueError("fusion weights must be non-negative")
        if abs(self.w_prd + self.w_cc - 1.0) > 1e-9:
            raise ValueError("fusion weights must sum to 1")


@dataclass(frozen=True)
class MatchResult:
    """Outcome of scanning one probe against a candidate set.

    ``hit_id`` is ``None`` when no candidate cleared both thresholds; the
    score fields are then NaN.  ``skipped`` counts candidates whose scores
    were undefined (zero vectors) and were passed over.
    """

    hit_id: str | None
    prd: float
    cc: float
    confidence: float
    candidates_scanned: int
    skipped: int = 0


def prd(reference: np.ndarray, candidate: np.ndarray) -> float:
    """Percentage root-mean-square difference of candidate vs reference.

    Normalized by the reference's energy, so the score is asymmetric in
    its arguments.  0 for identical vectors; raises on a zero reference.
    """
    x = _as_feature_vector(reference, "reference")
    f = _as_feature_vector(candidate, "candidate")
    energy = float((x * x).sum())
    if energy == 0.0:
        raise ValueError("PRD is undefined for a zero reference vector")
    diff = x - f
    return float(np.sqrt(float((diff * diff).sum()) / energy) * 100.0)


def cc(reference: np.ndarray, candidate: np.ndarray) -> float:
    """Normalized cross-correlation in [-1, 1].

    1 for any positive scaling of the reference; raises if either vector
    is zero (the normalization would divide by zero).
    """
    x = _as_feature_vector(reference, "reference")
    f = _as_feature_vector(candidate, "candidate")
    x_energy = float((x * x).sum())
    f_energy = float((f * f).sum())
    if x_energy == 0.0 or f_energy == 0.0:
        raise ValueError("CC is undefined when either vector is zero")
    value = float((x * f).sum()) / float(np.sqrt(x_energy * f_energy))
    return float(min(1.0, max(-1.0, value)))


def confidence(
    prd_value: float,
    cc_value: float,
    thresholds: MatchThresholds = MatchThresholds(),
) -> float:
    """Fused confidence: w_prd*(100 - PRD) + w_cc*CC."""
    return (
        thresholds.w_prd * (100.0 - prd_value) + thresholds.w_cc * cc_value
    )


def best_match(
    query: np.ndarray,
    candidates: Sequence[SubjectRecord],
    thresholds: MatchThresholds = MatchThresholds(),
) -> MatchResult:
    """Scan candidates and return the qualifying one with top confidence.

    A candidate qualifies when PRD <= prd_max and CC >= cc_min.  Ties on
    confidence go to the earliest candidate in scan order.  Candidates
    whose scores are undefined (zero vectors) are skipped and counted; a
    zero query skips everything.  An empty candidate set is a clean miss.
    """
    q = _as_feature_vector(query, "query")
    scanned = len(candidates)
    if scanned == 0:
        return MatchResult(None, np.nan, np.nan, np.nan, 0, 0)

    matrix = np.stack([c.vector for c in candidates])
    q_energy = float((q * q).sum())
    cand_energy = (matrix * matrix).sum(axis=1)

    defined = cand_energy > 0.0
    if q_energy == 0.0:
        defined = np.zeros(scanned, dtype=bool)
    skipped = int(scanned - defined.sum())
    if not defined.any():
        return MatchResult(None, np.nan, np.nan, np.nan, scanned, skipped)

    diffs = matrix - q[None, :]
    prd_vals = np.sqrt((diffs * diffs).sum(axis=1) / q_energy) * 100.0
    with np.errstate(divide="ignore", invalid="ignore"):
        cc_vals = (matrix * q[None, :]).sum(axis=1) / np.sqrt(
            cand_energy * q_energy
        )
    cc_vals = np.clip(cc_vals, -1.0, 1.0)

    qualifies = (
        defined
        & (prd_vals <= thresholds.prd_max)
        & (cc_vals >= thresholds.cc_min)
    )
    if not qualifies.any():
        return MatchResult(None, np.nan, np.nan, np.nan, scanned, skipped)

    conf = thresholds.w_prd * (100.0 - prd_vals) + thresholds.w_cc * cc_vals
    conf = np.where(qualifies, conf, -np.inf)
    winner = int(np.argmax(conf))  # argmax keeps the earliest on ties
    return MatchResult(
        hit_id=candidates[winner].subject_id,
        prd=float(prd_vals[winner]),
        cc=float(cc_vals[winner]),
        confidence=float(conf[winner]),
        candidates_scanned=scanned,
        skipped=skipped,
    )


def _as_feature_vector(vector: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(vector, dtype=np.float64)
    if v.shape != (N_FEATURES,):
        raise ValueError(
            f"{name} must have shape ({N_FEATURES},), got {v.shape}"
        )
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite components")
    return v
