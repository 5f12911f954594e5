"""Synthetic gallery generation for desk-scale experiments.

Generates raw enrollment records as well-separated Gaussian blobs in the
9-dimensional feature space, so downstream clustering has unambiguous
ground-truth structure to recover.  Everything is driven by a single seed
and is fully deterministic.
"""

from __future__ import annotations

import numpy as np

from .gallery import N_FEATURES, RawRecord

# Blob centers are kept at least this many spreads apart so the generated
# cluster structure cannot be blurred away by the blob noise itself.
CENTER_SEPARATION = 10.0


def normalize_seed(seed: int) -> int:
    """Map any Python int onto the non-negative range numpy seeding accepts."""
    return int(seed) % (1 << 128)


def _min_pairwise_distance(points: np.ndarray) -> float:
    diffs = points[:, None, :] - points[None, :, :]
    d2 = (diffs * diffs).sum(axis=2)
    n = len(points)
    d2[np.arange(n), np.arange(n)] = np.inf
    return float(np.sqrt(d2.min()))


def blob_centers(
    n_blobs: int, spread: float, rng: np.random.Generator
) -> np.ndarray:
    """Draw blob centers with pairwise distance >= CENTER_SEPARATION*spread.

    Centers are rejection-sampled on a sphere shell whose radius starts at
    the separation floor and grows only after repeated rejections.  On a
    shell the pairwise distances concentrate (no single center pair
    dominates the between-blob variance), which keeps the planted blob
    count recoverable from an SSQ curve — uniform box draws spread the
    separations several-fold and smear that structure.
    """
    if n_blobs < 1:
        raise ValueError("n_blobs must be positive")
    if spread <= 0.0:
        raise ValueError("spread must be positive")
    min_dist = CENTER_SEPARATION * spread
    radius = min_dist
    attempts = 0
    while True:
        raw = rng.normal(0.0, 1.0, size=(n_blobs, N_FEATURES))
        norms = np.sqrt((raw * raw).sum(axis=1))
        if np.all(norms > 1e-12):
            centers = radius * raw / norms[:, None]
            if n_blobs == 1 or _min_pairwise_distance(centers) >= min_dist:
                return centers
        attempts += 1
        if attempts % 10 == 0:
            radius *= 1.2


def synth_gallery(
    n_subjects: int,
    n_blobs: int,
    blob_spread: float,
    seed: int,
) -> list[RawRecord]:
    """Generate a raw gallery of Gaussian blobs in feature space.

    Subjects are dealt to blobs round-robin so blob populations stay
    balanced; each subject's vector is its blob center plus isotropic
    Gaussian noise with standard deviation ``blob_spread``.  Subject ids
    are unique, zero-padded, and stable for a fixed seed.
    """
    if n_subjects < 1:
        raise ValueError("n_subjects must be positive")
    if n_blobs < 1:
        raise ValueError("n_blobs must be positive")
    if n_subjects < n_blobs:
        raise ValueError(
            f"n_subjects ({n_subjects}) must be >= n_blobs ({n_blobs})"
        )
    if blob_spread <= 0.0:
        raise ValueError("blob_spread must be positive")
    rng = np.random.default_rng(normalize_seed(seed))
    centers = blob_centers(n_blobs, blob_spread, rng)
    blob_of = np.arange(n_subjects) % n_blobs
    noise = rng.normal(0.0, blob_spread, size=(n_subjects, N_FEATURES))
    points = centers[blob_of] + noise
    width = max(5, len(str(n_subjects)))
    return [
        RawRecord(
            f"S{i:0{width}d}", tuple(float(v) for v in points[i])
        )
        for i in range(n_subjects)
    ]
