#!/usr/bin/env python3
# How many clusters should the gallery be split into?
#
# Two signals answer that: the SSQ elbow (where adding clusters stops
# paying) and the mean silhouette (how cleanly records sit in their
# cluster).  A synthetic gallery with a known blob count makes both easy
# to sanity-check.

import numpy as np

from ecgid import gallery, kmeans, kselect, synth

N_SUBJECTS = 1200
PLANTED_BLOBS = 5
SEED = 20

raw = synth.synth_gallery(N_SUBJECTS, PLANTED_BLOBS, blob_spread=25.0, seed=SEED)
processed, _ = gallery.preprocess_gallery(raw)
print(f"gallery: {N_SUBJECTS} subjects drawn from {PLANTED_BLOBS} planted blobs")

curve = kselect.elbow_curve(processed, range(2, 10), seed=SEED)

# crude terminal plot: one bar per k, length proportional to SSQ
top = max(ssq for _, ssq in curve)
print("\n k   SSQ")
for k, ssq in curve:
    bar = "#" * max(1, int(40 * ssq / top))
    print(f" {k}   {ssq:10.1f}  {bar}")

knee = kselect.detect_knee(curve)
print(f"\nknee (largest drop-off bend): k={knee}")

print("\nmean silhouette per k:")
for k in range(2, 8):
    model, assignment = kmeans.kmeans_fit(processed, k, seed=SEED)
    s = kselect.silhouette_avg(processed, assignment)
    print(f" k={k}  {s:+.3f}")

# The weighted decision fuses measured time reduction, accuracy, and
# silhouette (weights 0.2 / 0.5 / 0.3).  Here with made-up bench numbers
# just to show the arithmetic; demo 05 measures real ones.
rows = [
    kselect.KDecisionRow(k=3, time_reduction_pct=55.0, accuracy_pct=100.0, silhouette_avg=0.61),
    kselect.KDecisionRow(k=5, time_reduction_pct=74.0, accuracy_pct=100.0, silhouette_avg=0.66),
    kselect.KDecisionRow(k=7, time_reduction_pct=80.0, accuracy_pct=97.0, silhouette_avg=0.58),
]
best_k, scored = kselect.decide_k(rows)
print("\nweighted decision over a hand-written table:")
for row in scored:
    print(f" k={row.k}  score={row.weighted_score:.2f}")
print(f"best_k={best_k}")
