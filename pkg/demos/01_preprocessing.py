"""
Gallery preprocessing, stage by stage
=====================================

A raw enrollment CSV rarely arrives clean: some measurements are missing,
and the same subject may appear several times.  This walks one tiny
gallery through the fixed preprocessing order -- fill, fuse, round,
z-score -- and prints what each stage changes.
"""

import numpy as np

from ecgid import gallery

# Three subjects; A was enrolled twice and B has two missing cells.
raw_text = """\
id,rr,pr,qrs,qt,qtc,p_axis,qrs_axis,t_axis,acci
A,801,160,88,402,418,52,33,40,2
A,799,162,90,398,422,54,35,38,2
B,640,,102,356,370,,-10,25,1
C,950,175,96,430,441,60,44,51,3
"""

raw = gallery.parse_gallery_csv(raw_text)
print(f"parsed {len(raw)} rows, {sum(not r.is_complete() for r in raw)} with gaps")

# Stage 1: absent measurements become zeros (the schema has no sentinel).
filled = gallery.fill_missing(raw)
print("\nB after fill_missing:", filled[2].features)

# Stage 2: repeated enrollments collapse to their per-feature mean,
# keeping first-appearance order.
fused = gallery.fuse_enrollments(filled)
print(f"\nfused {len(filled)} rows into {len(fused)} subjects:")
for rec in fused:
    print(" ", rec.subject_id, rec.vector)

# Stage 3: fused means are rounded half-away-from-zero.  Note A's rr:
# mean(801, 799) = 800.0 stays, but pr mean(160, 162) = 161.0 was already
# integral -- the interesting case is a .5 fraction, which never rounds
# toward zero.
rounded = gallery.round_features(fused)
print("\nA after rounding:", rounded[0].vector)

# Stage 4: z-scoring with population statistics (divide by n).  The stats
# are fitted on the gallery and must be reused verbatim for any probe.
stats = gallery.zscore_fit(rounded)
scaled = gallery.zscore_apply_records(rounded, stats)
print("\nper-feature mean:", np.round(stats.mean, 3))
print("per-feature stddev:", np.round(stats.stddev, 3))
print("\nscaled gallery:")
for rec in scaled:
    print(" ", rec.subject_id, np.round(rec.vector, 3))

# The one-call version runs the same chain in the same order.
processed, stats2 = gallery.preprocess_gallery(raw)
same = all(
    np.array_equal(a.vector, b.vector) for a, b in zip(processed, scaled)
)
print("\npreprocess_gallery reproduces the staged result:", same)

# A probe measured later is scaled with the *gallery's* stats -- never
# refit -- otherwise its coordinates would live in a different space.
probe = np.array([640.0, 0.0, 102.0, 356.0, 370.0, 0.0, -10.0, 25.0, 1.0])
print("\nprobe in gallery space:", np.round(gallery.zscore_apply(probe, stats), 3))
