"""
PRD, CC, and the two-gate matcher
=================================

Identification scores a probe against every candidate with two
complementary measures:

* PRD -- percentage root-mean-square difference, normalized by the
  *reference* energy.  0 means identical; it grows with any deviation.
* CC -- normalized cross-correlation.  1 means perfectly aligned
  direction, regardless of scale.

A candidate must clear BOTH gates (PRD <= 14, CC >= 0.995 by default);
survivors are ranked by the fused confidence 0.5*(100 - PRD) + 0.5*CC.
"""

import numpy as np

from ecgid import gallery, matcher

enrolled = np.array([802.0, 161.0, 89.0, 400.0, 420.0, 53.0, 34.0, 39.0, 2.0])

print("probe vs enrolled template:")
for label, probe in [
    ("identical        ", enrolled.copy()),
    ("tiny drift       ", enrolled + 0.5),
    ("someone else     ", enrolled * np.linspace(0.7, 1.3, 9)),
    ("scaled copy x1.1 ", enrolled * 1.1),
]:
    p = matcher.prd(probe, enrolled)
    c = matcher.cc(probe, enrolled)
    conf = matcher.confidence(p, c)
    verdict = "accept" if (p <= 14.0 and c >= 0.995) else "reject"
    print(f"  {label} PRD={p:7.3f}  CC={c:+.5f}  confidence={conf:7.3f}  -> {verdict}")

# Note the asymmetry: PRD divides by the reference energy, so swapping
# the arguments changes the score (CC does not care).
a = np.zeros(9); a[0] = 2.0
b = np.zeros(9); b[0] = 1.0
print(f"\nPRD(ref=a, cand=b) = {matcher.prd(a, b):.1f}")
print(f"PRD(ref=b, cand=a) = {matcher.prd(b, a):.1f}")

# best_match scans a candidate list and returns the top qualifier.
rng = np.random.default_rng(4)
candidates = [
    gallery.SubjectRecord(f"S{i:02d}", enrolled + rng.normal(0, 40.0, 9))
    for i in range(8)
]
candidates.insert(3, gallery.SubjectRecord("TARGET", enrolled + 0.25))

result = matcher.best_match(enrolled, candidates)
print(f"\nbest_match over {result.candidates_scanned} candidates:")
print(f"  hit={result.hit_id}  PRD={result.prd:.4f}  CC={result.cc:.6f}  "
      f"confidence={result.confidence:.4f}")

# With a stricter gate nothing qualifies and the result is an honest miss.
strict = matcher.MatchThresholds(prd_max=0.01, cc_min=0.999999)
miss = matcher.best_match(enrolled, candidates, strict)
print(f"  under strict gates: hit={miss.hit_id}")
