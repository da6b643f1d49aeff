"""Inter-annotator agreement statistics on simulated rater tables.

Four raters label 300 units on a 4-label nominal scale with varying noise.
The report carries percent agreement, Fleiss' kappa (complete multi-rater
tables), Krippendorff's alpha (tolerates missing ratings), Cohen's kappa
for rater pairs, and the Landis-Koch interpretation band.
"""

import random

from factkit import (
    RatingsTable,
    cohen_kappa,
    compute_agreement,
    krippendorff_alpha_nominal,
    landis_koch,
)

rng = random.Random(0)
LABELS = ["Preferences", "Experience", "Demographics", "None"]

truth = [rng.choice(LABELS) for _ in range(300)]


def noisy_rater(noise: float):
    return [v if rng.random() > noise else rng.choice(LABELS) for v in truth]


values = list(map(list, zip(noisy_rater(0.10), noisy_rater(0.15), noisy_rater(0.25), noisy_rater(0.35))))
table = RatingsTable(values=values)
report = compute_agreement(table)

print("four raters, increasing noise:")
print(f"  percent agreement   {report.percent:.3f}")
print(f"  Fleiss' kappa       {report.fleiss:.3f}")
print(f"  Krippendorff alpha  {report.kripp_alpha:.3f}")
print(f"  interpretation      {report.interpretation}")

print("\npairwise Cohen's kappa against rater 0:")
rater0 = [row[0] for row in values]
for other in (1, 2, 3):
    kappa = cohen_kappa(rater0, [row[other] for row in values])
    print(f"  rater {other}: {kappa:.3f}  ({landis_koch(kappa)})")

print("\nmissing ratings: alpha drops units with fewer than 2 ratings")
with_missing = [list(row) for row in values]
for i in range(0, 300, 7):
    with_missing[i][3] = None
for i in range(0, 300, 50):  # a few units keep only one rating
    with_missing[i][1] = with_missing[i][2] = with_missing[i][3] = None
sparse = RatingsTable(values=with_missing)
print(f"  alpha on the sparse table: {krippendorff_alpha_nominal(sparse):.3f}")

print("\nLandis-Koch bands at the boundaries:")
for value in (0.20, 0.21, 0.40, 0.41, 0.60, 0.61, 0.80, 0.81):
    print(f"  {value:.2f} -> {landis_koch(value)}")
