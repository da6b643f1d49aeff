"""Inter-annotator agreement: percent, Cohen's kappa, Fleiss' kappa,
Krippendorff's alpha (nominal), and Landis-Koch interpretation bands.

A :class:`RatingsTable` holds one label per (unit, rater) cell, with ``None``
for missing ratings. Missingness is tolerated only where the statistic
handles it natively: percent agreement scores each unit over its non-missing
pairs, and Krippendorff's alpha drops units with fewer than two non-missing
ratings from the coincidence matrix. Fleiss' kappa requires complete tables.

Degenerate chance agreement (expected agreement 1, or zero expected
disagreement) returns the limit value instead of dividing by zero: 1.0 under
perfect observed agreement, otherwise 0.0. Single-label validation subsets
then report 1.0 rather than crashing.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import (
    EmptyInput,
    LengthMismatch,
    MissingRatings,
    NoComparableUnits,
    OutOfRange,
)
from .taxonomy import Dimension


@dataclass
class RatingsTable:
    """N units rated by R raters; ``None`` marks a missing rating."""

    values: list[list[Optional[str]]]
    dimension: Optional[Dimension] = None

    def __post_init__(self):
        if not self.values:
            raise EmptyInput("ratings table has no units")
        widths = {len(row) for row in self.values}
        if len(widths) != 1:
            raise LengthMismatch("all units must have one cell per rater")
        if self.n_raters < 2:
            raise ValueError("need at least two raters")
        for row in self.values:
            if all(cell is None for cell in row):
                raise ValueError("every unit needs at least one rating")

    @property
    def n_units(self) -> int:
        return len(self.values)

    @property
    def n_raters(self) -> int:
        return len(self.values[0])

    def is_complete(self) -> bool:
        return all(cell is not None for row in self.values for cell in row)


def percent_agreement(table: RatingsTable) -> float:
    """Mean over units of (agreeing pairs / total pairs) among ratings."""
    unit_scores = []
    for row in table.values:
        present = [cell for cell in row if cell is not None]
        m = len(present)
        if m < 2:
            continue
        counts = Counter(present)
        agreeing = sum(c * (c - 1) // 2 for c in counts.values())
        unit_scores.append(agreeing / (m * (m - 1) // 2))
    if not unit_scores:
        raise NoComparableUnits("no unit carries two or more ratings")
    return sum(unit_scores) / len(unit_scores)


def cohen_kappa(a: Sequence[str], b: Sequence[str]) -> float:
    """Chance-corrected pairwise agreement between two complete raters."""
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} vs {len(b)} ratings")
    if not a:
        raise EmptyInput("cannot compute kappa over zero items")
    n = len(a)
    observed = sum(1 for x, y in zip(a, b) if x == y) / n
    counts_a = Counter(a)
    counts_b = Counter(b)
    expected = sum(
        (counts_a[label] / n) * (counts_b[label] / n)
        for label in set(counts_a) | set(counts_b)
    )
    if expected == 1.0:
        return 1.0 if observed == 1.0 else 0.0
    return (observed - expected) / (1.0 - expected)


def fleiss_kappa(table: RatingsTable) -> float:
    """Multi-rater chance-corrected agreement over a complete table."""
    if not table.is_complete():
        raise MissingRatings("Fleiss' kappa needs a rating from every rater")
    n_raters = table.n_raters
    n_units = table.n_units
    labels = sorted({cell for row in table.values for cell in row})
    p_bar = 0.0
    pooled: Counter = Counter()
    for row in table.values:
        counts = Counter(row)
        pooled.update(counts)
        p_bar += (sum(c * c for c in counts.values()) - n_raters) / (
            n_raters * (n_raters - 1)
        )
    p_bar /= n_units
    total = n_units * n_raters
    p_e = sum((pooled[label] / total) ** 2 for label in labels)
    if p_e == 1.0:
        return 1.0 if p_bar == 1.0 else 0.0
    return (p_bar - p_e) / (1.0 - p_e)


def krippendorff_alpha_nominal(table: RatingsTable) -> float:
    """Coincidence-matrix alpha with the nominal (0/1) distance.

    Units with fewer than two non-missing ratings are excluded. Each
    remaining unit adds 1/(m_u - 1) to the coincidence count of every
    ordered pair of its ratings.
    """
    coincidence: Counter = Counter()
    marginals: Counter = Counter()
    usable_units = 0
    for row in table.values:
        present = [cell for cell in row if cell is not None]
        m = len(present)
        if m < 2:
            continue
        usable_units += 1
        weight = 1.0 / (m - 1)
        for i, x in enumerate(present):
            for j, y in enumerate(present):
                if i != j:
                    coincidence[(x, y)] += weight
                    marginals[x] += weight
    if usable_units == 0:
        raise NoComparableUnits("no unit carries two or more ratings")
    n_total = sum(marginals.values())
    observed_disagreement = (
        sum(v for (x, y), v in coincidence.items() if x != y) / n_total
    )
    expected_disagreement = sum(
        marginals[x] * marginals[y]
        for x in marginals
        for y in marginals
        if x != y
    ) / (n_total * (n_total - 1.0))
    if expected_disagreement == 0.0:
        return 1.0 if observed_disagreement == 0.0 else 0.0
    return 1.0 - observed_disagreement / expected_disagreement


LANDIS_KOCH_BANDS = (
    (0.20, "Slight"),
    (0.40, "Fair"),
    (0.60, "Moderate"),
    (0.80, "Substantial"),
    (1.00, "Almost Perfect"),
)


def landis_koch(value: float) -> str:
    """Interpretation band for a kappa-type statistic in [-1, 1].

    The value is rounded to three decimals first; band boundaries are
    inclusive upward, so 0.600 reads Moderate and 0.601 Substantial.
    """
    if not -1.0 <= value <= 1.0:
        raise OutOfRange(f"agreement statistic {value} outside [-1, 1]")
    rounded = round(value, 3)
    if rounded < 0.0:
        return "Poor"
    for upper, band in LANDIS_KOCH_BANDS:
        if rounded <= upper:
            return band
    return "Almost Perfect"


@dataclass(frozen=True)
class AgreementReport:
    """One dimension's agreement statistics plus the interpretation band."""

    percent: float
    cohen: Optional[float]
    fleiss: Optional[float]
    kripp_alpha: float
    interpretation: str
    n_units: int
    dimension: Optional[Dimension] = None


def compute_agreement(table: RatingsTable) -> AgreementReport:
    """All applicable statistics for one table.

    Cohen's kappa is reported for exactly two raters, Fleiss' kappa for
    complete tables; the interpretation band follows the kappa statistic
    (Fleiss when there are more than two raters, Cohen otherwise).
    """
    cohen = None
    if table.n_raters == 2 and table.is_complete():
        cohen = cohen_kappa(
            [row[0] for row in table.values], [row[1] for row in table.values]
        )
    fleiss = fleiss_kappa(table) if table.is_complete() else None
    kappa_for_band = fleiss if table.n_raters > 2 else cohen
    if kappa_for_band is None:
        kappa_for_band = fleiss if fleiss is not None else 0.0
    return AgreementReport(
        percent=percent_agreement(table),
        cohen=cohen,
        fleiss=fleiss,
        kripp_alpha=krippendorff_alpha_nominal(table),
        interpretation=landis_koch(kappa_for_band),
        n_units=table.n_units,
        dimension=table.dimension,
    )


def average_report(reports: Sequence[AgreementReport]) -> AgreementReport:
    """Cross-dimension average row: plain means of each statistic."""
    if not reports:
        raise EmptyInput("no reports to average")

    def mean_of(values: list[Optional[float]]) -> Optional[float]:
        present = [v for v in values if v is not None]
        return sum(present) / len(present) if present else None

    fleiss = mean_of([r.fleiss for r in reports])
    cohen = mean_of([r.cohen for r in reports])
    kappa = fleiss if fleiss is not None else (cohen if cohen is not None else 0.0)
    return AgreementReport(
        percent=sum(r.percent for r in reports) / len(reports),
        cohen=cohen,
        fleiss=fleiss,
        kripp_alpha=sum(r.kripp_alpha for r in reports) / len(reports),
        interpretation=landis_koch(kappa),
        n_units=0,
        dimension=None,
    )
