"""Corpus-level label distributions from an ensemble of seed models.

Each trained seed model labels the whole corpus; per (dimension, label) the
report carries the share of facts assigned that label and the model's mean
confidence among those facts, both as mean and sample std across seeds.
Invalidity-reason predictions are reported exactly as the heads produce
them, without reconciling against the validity head.

The leakage audit recomputes the distribution with facts that also occur in
the training set (by exact trimmed text match) held out and reports the
largest per-cell share shift in percentage points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .embeddings import EmbeddingMatrix
from .errors import EmptyTables, SchemaMismatch
from .metrics import MeanStd
from .model import MultiHeadModel, predict
from .taxonomy import DIMENSIONS, LABEL_SPACE, Dimension, FactRecord, LabelSet

PredictionTable = list[tuple[LabelSet, dict[Dimension, float]]]


def predict_corpus(
    models: Sequence[MultiHeadModel], embeddings: EmbeddingMatrix
) -> list[PredictionTable]:
    """One prediction table per seed model over the same corpus."""
    if not models:
        raise EmptyTables("no models given")
    first = models[0]
    for other in models[1:]:
        if (
            other.dim != first.dim
            or other.category_names != first.category_names
            or other.label_space != first.label_space
        ):
            raise SchemaMismatch("seed models disagree on label space or dimension")
    return [predict(m, embeddings) for m in models]


@dataclass(frozen=True)
class DistributionCell:
    share: MeanStd  # percent of facts assigned the label
    confidence: Optional[MeanStd]  # mean max-softmax among those facts, percent


@dataclass(frozen=True)
class DistributionReport:
    cells: dict[tuple[Dimension, str], DistributionCell]
    n_facts: int
    n_seeds: int


def _mean_std(values: Sequence[float]) -> MeanStd:
    # fsum keeps the result independent of seed-table order
    n = len(values)
    mean = math.fsum(values) / n
    if n == 1:
        return MeanStd(mean, 0.0)
    return MeanStd(mean, math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1)))


def aggregate_distribution(tables: Sequence[PredictionTable]) -> DistributionReport:
    """Mean and std of per-label shares and confidences across seed tables."""
    if not tables or not tables[0]:
        raise EmptyTables("no predictions to aggregate")
    n_facts = len(tables[0])
    if any(len(t) != n_facts for t in tables):
        raise SchemaMismatch("seed tables cover different numbers of facts")
    cells: dict[tuple[Dimension, str], DistributionCell] = {}
    for dim in DIMENSIONS:
        for label in LABEL_SPACE[dim]:
            shares = []
            confidences = []
            for table in tables:
                hits = [conf[dim] for labels, conf in table if labels.get(dim) == label]
                shares.append(100.0 * len(hits) / n_facts)
                if hits:
                    confidences.append(100.0 * sum(hits) / len(hits))
            cells[(dim, label)] = DistributionCell(
                share=_mean_std(shares),
                confidence=_mean_std(confidences) if confidences else None,
            )
    return DistributionReport(cells=cells, n_facts=n_facts, n_seeds=len(tables))


@dataclass(frozen=True)
class LeakageAudit:
    overlap_count: int
    overlap_fraction: float
    shifts: Optional[dict[tuple[Dimension, str], float]]  # percentage points
    max_shift: Optional[float]
    held_out_empty: bool
    held_out_report: Optional[DistributionReport]


def leakage_audit(
    train_facts: Sequence[FactRecord],
    corpus: Sequence[FactRecord],
    tables: Sequence[PredictionTable],
) -> LeakageAudit:
    """Distribution shift when training-set texts are held out of the corpus.

    Overlap is exact text match after trimming. A corpus fully contained in
    the training set cannot be re-aggregated; that case comes back flagged
    (``held_out_empty``) instead of raising.
    """
    train_texts = {fact.text.strip() for fact in train_facts}
    overlapping = [i for i, fact in enumerate(corpus) if fact.text.strip() in train_texts]
    overlap_count = len(overlapping)
    overlap_fraction = overlap_count / len(corpus) if corpus else 0.0
    full = aggregate_distribution(tables)
    if overlap_count == len(corpus):
        return LeakageAudit(
            overlap_count=overlap_count,
            overlap_fraction=overlap_fraction,
            shifts=None,
            max_shift=None,
            held_out_empty=True,
            held_out_report=None,
        )
    overlap_set = set(overlapping)
    held_out_tables = [
        [row for i, row in enumerate(table) if i not in overlap_set] for table in tables
    ]
    held_out = aggregate_distribution(held_out_tables)
    shifts = {
        key: abs(full.cells[key].share.mean - held_out.cells[key].share.mean)
        for key in full.cells
    }
    return LeakageAudit(
        overlap_count=overlap_count,
        overlap_fraction=overlap_fraction,
        shifts=shifts,
        max_shift=max(shifts.values()),
        held_out_empty=False,
        held_out_report=held_out,
    )


def render_distribution(
    report: DistributionReport, audit: Optional[LeakageAudit] = None
) -> str:
    """Text table of shares and confidences per dimension and label."""
    lines = [
        f"corpus facts: {report.n_facts}, seed models: {report.n_seeds}",
        "",
        f"{'dimension':<20}{'label':<24}{'share %':>14}{'conf %':>14}",
    ]
    for dim in DIMENSIONS:
        for label in LABEL_SPACE[dim]:
            cell = report.cells[(dim, label)]
            share = f"{cell.share.mean:.1f}±{cell.share.std:.1f}"
            conf = (
                f"{cell.confidence.mean:.1f}±{cell.confidence.std:.1f}"
                if cell.confidence is not None
                else "-"
            )
            lines.append(f"{dim.value:<20}{label:<24}{share:>14}{conf:>14}")
    if audit is not None:
        lines.append("")
        lines.append(
            f"leakage audit: overlap_count={audit.overlap_count} "
            f"overlap_fraction={audit.overlap_fraction:.4f}"
        )
        if audit.held_out_empty:
            lines.append("leakage audit: corpus fully overlaps training set; no held-out report")
        elif audit.max_shift is not None:
            lines.append(f"leakage audit: max per-cell share shift = {audit.max_shift:.4f} pp")
    return "\n".join(lines) + "\n"
