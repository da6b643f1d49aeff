"""Synthetic facts with embeddings that make every dimension separable.

Each fact's embedding is the concatenation of one-hot blocks, one block per
dimension, marking that fact's label index, plus small Gaussian noise. Every
head's task is therefore linearly separable by construction.
"""

from __future__ import annotations

import numpy as np

from factkit.embeddings import EmbeddingMatrix
from factkit.taxonomy import DIMENSIONS, LABEL_SPACE, Dimension, FactRecord, LabelSet

INVALIDITY_REASONS = ("No Fact", "Opinion", "Context Insufficient", "Unattributable", "Multiple Facts")
CONTENT_CATEGORIES = (
    "Preferences",
    "Characteristics",
    "Routine Activities",
    "Experience",
    "Goals and Plans",
    "Relationships",
    "Demographics",
    "Possessions",
)


def synthetic_labels(n_facts: int = 200, invalid_count: int = 60) -> list[LabelSet]:
    """Deterministic, invariant-satisfying labels with every label populated."""
    labels = []
    for i in range(invalid_count):
        labels.append(LabelSet.invalid(INVALIDITY_REASONS[i % len(INVALIDITY_REASONS)]))
    n_valid = n_facts - invalid_count
    time_cycle = ("Past", "Present", "Future", "Future", "None")
    followup_cycle = ("Yes", "Maybe", "None")
    referent_cycle = ("Self", "Other", "None")
    duration_cycle = ("Short-term", "Long-term", "None")
    future_seen = 0
    for i in range(n_valid):
        time = time_cycle[i % len(time_cycle)]
        if time == "Future":
            followup = followup_cycle[future_seen % len(followup_cycle)]
            future_seen += 1
        else:
            followup = "None"
        labels.append(
            LabelSet(
                main_category=CONTENT_CATEGORIES[i % len(CONTENT_CATEGORIES)],
                time=time,
                referent=referent_cycle[i % len(referent_cycle)],
                duration=duration_cycle[i % len(duration_cycle)],
                validity="Valid",
                invalidity_reason="None",
                followup=followup,
            )
        )
    return labels


def embed_labels(labelsets: list[LabelSet], noise: float = 0.02, seed: int = 7) -> np.ndarray:
    dim = sum(len(LABEL_SPACE[d]) for d in DIMENSIONS)
    rng = np.random.default_rng(seed)
    rows = rng.normal(0.0, noise, size=(len(labelsets), dim))
    for i, labels in enumerate(labelsets):
        offset = 0
        for d in DIMENSIONS:
            space = LABEL_SPACE[d]
            rows[i, offset + space.index(labels.get(d))] += 1.0
            offset += len(space)
    return rows


def synthetic_dataset(
    n_facts: int = 200, invalid_count: int = 60, noise: float = 0.02, seed: int = 7
) -> tuple[list[FactRecord], EmbeddingMatrix]:
    labelsets = synthetic_labels(n_facts, invalid_count)
    rows = embed_labels(labelsets, noise=noise, seed=seed)
    facts = [
        FactRecord(id=f"s{i:04d}", text=f"synthetic fact number {i}", labels=labels)
        for i, labels in enumerate(labelsets)
    ]
    matrix = EmbeddingMatrix(rows=rows, row_ids=tuple(f.id for f in facts))
    return facts, matrix
