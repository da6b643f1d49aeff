"""Cluster-based diversity sampling: K-Means, then capped per-cluster draws.

Rare but distinct kinds of facts are easy to lose with uniform sampling, so
candidate facts are clustered over their normalized embeddings and at most a
fixed number of facts is drawn per cluster.

K-Means is Lloyd's algorithm with k-means++ seeding (single proposal per
step). Distances are squared Euclidean, which on L2-normalized rows ranks
identically to cosine distance. Clusters that empty out during an update are
re-seeded with the point currently farthest from its assigned centroid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import AlignmentError, KTooLarge
from .prng import Xoshiro256StarStar
from .taxonomy import FactRecord
from .embeddings import EmbeddingMatrix

DEFAULT_K = 1000
DEFAULT_CAP = 3
DEFAULT_MAX_ITER = 100
DEFAULT_TOL = 1e-4

_CHUNK = 8192  # points per distance block, bounds peak memory


@dataclass(frozen=True)
class KMeansModel:
    """Fitted centroids, per-point assignments, and the final inertia.

    ``inertia_history`` records the inertia after every assignment step; it
    is non-increasing over Lloyd iterations.
    """

    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    inertia_history: tuple[float, ...]
    n_iter: int


def _as_rows(data: Union[EmbeddingMatrix, np.ndarray]) -> np.ndarray:
    rows = data.rows if isinstance(data, EmbeddingMatrix) else np.asarray(data)
    return rows.astype(np.float64)


def _assign(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid per point (ties to the lowest index) and its squared distance."""
    n = points.shape[0]
    assignments = np.empty(n, dtype=np.int64)
    best = np.empty(n, dtype=np.float64)
    c_sq = np.einsum("ij,ij->i", centroids, centroids)
    for start in range(0, n, _CHUNK):
        block = points[start : start + _CHUNK]
        d2 = (
            np.einsum("ij,ij->i", block, block)[:, None]
            - 2.0 * block @ centroids.T
            + c_sq[None, :]
        )
        np.maximum(d2, 0.0, out=d2)
        assignments[start : start + _CHUNK] = np.argmin(d2, axis=1)
        best[start : start + _CHUNK] = np.take_along_axis(
            d2, assignments[start : start + _CHUNK, None], axis=1
        )[:, 0]
    return assignments, best


def _kmeans_plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0.0:
            chosen[i] = rng.choice(n, p=d2 / total)
        else:
            # All remaining mass is zero (duplicate points); any point works.
            chosen[i] = rng.integers(n)
        d2 = np.minimum(d2, np.sum((points - points[chosen[i]]) ** 2, axis=1))
    return points[chosen].copy()


def kmeans_fit(
    data: Union[EmbeddingMatrix, np.ndarray],
    k: int,
    seed: int,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> KMeansModel:
    """Fit K-Means with a fixed seed; the result is bitwise reproducible.

    Stops when the largest centroid movement falls below ``tol`` or after
    ``max_iter`` Lloyd iterations. All points being identical with ``k > 1``
    is allowed and yields duplicate centroids.
    """
    points = _as_rows(data)
    n = points.shape[0]
    if k < 1:
        raise ValueError("k must be positive")
    if k > n:
        raise KTooLarge(f"k={k} exceeds the {n} available points")
    if max_iter < 1:
        raise ValueError("max_iter must be positive")

    rng = np.random.default_rng(seed)
    centroids = _kmeans_plus_plus(points, k, rng)
    history: list[float] = []
    n_iter = 0
    for _ in range(max_iter):
        n_iter += 1
        assignments, best = _assign(points, centroids)
        history.append(float(best.sum()))

        sums = np.zeros_like(centroids)
        np.add.at(sums, assignments, points)
        counts = np.bincount(assignments, minlength=k).astype(np.float64)
        occupied = counts > 0
        updated = centroids.copy()
        updated[occupied] = sums[occupied] / counts[occupied, None]

        empty = np.flatnonzero(~occupied)
        if empty.size:
            distances = best.copy()
            for cluster in empty:
                farthest = int(np.argmax(distances))
                updated[cluster] = points[farthest]
                distances[farthest] = -np.inf

        movement = float(np.sqrt(((updated - centroids) ** 2).sum(axis=1)).max())
        centroids = updated
        if movement < tol:
            break

    assignments, best = _assign(points, centroids)
    history.append(float(best.sum()))
    return KMeansModel(
        k=k,
        centroids=centroids,
        assignments=assignments,
        inertia=float(best.sum()),
        inertia_history=tuple(history),
        n_iter=n_iter,
    )


def recompute_inertia(data: Union[EmbeddingMatrix, np.ndarray], model: KMeansModel) -> float:
    """Sum of squared distances from each point to its assigned centroid."""
    points = _as_rows(data)
    deltas = points - model.centroids[model.assignments]
    return float(np.einsum("ij,ij->", deltas, deltas))


def cluster_sample(
    facts: Sequence[FactRecord],
    model: KMeansModel,
    cap: int = DEFAULT_CAP,
    seed: int = 0,
) -> list[FactRecord]:
    """Draw up to ``cap`` facts per cluster, without replacement.

    Facts must align positionally with ``model.assignments``. Clusters are
    visited in index order with one seeded xoshiro256** stream; the output
    is sorted by (cluster index, original index) so a fixed seed gives a
    fixed result.
    """
    if len(facts) != len(model.assignments):
        raise AlignmentError(
            f"{len(facts)} facts but {len(model.assignments)} assignments"
        )
    if cap < 1:
        raise ValueError("cap must be positive")
    members: dict[int, list[int]] = {}
    for index, cluster in enumerate(model.assignments):
        members.setdefault(int(cluster), []).append(index)

    rng = Xoshiro256StarStar(seed)
    picked: list[tuple[int, int]] = []
    for cluster in range(model.k):
        indices = members.get(cluster, [])
        if len(indices) <= cap:
            chosen = indices
        else:
            chosen = rng.sample_without_replacement(indices, cap)
        picked.extend((cluster, i) for i in chosen)
    picked.sort()
    return [facts[i] for _, i in picked]
