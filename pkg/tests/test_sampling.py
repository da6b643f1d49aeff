import itertools

import numpy as np
import pytest

from factkit.errors import AlignmentError, KTooLarge
from factkit.sampling import KMeansModel, cluster_sample, kmeans_fit, recompute_inertia
from factkit.taxonomy import FactRecord


def blobs(seed=0, centers=((0.0, 0.0), (5.0, 5.0)), per=5, spread=0.1):
    rng = np.random.default_rng(seed)
    parts = [rng.normal(c, spread, size=(per, 2)) for c in centers]
    return np.vstack(parts)


def test_k_equals_n_gives_zero_inertia():
    rng = np.random.default_rng(1)
    points = rng.normal(size=(8, 3))
    model = kmeans_fit(points, k=8, seed=4)
    assert model.inertia == pytest.approx(0.0, abs=1e-12)
    assert sorted(model.assignments.tolist()) == sorted(range(8))


def test_two_blobs_match_bruteforce_partition():
    points = blobs(seed=2)
    model = kmeans_fit(points, k=2, seed=3)

    # brute-force oracle: best of all 2-partitions by summed squared distance
    best_cost, best_assignment = None, None
    n = len(points)
    for bits in itertools.product([0, 1], repeat=n):
        if len(set(bits)) < 2:
            continue
        cost = 0.0
        for side in (0, 1):
            members = points[[i for i in range(n) if bits[i] == side]]
            centroid = members.mean(axis=0)
            cost += ((members - centroid) ** 2).sum()
        if best_cost is None or cost < best_cost:
            best_cost, best_assignment = cost, bits

    # same partition up to cluster relabeling
    ours = model.assignments.tolist()
    oracle = list(best_assignment)
    groups_ours = [frozenset(i for i, c in enumerate(ours) if c == v) for v in set(ours)]
    groups_oracle = [frozenset(i for i, c in enumerate(oracle) if c == v) for v in set(oracle)]
    assert set(groups_ours) == set(groups_oracle)
    assert model.inertia == pytest.approx(best_cost, rel=1e-9)

    # centroids are the blob means
    for cluster in (0, 1):
        members = points[model.assignments == cluster]
        assert np.allclose(model.centroids[cluster], members.mean(axis=0), atol=1e-9)


def test_fixed_seed_is_bitwise_deterministic():
    points = blobs(seed=5, per=20)
    a = kmeans_fit(points, k=4, seed=11)
    b = kmeans_fit(points, k=4, seed=11)
    assert np.array_equal(a.centroids, b.centroids)
    assert np.array_equal(a.assignments, b.assignments)
    assert a.inertia == b.inertia
    assert a.inertia_history == b.inertia_history


def test_inertia_history_non_increasing_random_datasets():
    for trial in range(25):
        rng = np.random.default_rng(trial)
        points = rng.normal(size=(rng.integers(10, 50), rng.integers(2, 6)))
        k = int(rng.integers(2, min(8, len(points))))
        model = kmeans_fit(points, k=k, seed=trial)
        history = model.inertia_history
        assert all(a >= b - 1e-9 for a, b in zip(history, history[1:]))


def test_inertia_matches_recomputation():
    points = blobs(seed=8, per=15)
    model = kmeans_fit(points, k=3, seed=9)
    assert model.inertia == pytest.approx(recompute_inertia(points, model), rel=1e-9)


def test_k_too_large():
    with pytest.raises(KTooLarge):
        kmeans_fit(np.zeros((3, 2)), k=4, seed=0)


def test_degenerate_identical_points():
    points = np.ones((6, 2))
    model = kmeans_fit(points, k=3, seed=0)
    assert model.inertia == pytest.approx(0.0, abs=1e-12)
    assert model.centroids.shape == (3, 2)
    assert np.allclose(model.centroids, 1.0)


# --- cluster sampling ---


def facts_of(n):
    return [FactRecord(id=f"f{i}", text=f"text {i}") for i in range(n)]


def model_with_assignments(assignments, k):
    assignments = np.asarray(assignments)
    return KMeansModel(
        k=k,
        centroids=np.zeros((k, 2)),
        assignments=assignments,
        inertia=0.0,
        inertia_history=(0.0,),
        n_iter=1,
    )


def test_cluster_sample_cap_arithmetic():
    # cluster sizes 5, 2, 0
    model = model_with_assignments([0, 0, 0, 0, 0, 1, 1], k=3)
    sampled = cluster_sample(facts_of(7), model, cap=3, seed=1)
    assert len(sampled) == 5  # 3 + 2 + 0


def test_cluster_sample_noop_when_under_cap():
    model = model_with_assignments([0, 1, 1, 2], k=3)
    facts = facts_of(4)
    sampled = cluster_sample(facts, model, cap=3, seed=1)
    assert {f.id for f in sampled} == {f.id for f in facts}


def test_cluster_sample_sorted_by_cluster_then_index():
    model = model_with_assignments([2, 0, 1, 0, 2, 1], k=3)
    sampled = cluster_sample(facts_of(6), model, cap=3, seed=5)
    order = [f.id for f in sampled]
    assert order == ["f1", "f3", "f2", "f5", "f0", "f4"]


def test_cluster_sample_deterministic():
    model = model_with_assignments([0] * 10 + [1] * 10, k=2)
    facts = facts_of(20)
    a = cluster_sample(facts, model, cap=3, seed=42)
    b = cluster_sample(facts, model, cap=3, seed=42)
    assert [f.id for f in a] == [f.id for f in b]
    c = cluster_sample(facts, model, cap=3, seed=43)
    assert [f.id for f in a] != [f.id for f in c]


def test_cluster_sample_output_size_formula():
    rng = np.random.default_rng(17)
    assignments = rng.integers(0, 7, size=60)
    model = model_with_assignments(assignments, k=7)
    for cap in (1, 2, 3, 5):
        sampled = cluster_sample(facts_of(60), model, cap=cap, seed=2)
        expected = sum(
            min(cap, int((assignments == c).sum())) for c in range(7)
        )
        assert len(sampled) == expected


def test_cluster_sample_alignment_error():
    model = model_with_assignments([0, 1], k=2)
    with pytest.raises(AlignmentError):
        cluster_sample(facts_of(3), model, cap=3, seed=0)


def test_cluster_sample_draws_without_replacement():
    model = model_with_assignments([0] * 8, k=1)
    sampled = cluster_sample(facts_of(8), model, cap=5, seed=9)
    assert len(sampled) == 5
    assert len({f.id for f in sampled}) == 5
