import itertools

import numpy as np
import pytest

from triplex.cluster import (
    ClusterError,
    cluster_composition,
    density_composite,
    density_sweep,
    gmm_fit,
    hdbscan_fit,
    kmeans_fit,
    labels_with_noise_cluster,
    partition_score,
    partition_sweep,
)
from triplex.metrics import ari


def _blobs(rng, centers, per=30, scale=0.05):
    pts, labels = [], []
    for i, c in enumerate(centers):
        pts.append(rng.normal(loc=c, scale=scale, size=(per, len(c))))
        labels += [i] * per
    return np.vstack(pts), np.array(labels)


# ---------------------------------------------------------------- kmeans

def test_kmeans_k1_is_global_mean():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(25, 3))
    result, centers = kmeans_fit(X, 1, seed=0)
    assert np.allclose(centers[0], X.mean(axis=0))
    assert result.inertia == pytest.approx(((X - X.mean(axis=0)) ** 2).sum())
    assert (result.labels == 0).all()


def test_kmeans_exact_fit():
    X = np.array([[0.0, 0.0], [0.0, 0.1], [5.0, 5.0], [5.0, 5.1]])
    result, _ = kmeans_fit(X, 2, seed=1)
    assert result.labels[0] == result.labels[1]
    assert result.labels[2] == result.labels[3]
    assert result.labels[0] != result.labels[2]


def brute_best_inertia(X, k):
    """Exact optimum by enumerating every assignment of points to k groups."""
    n = len(X)
    best = np.inf
    for assignment in itertools.product(range(k), repeat=n):
        if len(set(assignment)) != k:
            continue
        inertia = 0.0
        for j in range(k):
            members = X[[i for i in range(n) if assignment[i] == j]]
            inertia += ((members - members.mean(axis=0)) ** 2).sum()
        best = min(best, inertia)
    return best


def test_kmeans_matches_exhaustive_optimum():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(6, 2))
    for k in (2, 3):
        result, _ = kmeans_fit(X, k, seed=3)
        assert result.inertia == pytest.approx(brute_best_inertia(X, k), abs=1e-9)


def test_kmeans_objective_monotone():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(80, 4))
    result, _ = kmeans_fit(X, 5, seed=5)
    h = result.objective_history
    assert all(h[i + 1] <= h[i] + 1e-9 for i in range(len(h) - 1))


def test_kmeans_deterministic_and_seed_sensitive():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(40, 3))
    r1, c1 = kmeans_fit(X, 4, seed=9)
    r2, c2 = kmeans_fit(X, 4, seed=9)
    assert np.array_equal(r1.labels, r2.labels) and np.array_equal(c1, c2)


def test_kmeans_k_bounds():
    X = np.zeros((3, 2))
    with pytest.raises(ClusterError):
        kmeans_fit(X, 0, seed=0)
    with pytest.raises(ClusterError):
        kmeans_fit(X, 4, seed=0)


def test_kmeans_handles_duplicate_points():
    X = np.array([[1.0, 1.0]] * 5 + [[2.0, 2.0]] * 5)
    result, _ = kmeans_fit(X, 2, seed=0)
    assert result.inertia == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------- gmm

def test_gmm_recovers_blobs():
    rng = np.random.default_rng(10)
    X, truth = _blobs(rng, [(0, 0), (4, 0), (0, 4)], per=40, scale=0.2)
    result = gmm_fit(X, 3, seed=10)
    assert ari(truth, result.labels) == pytest.approx(1.0)


def test_gmm_responsibilities_are_a_distribution():
    rng = np.random.default_rng(11)
    X, _ = _blobs(rng, [(0, 0), (3, 3)], per=25, scale=0.3)
    result = gmm_fit(X, 2, seed=1)
    assert result.responsibilities.shape == (50, 2)
    assert np.allclose(result.responsibilities.sum(axis=1), 1.0, atol=1e-9)
    assert (result.responsibilities >= 0).all()


def test_gmm_loglik_nondecreasing():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(60, 3))
    result = gmm_fit(X, 4, seed=2, n_init=2)
    h = result.objective_history
    assert all(h[i + 1] >= h[i] - 1e-7 for i in range(len(h) - 1))


def test_gmm_deterministic():
    rng = np.random.default_rng(13)
    X = rng.normal(size=(40, 2))
    a = gmm_fit(X, 3, seed=6, n_init=3)
    b = gmm_fit(X, 3, seed=6, n_init=3)
    assert np.array_equal(a.labels, b.labels)
    assert a.log_likelihood == b.log_likelihood


def test_gmm_k_bounds():
    with pytest.raises(ClusterError):
        gmm_fit(np.zeros((3, 2)), 5, seed=0)


# ---------------------------------------------------------------- hdbscan

def test_hdbscan_two_blobs():
    rng = np.random.default_rng(20)
    X, truth = _blobs(rng, [(0, 0), (10, 10)], per=30, scale=0.3)
    result = hdbscan_fit(X, min_cluster_size=5)
    assert result.n_clusters == 2
    clustered = result.labels != -1
    assert result.noise_fraction < 0.2
    assert ari(truth[clustered], result.labels[clustered]) == pytest.approx(1.0)


def test_hdbscan_isolated_points_are_noise():
    rng = np.random.default_rng(21)
    X, _ = _blobs(rng, [(0, 0), (10, 10)], per=25, scale=0.2)
    outliers = np.array([[100.0, -100.0], [-100.0, 100.0], [50.0, 50.0]])
    result = hdbscan_fit(np.vstack([X, outliers]), min_cluster_size=5)
    assert (result.labels[-3:] == -1).all()
    assert result.n_clusters == 2


def test_hdbscan_uniform_noise():
    rng = np.random.default_rng(22)
    X = rng.uniform(size=(100, 10))  # high-dim uniform: no density structure
    result = hdbscan_fit(X, min_cluster_size=25)
    assert result.n_clusters <= 1


def test_hdbscan_identical_points():
    X = np.ones((12, 3))
    result = hdbscan_fit(X, min_cluster_size=3)
    assert result.n_clusters == 1
    assert result.noise_fraction == 0.0
    assert (result.labels == 0).all()


def test_hdbscan_three_blobs_min_samples():
    rng = np.random.default_rng(23)
    X, truth = _blobs(rng, [(0, 0), (8, 0), (0, 8)], per=20, scale=0.25)
    result = hdbscan_fit(X, min_cluster_size=5, min_samples=3)
    assert result.n_clusters == 3
    clustered = result.labels != -1
    assert ari(truth[clustered], result.labels[clustered]) == pytest.approx(1.0)


def test_hdbscan_validation():
    with pytest.raises(ClusterError):
        hdbscan_fit(np.zeros((5, 2)), min_cluster_size=1)
    with pytest.raises(ClusterError):
        hdbscan_fit(np.zeros((3, 2)), min_cluster_size=5)


def test_hdbscan_deterministic():
    rng = np.random.default_rng(24)
    X, _ = _blobs(rng, [(0, 0), (5, 5)], per=20, scale=0.4)
    a = hdbscan_fit(X, min_cluster_size=5)
    b = hdbscan_fit(X, min_cluster_size=5)
    assert np.array_equal(a.labels, b.labels)


# ---------------------------------------------------------------- sweeps

def test_partition_score_and_composite():
    assert partition_score(0.4, 0.6) == pytest.approx(0.5)
    assert density_composite(0.8, 0.6, 0.2) == pytest.approx(0.8 + 0.3 - 0.1)
    # all-noise case: ari/nmi of the single pseudo-cluster vs varied truth
    assert density_composite(0.0, 0.0, 1.0) == pytest.approx(-0.5)


def test_labels_with_noise_cluster():
    labels = np.array([0, 1, -1, 1, -1])
    out = labels_with_noise_cluster(labels)
    assert list(out) == [0, 1, 2, 1, 2]
    clean = np.array([0, 1, 1])
    assert labels_with_noise_cluster(clean) is clean


def test_partition_sweep_recovers_planted_k():
    rng = np.random.default_rng(30)
    X, truth = _blobs(rng, [(i * 6, 0) for i in range(5)], per=15, scale=0.2)
    for algorithm in ("kmeans", "gmm"):
        outcome = partition_sweep(X, truth, algorithm, k_range=range(3, 8), seed=42)
        assert outcome.best_config[1] == 5
        assert outcome.best_score == pytest.approx(1.0)
        assert len(outcome.table) == 5
        assert [r.param for r in outcome.table] == [3, 4, 5, 6, 7]
        assert outcome.table[0].seed == 42 ^ 0 and outcome.table[2].seed == 42 ^ 2


def test_partition_sweep_tie_prefers_smallest_k():
    # both k=2 fits score identically on 2 planted blobs duplicated in range
    rng = np.random.default_rng(31)
    X, truth = _blobs(rng, [(0, 0), (9, 9)], per=20, scale=0.1)
    outcome = partition_sweep(X, truth, "kmeans", k_range=[2, 2], seed=1)
    assert outcome.best_config[1] == 2
    assert outcome.best_config[2] == 1 ^ 0  # first (smallest-index) winner kept


def test_partition_sweep_records_failures():
    X = np.zeros((4, 2))
    outcome = partition_sweep(X, [0, 0, 1, 1], "kmeans", k_range=[2, 9], seed=0)
    assert outcome.table[1].failed and "exceeds" in outcome.table[1].error
    assert not outcome.table[0].failed


def test_density_sweep():
    rng = np.random.default_rng(32)
    X, truth = _blobs(rng, [(0, 0), (10, 0), (0, 10)], per=25, scale=0.3)
    outcome = density_sweep(X, truth, sizes=(5, 10, 60))
    assert len(outcome.table) == 3
    best_row = max((r for r in outcome.table if not r.failed), key=lambda r: r.score)
    assert outcome.best_score == pytest.approx(best_row.score)
    assert outcome.best_score > 0.9
    assert outcome.best_config[0] == "hdbscan"


def test_density_sweep_empty_sizes():
    with pytest.raises(ClusterError):
        density_sweep(np.zeros((5, 2)), [0] * 5, sizes=())


# ---------------------------------------------------------------- composition

def test_cluster_composition_basic():
    labels = [0, 0, 0, 1, 1]
    truth = ["cs", "cs", "math", "bio", "bio"]
    rows, overall = cluster_composition(labels, truth)
    assert rows[0].counts == {"cs": 2, "math": 1}
    assert rows[0].dominant == "cs" and rows[0].purity == pytest.approx(2 / 3)
    assert rows[1].purity == pytest.approx(1.0)
    assert overall == pytest.approx((2 + 2) / 5)


def test_cluster_composition_purity_ratio():
    # 771 of 807 points dominant -> 0.955 at 3 decimals
    labels = [0] * 807
    truth = ["cs"] * 771 + ["math"] * 36
    rows, overall = cluster_composition(labels, truth)
    assert f"{rows[0].purity:.3f}" == "0.955"
    assert overall == pytest.approx(771 / 807)


def test_cluster_composition_empty():
    rows, overall = cluster_composition([], [])
    assert rows == [] and overall == 0.0
