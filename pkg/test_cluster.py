import numpy as np
import pytest
from scipy.spatial.distance import cdist

from cluster import Clustering, divrep_optimize, diversity, kmeans, representativeness


def _clustering(groups, features):
    """Clustering with fixed membership, centroids at the member means"""
    indices = np.concatenate([np.asarray(g) for g in groups])
    labels = np.concatenate([np.full(len(g), c) for c, g in enumerate(groups)])
    centroids = np.vstack([features[list(g)].mean(axis=0) for g in groups])
    return Clustering(k=len(groups), indices=indices, labels=labels, centroids=centroids, inertia=0.0, n_iter=0)


def _objective(features, j, members, anchors):
    return diversity(features, j, anchors) - representativeness(features, j, members)


class TestKMeans:
    def test_single_cluster_is_the_mean(self):
        points = np.random.default_rng(0).normal(size=(25, 3))
        result = kmeans(points, np.arange(25), 1, rng_seed=0)
        assert np.allclose(result.centroids[0], points.mean(axis=0))
        assert set(result.labels.tolist()) == {0}

    def test_one_cluster_per_point(self):
        points = np.random.default_rng(1).normal(size=(12, 2))
        result = kmeans(points, np.arange(12), 12, rng_seed=3)
        assert result.inertia == pytest.approx(0.0, abs=1e-12)
        assert sorted(np.bincount(result.labels).tolist()) == [1] * 12

    def test_separated_blobs(self, blobs):
        result = kmeans(blobs.features, np.arange(blobs.n_samples), 2, rng_seed=5)
        assignment = result.assignment
        for label in (0, 1):
            members = np.flatnonzero(blobs.labels == label)
            assert len({assignment[int(i)] for i in members}) == 1
        assert assignment[0] != assignment[blobs.n_samples - 1]

    def test_subset_indices(self, blobs):
        subset = np.arange(10, 40)
        result = kmeans(blobs.features, subset, 3, rng_seed=0)
        assert sorted(result.assignment) == subset.tolist()
        assert sum(result.members(c).size for c in range(3)) == 30

    def test_inertia_never_increases(self):
        rng = np.random.default_rng(7)
        for run in range(100):
            n = int(rng.integers(5, 40))
            points = rng.normal(size=(n, 2))
            k = int(rng.integers(1, min(n, 6) + 1))
            history = kmeans(points, np.arange(n), k, rng_seed=run).inertia_history
            assert all(later <= earlier + 1e-9 for earlier, later in zip(history, history[1:]))

    def test_no_empty_clusters_with_duplicates(self):
        points = np.vstack([np.zeros((8, 2)), np.ones((2, 2))])
        result = kmeans(points, np.arange(10), 4, rng_seed=0)
        assert np.bincount(result.labels, minlength=4).min() >= 1

    @pytest.mark.parametrize("k", [0, 11])
    def test_invalid_k(self, k):
        with pytest.raises(ValueError):
            kmeans(np.zeros((10, 2)), np.arange(10), k, rng_seed=0)


class TestScores:
    def test_two_points(self):
        features = np.array([[0.0, 0.0], [3.0, 4.0]])
        assert representativeness(features, 0, [0, 1]) == 5.0
        assert representativeness(features, 1, [0, 1]) == 5.0

    def test_singleton(self):
        assert representativeness(np.zeros((1, 2)), 0, [0]) == 0.0

    def test_colinear(self):
        features = np.array([[0.0], [1.0], [2.0]])
        assert representativeness(features, 1, [0, 1, 2]) == 1.0
        assert representativeness(features, 0, [0, 1, 2]) == 1.5

    def test_not_a_member(self):
        with pytest.raises(ValueError):
            representativeness(np.zeros((3, 1)), 2, [0, 1])

    def test_diversity(self):
        features = np.array([[0.0, 0.0], [3.0, 4.0], [10.0, 0.0], [4.0, 0.0]])
        assert diversity(features, 1, [0]) == 5.0
        assert diversity(features, 0, [0]) == 0.0
        assert diversity(features, 3, [0, 2]) == 4.0
        assert diversity(features, 3, []) == float("inf")


class TestDivRep:
    def test_single_point(self):
        features = np.array([[1.0, 1.0], [5.0, 5.0]])
        state = divrep_optimize(features, _clustering([[1]], features), [])
        assert state.selected == [1]
        assert state.n_rounds == 1
        assert state.converged

    def test_far_anchor_brute_force(self):
        rng = np.random.default_rng(2)
        features = np.vstack([rng.normal(size=(15, 2)), [[50.0, 0.0]]])
        members = list(range(15))
        state = divrep_optimize(features, _clustering([members], features), [15])
        best = max(members, key=lambda j: (_objective(features, j, members, [15]), -j))
        assert state.selected == [best]

    def test_no_anchors_picks_most_central(self):
        rng = np.random.default_rng(4)
        features = rng.normal(size=(20, 2))
        members = list(range(20))
        state = divrep_optimize(features, _clustering([members], features), [])
        assert state.selected == [min(members, key=lambda j: representativeness(features, j, members))]

    def test_symmetric_clusters(self):
        left = np.array([[-5.0, 0.0], [-4.0, 1.0], [-4.0, -1.0], [-3.0, 0.0]])
        features = np.vstack([left, left * [-1.0, 1.0], [[-4.0, 0.0], [4.0, 0.0]]])
        groups = [[0, 1, 2, 3], [4, 5, 6, 7]]
        state = divrep_optimize(features, _clustering(groups, features), [8, 9])
        a, b = state.selected
        assert np.allclose(features[a] * [-1.0, 1.0], features[b])

    def test_converged_selection_is_a_fixed_point(self):
        rng = np.random.default_rng(9)
        checked = 0
        for run in range(50):
            n = int(rng.integers(8, 41))
            features = rng.normal(size=(n, 2))
            n_anchors = int(rng.integers(1, 4))
            anchors = list(range(n_anchors))
            candidates = np.arange(n_anchors, n)
            k = int(rng.integers(1, min(4, candidates.size) + 1))
            clustering = kmeans(features, candidates, k, rng_seed=run)
            state = divrep_optimize(features, clustering, anchors, max_rounds=100)
            if not state.converged:
                continue
            checked += 1
            for position, members in enumerate(state.clusters):
                others = [s for p, s in enumerate(state.selected) if p != position]
                scores = [_objective(features, int(j), members, anchors + others) for j in members]
                chosen = _objective(features, state.selected[position], members, anchors + others)
                assert chosen >= max(scores) - 1e-9
        assert checked > 0

    def test_picks_are_cluster_members(self, blobs):
        clustering = kmeans(blobs.features, np.arange(20, 100), 5, rng_seed=1)
        state = divrep_optimize(blobs.features, clustering, np.arange(20))
        for pick, members in zip(state.selected, state.clusters):
            assert pick in members
        assert len(set(state.selected)) == 5
        assert state.anchors.size == 25

    def test_several_clusterings(self):
        features = np.arange(12, dtype=float).reshape(-1, 1)
        first = _clustering([[0, 1, 2], [3, 4, 5]], features)
        second = _clustering([[6, 7, 8, 9, 10, 11]], features)
        state = divrep_optimize(features, [first, second], [])
        assert len(state.selected) == 3
        assert [s in c for s, c in zip(state.selected, state.clusters)] == [True] * 3


def test_objective_uses_euclidean_distance():
    features = np.random.default_rng(0).normal(size=(6, 3))
    expected = cdist(features[[0]], features[1:])[0].mean()
    assert representativeness(features, 0, range(6)) == pytest.approx(expected)
