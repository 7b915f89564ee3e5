import itertools
import math

import numpy as np
import pytest
from scipy.stats import rankdata

from metrics import (
    balanced_accuracy,
    confusion_matrix,
    exact_rank_sum_p,
    shannon_entropy,
    vote_entropy,
    wilcoxon_rank_sum,
)


class TestEntropy:
    @pytest.mark.parametrize("probabilities, expected", [
        ((0.5, 0.5), 1.0),
        ((1.0, 0.0), 0.0),
        ((0.25, 0.75), 0.81128),
    ])
    def test_bits(self, probabilities, expected):
        assert shannon_entropy(probabilities) == pytest.approx(expected, abs=1e-5)

    def test_natural_log(self):
        assert shannon_entropy([0.5, 0.5], base=np.e) == pytest.approx(np.log(2))

    @pytest.mark.parametrize("probabilities", [[], [0.6, 0.6], [-0.1, 1.1]])
    def test_invalid(self, probabilities):
        with pytest.raises(ValueError):
            shannon_entropy(probabilities)

    @pytest.mark.parametrize("n_classes", [2, 3, 5, 20])
    def test_uniform_is_the_maximum(self, n_classes):
        assert shannon_entropy(np.full(n_classes, 1.0 / n_classes)) == pytest.approx(math.log2(n_classes))
        rng = np.random.default_rng(n_classes)
        for _ in range(50):
            p = rng.dirichlet(np.ones(n_classes))
            assert shannon_entropy(p) < math.log2(n_classes)

    def test_vote_entropy(self):
        scores = vote_entropy(np.array([[5, 5], [8, 2], [10, 0]]))
        assert scores[0] == 1.0
        assert scores[1] == pytest.approx(0.7219, abs=1e-4)
        assert scores[2] == 0.0


class TestBalancedAccuracy:
    def test_binary_example(self):
        # TP=50 FN=10 TN=30 FP=10 with class 1 as positive
        y_true = [1] * 60 + [0] * 40
        y_pred = [1] * 50 + [0] * 10 + [0] * 30 + [1] * 10
        assert balanced_accuracy(y_true, y_pred, 2) == pytest.approx(0.79167, abs=1e-5)

    def test_perfect(self):
        assert balanced_accuracy([0, 1, 2, 2], [0, 1, 2, 2], 3) == 1.0

    def test_constant_predictor(self):
        assert balanced_accuracy([0, 0, 0, 1], [0, 0, 0, 0], 2) == 0.5

    def test_absent_class_is_skipped(self):
        assert balanced_accuracy([0, 0, 1], [0, 2, 1], 3) == 0.75

    def test_relabeling_classes(self):
        rng = np.random.default_rng(11)
        y_true = rng.integers(0, 4, size=200)
        y_pred = np.where(rng.random(200) < 0.7, y_true, rng.integers(0, 4, size=200))
        permutation = np.array([2, 0, 3, 1])
        assert balanced_accuracy(permutation[y_true], permutation[y_pred], 4) == pytest.approx(
            balanced_accuracy(y_true, y_pred, 4)
        )

    def test_confusion_matrix(self):
        matrix = confusion_matrix([0, 0, 1, 1], [0, 1, 1, 1], 2)
        assert matrix.tolist() == [[1, 1], [0, 2]]

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            balanced_accuracy([0, 1], [0], 2)


class TestRankSum:
    def test_identical_samples(self):
        result = wilcoxon_rank_sum([1, 2, 3], [1, 2, 3])
        assert result.p_value == pytest.approx(1.0)
        assert not result.significant

    def test_separated_small_samples(self):
        result = wilcoxon_rank_sum([1, 2, 3], [10, 11, 12])
        assert result.exact
        assert result.p_value == pytest.approx(0.1)
        assert result.statistic == 0.0

    def test_interleaved_samples(self):
        result = wilcoxon_rank_sum([1, 3, 5, 7, 9, 11, 13, 15], [2, 4, 6, 8, 10, 12, 14, 16])
        assert not result.exact
        assert result.p_value > 0.5

    def test_approximation_close_to_enumeration(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = rng.normal(size=8)
            b = rng.normal(loc=rng.uniform(0, 1.5), size=8)
            approximate = wilcoxon_rank_sum(a, b)
            assert not approximate.exact
            assert abs(approximate.p_value - exact_rank_sum_p(a, b)) <= 0.02

    @pytest.mark.parametrize("sizes", [(3, 5), (7, 60), (8, 8), (30, 45)])
    def test_symmetric_in_its_arguments(self, sizes):
        rng = np.random.default_rng(sum(sizes))
        a = np.round(rng.normal(size=sizes[0]), 1)
        b = np.round(rng.normal(loc=0.4, size=sizes[1]), 1)
        assert wilcoxon_rank_sum(a, b).p_value == pytest.approx(wilcoxon_rank_sum(b, a).p_value, abs=1e-12)

    def test_small_side_is_exact_against_a_large_one(self):
        rng = np.random.default_rng(2)
        result = wilcoxon_rank_sum(rng.normal(size=7), rng.normal(size=60))
        assert result.exact
        assert 0.0 < result.p_value <= 1.0

    @pytest.mark.parametrize("a, b", [
        ([1, 2, 2, 3], [2, 3, 3, 4, 5]),
        ([0.5, 0.5, 0.5], [0.5, 0.7, 0.9, 0.9]),
        ([4, 1, 7], [2, 2, 6, 8, 8, 9]),
    ])
    def test_exact_counts_match_brute_force_with_ties(self, a, b):
        ranks = rankdata(np.concatenate([a, b]).astype(float))
        expected = len(a) * (ranks.size + 1) / 2.0
        observed = abs(ranks[: len(a)].sum() - expected)
        sums = [ranks[list(chosen)].sum() for chosen in itertools.combinations(range(ranks.size), len(a))]
        brute = sum(abs(s - expected) >= observed - 1e-9 for s in sums) / len(sums)
        assert exact_rank_sum_p(a, b) == pytest.approx(brute, abs=1e-12)

    def test_large_separated_samples_are_significant(self):
        result = wilcoxon_rank_sum(np.full(50, 0.9), np.full(50, 0.8))
        assert result.significant
        assert result.p_value < 1e-10

    def test_all_tied(self):
        assert wilcoxon_rank_sum(np.full(30, 0.5), np.full(30, 0.5)).p_value == 1.0

    def test_empty_sample(self):
        with pytest.raises(ValueError):
            wilcoxon_rank_sum([], [1.0])
