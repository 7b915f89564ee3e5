"""
Evaluation and statistics: balanced accuracy, Shannon entropy and the
Wilcoxon rank-sum test
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import norm, rankdata, tiecorrect

logger = logging.getLogger(__name__)

SIGNIFICANCE_LEVEL = 0.05
# samples smaller than this on either side use exact enumeration
EXACT_RANK_SUM_LIMIT = 8
PROBABILITY_TOLERANCE = 1e-9


def shannon_entropy(probabilities: Sequence[float], base: float = 2.0) -> float:
    """-sum p log p with 0 log 0 = 0; base 2 unless told otherwise"""
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probabilities must be a non-empty vector")
    if np.any(p < 0) or abs(p.sum() - 1.0) > PROBABILITY_TOLERANCE:
        raise ValueError(f"invalid probability vector {p.tolist()}")
    nonzero = p[p > 0]
    return float(-np.sum(nonzero * np.log(nonzero)) / np.log(base)) + 0.0


def vote_entropy(vote_counts: np.ndarray) -> np.ndarray:
    """
    Per-row vote entropy (bits) of a committee vote matrix

    Args:
        vote_counts: n x c matrix, row i holding how many members voted each class

    Returns:
        Length-n vector of -sum (V/M) log2 (V/M)
    """
    votes = np.asarray(vote_counts, dtype=float)
    members = votes.sum(axis=1, keepdims=True)
    shares = np.divide(votes, members, out=np.zeros_like(votes), where=members > 0)
    logs = np.log2(shares, out=np.zeros_like(shares), where=shares > 0)
    return -(shares * logs).sum(axis=1) + 0.0


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int], n_classes: int) -> np.ndarray:
    """Rows are true classes, columns predicted classes"""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have equal length")
    if y_true.size == 0:
        raise ValueError("cannot evaluate an empty prediction set")
    if y_true.min() < 0 or y_pred.min() < 0 or max(y_true.max(), y_pred.max()) >= n_classes:
        raise ValueError(f"class ids must lie in 0..{n_classes - 1}")
    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(matrix, (y_true, y_pred), 1)
    return matrix


def balanced_accuracy(y_true: Sequence[int], y_pred: Sequence[int], n_classes: int) -> float:
    """
    Unweighted mean of per-class recall over the classes present in y_true

    For two classes this is (TP/(TP+FN) + TN/(TN+FP)) / 2.
    """
    matrix = confusion_matrix(y_true, y_pred, n_classes)
    support = matrix.sum(axis=1)
    present = support > 0
    if not present.any():
        raise ValueError("y_true contains no class")
    recall = np.diag(matrix)[present] / support[present]
    return float(recall.mean())


@dataclass(frozen=True)
class RankSumResult:
    statistic: float
    p_value: float
    significant: bool
    exact: bool


def _check_samples(sample_a: Sequence[float], sample_b: Sequence[float]):
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    return a, b


def _rank_sum_counts(doubled_ranks: np.ndarray, n_chosen: int) -> np.ndarray:
    """Ways to pick n_chosen of the ranks, indexed by the doubled rank sum"""
    counts = np.zeros((n_chosen + 1, int(doubled_ranks.sum()) + 1), dtype=float)
    counts[0, 0] = 1.0
    for seen, rank in enumerate(doubled_ranks, start=1):
        for chosen in range(min(seen, n_chosen), 0, -1):
            counts[chosen, rank:] += counts[chosen - 1, : counts.shape[1] - rank]
    return counts[n_chosen]


def exact_rank_sum_p(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    """
    Exact two-sided p-value under random assignment of the pooled mid-ranks

    Mid-ranks are half-integers, so the null distribution of the smaller
    sample's rank sum is counted over doubled ranks. Cost is polynomial in the
    sample sizes.
    """
    a, b = _check_samples(sample_a, sample_b)
    ranks = rankdata(np.concatenate([a, b]))
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    n_small = min(a.size, b.size)
    small = doubled[: a.size] if a.size == n_small else doubled[a.size:]
    # |R - E| is the same for either sample, so the smaller one is counted
    expected = n_small * (ranks.size + 1)
    observed = abs(int(small.sum()) - expected)

    counts = _rank_sum_counts(doubled, n_small)
    sums = np.arange(counts.size)
    extreme = np.abs(sums - expected) >= observed
    return float(counts[extreme].sum() / counts.sum())


def _approximate_rank_sum_p(a: np.ndarray, b: np.ndarray) -> float:
    ranks = rankdata(np.concatenate([a, b]))
    n_a, n_b = a.size, b.size
    u_a = ranks[:n_a].sum() - n_a * (n_a + 1) / 2.0
    correction = tiecorrect(ranks)
    if correction == 0:
        return 1.0
    sd = np.sqrt(correction * n_a * n_b * (n_a + n_b + 1) / 12.0)
    mean = n_a * n_b / 2.0
    z = max(abs(u_a - mean) - 0.5, 0.0) / sd
    return float(min(1.0, 2.0 * norm.sf(z)))


def wilcoxon_rank_sum(sample_a: Sequence[float], sample_b: Sequence[float]) -> RankSumResult:
    """
    Two-sided Wilcoxon rank-sum (Mann-Whitney U) test

    Ties get mid-ranks. When either sample has fewer than EXACT_RANK_SUM_LIMIT
    values the p-value is exact; otherwise the normal approximation with
    tie-corrected variance and continuity correction is used.

    Returns:
        RankSumResult with U of the first sample, the p-value and whether
        p < 0.05
    """
    a, b = _check_samples(sample_a, sample_b)
    ranks = rankdata(np.concatenate([a, b]))
    statistic = float(ranks[: a.size].sum() - a.size * (a.size + 1) / 2.0)

    exact = min(a.size, b.size) < EXACT_RANK_SUM_LIMIT
    if exact:
        p_value = exact_rank_sum_p(a, b)
    else:
        p_value = _approximate_rank_sum_p(a, b)
    p_value = float(np.clip(p_value, 0.0, 1.0))

    return RankSumResult(
        statistic=statistic,
        p_value=p_value,
        significant=p_value < SIGNIFICANCE_LEVEL,
        exact=exact,
    )
