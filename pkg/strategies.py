"""
Query strategies

Every strategy answers the same question: given the current pool and a batch
budget, which unlabeled rows should be labeled next.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from cluster import DEFAULT_MAX_ROUNDS, divrep_optimize, kmeans
from dataset import PoolState
from metrics import vote_entropy
from tree import LeafStats, TreeParams, compute_leaf_stats, fit_tree

logger = logging.getLogger(__name__)


class StrategyUnfittable(RuntimeError):
    """A model-based strategy cannot fit its model on the current labeled set"""


class StrategyKind(Enum):
    """Strategy identifiers; values double as CLI names"""
    RS = "rs"
    CTAL_RS = "ctal-rs"
    CTAL_DIVREP = "ctal-divrep"
    IRDM = "irdm"
    QBC = "qbc"


STRATEGY_LABELS = {
    StrategyKind.RS: "RS",
    StrategyKind.CTAL_RS: "CT-AL (RS)",
    StrategyKind.CTAL_DIVREP: "CT-AL (div-rep)",
    StrategyKind.IRDM: "iRDM",
    StrategyKind.QBC: "QBC",
}

# iRDM recomputes a whole training set per budget instead of adding batches
SEQUENTIAL_STRATEGIES = {
    StrategyKind.RS,
    StrategyKind.CTAL_RS,
    StrategyKind.CTAL_DIVREP,
    StrategyKind.QBC,
}


class AllocationScope(Enum):
    """Where the per-leaf density/entropy ratio is normalized"""
    PER_GROUP = "per_group"
    GLOBAL = "global"


class InLeafMode(Enum):
    RANDOM = "random_in_leaf"
    DIVREP = "divrep_in_leaf"


def valid_strategy_names() -> List[str]:
    return [kind.value for kind in StrategyKind]


class StrategyConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: StrategyKind
    tree_params: TreeParams = Field(default_factory=TreeParams, description="Selection / committee tree")
    qbc_committee_size: int = Field(10, ge=1, description="Committee members for QBC")
    divrep_max_rounds: int = Field(DEFAULT_MAX_ROUNDS, ge=1, description="Cap on div-rep sweeps")
    impurity_weight: float = Field(3.0, gt=0, description="Multiplier favouring impure leaves in the group split")
    allocation_scope: AllocationScope = AllocationScope.PER_GROUP

    @model_validator(mode="after")
    def check_committee(self) -> "StrategyConfig":
        if self.kind is StrategyKind.QBC and self.qbc_committee_size < 2:
            raise ValueError("QBC needs a committee of at least 2")
        return self

    @property
    def id(self) -> str:
        return self.kind.value

    @property
    def label(self) -> str:
        return STRATEGY_LABELS[self.kind]


@dataclass(frozen=True, eq=False)
class SelectionContext:
    """
    Read-only data a strategy may look at

    features are raw values for trees; distance_features are standardized on
    the training pool for k-means and the diversity / representativeness terms.
    """

    features: np.ndarray
    distance_features: np.ndarray
    labels: np.ndarray
    n_classes: int


@dataclass(eq=False)
class BudgetAllocation:
    per_leaf: Dict[int, int]
    n_pure_group: int
    n_impure_group: int
    scope: AllocationScope = AllocationScope.PER_GROUP
    # leaf ids in the order surplus labels are handed out
    redistribution_order: List[int] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(self.per_leaf.values())


def random_select(pool: PoolState, k: int, rng_seed: int) -> List[int]:
    """min(k, |unlabeled|) unlabeled rows drawn uniformly without replacement"""
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    unlabeled = pool.unlabeled
    size = min(k, unlabeled.size)
    if size == 0:
        return []
    rng = np.random.default_rng(rng_seed)
    return [int(i) for i in rng.choice(unlabeled, size=size, replace=False)]


def _group_split(n_pure_leaves: int, n_impure_leaves: int, n_act: int, impurity_weight: float):
    if n_impure_leaves == 0:
        return n_act, 0
    if n_pure_leaves == 0:
        return 0, n_act
    ratio = max(1, n_impure_leaves) / max(1, n_pure_leaves)
    n_pure = int(math.floor(n_act / (1.0 + impurity_weight * ratio) + 0.5))
    return n_pure, n_act - n_pure


def _largest_remainder(shares: np.ndarray, total: int) -> np.ndarray:
    """Integers summing to total, each within one of its real-valued share"""
    if shares.size == 0:
        return np.zeros(0, dtype=np.int64)
    # drop last-ulp noise so that scaled weights round identically
    shares = np.round(shares, 9)
    whole = np.floor(shares).astype(np.int64)
    remaining = int(total - whole.sum())
    if remaining > 0:
        order = np.lexsort((np.arange(shares.size), -(shares - whole)))
        whole[order[:remaining]] += 1
    return whole


def _normalized(weights: np.ndarray) -> np.ndarray:
    total = weights.sum()
    if total <= 0:
        return np.zeros_like(weights)
    return weights / total


def _ranking_weights(stats: Sequence[LeafStats]) -> np.ndarray:
    """sqrt(density * weight) with impure weights in bits, whatever base the stats used"""
    bits = [s.weight if s.is_pure else s.weight * math.log2(s.log_base) for s in stats]
    return np.sqrt(np.array([s.density for s in stats], dtype=float) * np.array(bits, dtype=float))


def allocate_budget(
    leaf_stats: Sequence[LeafStats],
    n_act: int,
    impurity_weight: float = 3.0,
    scope: AllocationScope = AllocationScope.PER_GROUP,
) -> BudgetAllocation:
    """
    Number of labels to draw from every leaf

    The budget is first split between pure and impure leaves (impure leaves get
    impurity_weight times the per-leaf share), then shared inside each group in
    proportion to sqrt(density * weight). Shares are rounded by largest
    remainder, clamped to each leaf's unlabeled count, and any surplus is
    handed out one label at a time to leaves with room left, in descending
    order of sqrt(density * weight) with entropies taken in bits, then by
    leaf id.

    Also writes each leaf's count into LeafStats.allocation.

    Args:
        leaf_stats: Stats of a freshly fitted selection tree
        n_act: Labels to allocate
        impurity_weight: Multiplier in the pure / impure split
        scope: PER_GROUP normalizes inside each group; GLOBAL once over all leaves

    Returns:
        BudgetAllocation summing to min(n_act, total unlabeled)
    """
    if n_act < 0:
        raise ValueError(f"n_act must be non-negative, got {n_act}")

    stats = list(leaf_stats)
    leaf_ids = np.array([s.leaf_id for s in stats], dtype=np.int64)
    capacity = np.array([s.n_unlabeled for s in stats], dtype=np.int64)
    pure = np.array([s.is_pure for s in stats], dtype=bool)
    weights = np.sqrt(np.array([s.density * s.weight for s in stats], dtype=float))

    n_pure_group, n_impure_group = _group_split(int(pure.sum()), int((~pure).sum()), n_act, impurity_weight)

    allocation = np.zeros(len(stats), dtype=np.int64)
    if scope is AllocationScope.GLOBAL:
        allocation = _largest_remainder(n_act * _normalized(weights), n_act)
        n_pure_group = int(allocation[pure].sum())
        n_impure_group = n_act - n_pure_group
    else:
        for group, budget in ((pure, n_pure_group), (~pure, n_impure_group)):
            fractions = _normalized(weights[group])
            if fractions.sum() > 0:
                allocation[group] = _largest_remainder(budget * fractions, budget)

    allocation = np.minimum(allocation, capacity)
    target = min(n_act, int(capacity.sum()))
    surplus = target - int(allocation.sum())
    order = np.lexsort((leaf_ids, -np.round(_ranking_weights(stats), 9)))
    while surplus > 0:
        for position in order:
            if allocation[position] < capacity[position]:
                allocation[position] += 1
                surplus -= 1
                if surplus == 0:
                    break

    for stat, count in zip(stats, allocation):
        stat.allocation = int(count)

    return BudgetAllocation(
        per_leaf={int(leaf): int(count) for leaf, count in zip(leaf_ids, allocation)},
        n_pure_group=n_pure_group,
        n_impure_group=n_impure_group,
        scope=scope,
        redistribution_order=[int(leaf_ids[p]) for p in order],
    )


def ctal_select(
    context: SelectionContext,
    pool: PoolState,
    n_act: int,
    mode: InLeafMode,
    config: StrategyConfig,
    rng_seed: int,
) -> List[int]:
    """
    Tree-guided batch selection

    Fits a selection tree on the labeled rows, allocates n_act over its leaves
    and then samples inside each leaf, either uniformly or by k-means plus
    div-rep optimisation with the labeled rows and every other leaf's picks as
    diversity anchors.

    Raises:
        StrategyUnfittable: fewer labeled rows than min_samples_leaf
    """
    labeled = pool.labeled
    min_leaf = config.tree_params.min_samples_leaf
    if labeled.size < min_leaf:
        raise StrategyUnfittable(f"{labeled.size} labeled rows, selection tree needs {min_leaf}")

    tree = fit_tree(context.features, context.labels, labeled, config.tree_params,
                    rng_seed=rng_seed, n_classes=context.n_classes)
    stats = compute_leaf_stats(tree, context.features, context.labels, pool)
    allocation = allocate_budget(stats, n_act, config.impurity_weight, config.allocation_scope)
    logger.debug(
        f"Selection tree: {tree.n_leaves} leaves "
        f"({sum(s.is_pure for s in stats)} pure), allocation {allocation.per_leaf}"
    )

    active = [s for s in stats if s.allocation > 0]
    streams = np.random.SeedSequence(rng_seed).spawn(tree.n_leaves)

    if mode is InLeafMode.RANDOM:
        chosen: List[int] = []
        for stat in active:
            rng = np.random.default_rng(streams[stat.leaf_id])
            chosen.extend(int(i) for i in rng.choice(stat.unlabeled_indices, size=stat.allocation, replace=False))
        return chosen

    if not active:
        return []
    clusterings = [
        kmeans(context.distance_features, stat.unlabeled_indices, stat.allocation,
               rng_seed=int(streams[stat.leaf_id].generate_state(1)[0]))
        for stat in active
    ]
    state = divrep_optimize(context.distance_features, clusterings, labeled, config.divrep_max_rounds)
    return [int(i) for i in state.selected]


def irdm_select(
    features: np.ndarray,
    pool: PoolState,
    budget: int,
    rng_seed: int,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> List[int]:
    """
    Model-free training set of exactly `budget` pool rows

    k-means with k = budget over the whole pool (labels ignored), started at
    the members closest to the centroids and refined by div-rep optimisation
    with no labeled anchors. Stateless: every call starts from scratch.
    """
    candidates = pool.pool_indices
    if budget < 1:
        raise ValueError(f"budget must be at least 1, got {budget}")
    if budget > candidates.size:
        raise ValueError(f"budget {budget} exceeds the pool of {candidates.size}")
    clustering = kmeans(features, candidates, budget, rng_seed)
    state = divrep_optimize(features, clustering, [], max_rounds)
    return [int(i) for i in state.selected]


def qbc_select(
    context: SelectionContext,
    pool: PoolState,
    batch: int,
    committee_size: int,
    rng_seed: int,
    tree_params: TreeParams = TreeParams(),
) -> List[int]:
    """
    Query by committee with vote entropy

    Each member is a tree fit on a bootstrap resample of the labeled rows. The
    unlabeled rows with the highest vote entropy are returned; equal scores are
    ordered at random under the seed.

    Raises:
        StrategyUnfittable: empty labeled set or fewer rows than min_samples_leaf
    """
    if committee_size < 2:
        raise ValueError("committee_size must be at least 2")
    labeled = pool.labeled
    if labeled.size == 0 or labeled.size < tree_params.min_samples_leaf:
        raise StrategyUnfittable(f"{labeled.size} labeled rows cannot train the committee")

    unlabeled = pool.unlabeled
    if batch <= 0 or unlabeled.size == 0:
        return []

    rng = np.random.default_rng(rng_seed)
    candidates = context.features[unlabeled]
    votes = np.zeros((unlabeled.size, context.n_classes), dtype=np.int64)
    rows = np.arange(unlabeled.size)
    for _ in range(committee_size):
        sample = labeled[rng.integers(0, labeled.size, size=labeled.size)]
        member = fit_tree(context.features, context.labels, sample, tree_params,
                          rng_seed=int(rng.integers(0, 2**63 - 1)), n_classes=context.n_classes)
        np.add.at(votes, (rows, member.predict_batch(candidates)), 1)

    scores = vote_entropy(votes)
    tiebreak = rng.permutation(unlabeled.size)
    order = np.lexsort((tiebreak, -scores))
    return [int(i) for i in unlabeled[order[:batch]]]


def select_batch(
    config: StrategyConfig,
    context: SelectionContext,
    pool: PoolState,
    n: int,
    rng_seed: int,
) -> List[int]:
    """
    Next batch for a sequential strategy, falling back to random sampling when
    a model-based strategy cannot fit
    """
    try:
        if config.kind is StrategyKind.RS:
            return random_select(pool, n, rng_seed)
        if config.kind is StrategyKind.CTAL_RS:
            return ctal_select(context, pool, n, InLeafMode.RANDOM, config, rng_seed)
        if config.kind is StrategyKind.CTAL_DIVREP:
            return ctal_select(context, pool, n, InLeafMode.DIVREP, config, rng_seed)
        if config.kind is StrategyKind.QBC:
            return qbc_select(context, pool, n, config.qbc_committee_size, rng_seed, config.tree_params)
    except StrategyUnfittable as e:
        logger.warning(f"{config.label} cannot fit ({e}); sampling this batch at random")
        return random_select(pool, n, rng_seed)
    raise ValueError(f"{config.label} is not sequential; use irdm_select for whole training sets")
