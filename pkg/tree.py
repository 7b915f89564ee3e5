"""
Entropy-splitting classification tree

Used three ways: as the space decomposer for tree-guided sampling, as the
base learner of the evaluation forest and as a committee member for QBC.
"""

import logging
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from dataset import PoolState
from metrics import shannon_entropy

logger = logging.getLogger(__name__)

# splits must improve entropy by more than this
MIN_GAIN = 1e-12


class TreeParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    min_samples_leaf: int = Field(10, ge=1, description="Minimum training samples in every leaf")
    max_depth: Optional[int] = Field(None, ge=1, description="Depth limit; None grows until the other rules stop")
    split_criterion: Literal["entropy"] = "entropy"
    max_features: Optional[int] = Field(
        None, ge=1, description="Features drawn uniformly per split; None scans all features"
    )


def _xlogx(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return values * np.log2(np.where(values > 0, values, 1.0))


def _node_entropy(counts: np.ndarray) -> float:
    n = counts.sum()
    return float((_xlogx(n) - _xlogx(counts).sum()) / n)


@dataclass(frozen=True, eq=False)
class ClassificationTree:
    """
    Fitted tree stored as parallel node arrays

    Internal nodes have feature >= 0; leaves have feature == -1 and a leaf id
    0..K-1 numbered left-first depth-first.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    leaf_of_node: np.ndarray
    leaf_nodes: np.ndarray
    n_features: int
    n_classes: int
    params: TreeParams

    @property
    def n_leaves(self) -> int:
        return int(self.leaf_nodes.size)

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def leaf_counts(self) -> np.ndarray:
        """K x c training class counts per leaf"""
        return self.counts[self.leaf_nodes]

    @property
    def leaf_classes(self) -> np.ndarray:
        # argmax keeps the smallest class id on ties
        return np.argmax(self.leaf_counts, axis=1)

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected inputs with {self.n_features} features, got shape {X.shape}")
        return X

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf id of every row; x[feature] <= threshold goes left"""
        X = self._check(X)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            current = node[rows]
            go_left = X[rows, self.feature[current]] <= self.threshold[current]
            node[rows] = np.where(go_left, self.left[current], self.right[current])
            active[rows] = self.feature[node[rows]] >= 0
        return self.leaf_of_node[node]

    def assign_leaf(self, x: Sequence[float]) -> int:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise ValueError("assign_leaf expects a single D-vector")
        return int(self.apply(x.reshape(1, -1))[0])

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return self.leaf_classes[self.apply(X)]

    def predict_proba_batch(self, X: np.ndarray) -> np.ndarray:
        counts = self.leaf_counts[self.apply(X)]
        return counts / counts.sum(axis=1, keepdims=True)

    def predict(self, x: Sequence[float]) -> int:
        return int(self.leaf_classes[self.assign_leaf(x)])

    def predict_proba(self, x: Sequence[float]) -> np.ndarray:
        counts = self.leaf_counts[self.assign_leaf(x)]
        return counts / counts.sum()

    def export_text(self, feature_names: Optional[Sequence[str]] = None) -> str:
        """Indented dump of splits and class counts, for debugging only"""
        names = list(feature_names) if feature_names is not None else [
            f"x[{i}]" for i in range(self.n_features)
        ]
        lines: List[str] = []
        stack: List[Tuple[int, int, str]] = [(0, 0, "")]
        while stack:
            node, depth, prefix = stack.pop()
            indent = "|   " * depth
            counts = self.counts[node].astype(int).tolist()
            if self.feature[node] < 0:
                lines.append(
                    f"{indent}{prefix}leaf {self.leaf_of_node[node]}: counts {counts} "
                    f"-> class {int(np.argmax(self.counts[node]))}"
                )
                continue
            name = names[self.feature[node]]
            lines.append(f"{indent}{prefix}node: {name} <= {self.threshold[node]:.6g} counts {counts}")
            stack.append((self.right[node], depth + 1, f"{name} >  {self.threshold[node]:.6g}: "))
            stack.append((self.left[node], depth + 1, f"{name} <= {self.threshold[node]:.6g}: "))
        return "\n".join(lines)


class _TreeBuilder:
    """Greedy top-down growth on a (possibly repeated) set of row indices"""

    def __init__(self, features: np.ndarray, labels: np.ndarray, n_classes: int,
                 params: TreeParams, rng: np.random.Generator):
        self.features = features
        self.onehot = np.eye(n_classes)[labels]
        self.n_classes = n_classes
        self.params = params
        self.rng = rng
        n_features = features.shape[1]
        self.draw = params.max_features is not None and params.max_features < n_features

    def candidate_features(self) -> np.ndarray:
        n_features = self.features.shape[1]
        if not self.draw:
            return np.arange(n_features)
        return np.sort(self.rng.choice(n_features, size=self.params.max_features, replace=False))

    def best_split(self, indices: np.ndarray) -> Optional[Tuple[int, float]]:
        """
        Exhaustive scan for the split with the largest information gain

        Candidate thresholds are midpoints between consecutive distinct sorted
        values. Equal gains resolve to the lowest feature, then the lowest
        threshold.
        """
        n = indices.size
        min_leaf = self.params.min_samples_leaf
        if n < 2 * min_leaf:
            return None

        feature_ids = self.candidate_features()
        X = self.features[np.ix_(indices, feature_ids)]
        onehot = self.onehot[indices]

        order = np.argsort(X, axis=0, kind="stable")
        sorted_x = np.take_along_axis(X, order, axis=0)
        left = np.cumsum(onehot[order], axis=0)[:-1]
        total = onehot.sum(axis=0)
        right = total - left

        n_left = np.arange(1, n, dtype=float)[:, None]
        n_right = n - n_left
        children = (
            _xlogx(n_left) - _xlogx(left).sum(axis=-1) + _xlogx(n_right) - _xlogx(right).sum(axis=-1)
        ) / n
        gain = _node_entropy(total) - children

        valid = (n_left >= min_leaf) & (n_right >= min_leaf) & (sorted_x[1:] > sorted_x[:-1])
        gain = np.where(valid, gain, -np.inf).T
        best = gain.max()
        if not np.isfinite(best) or best <= MIN_GAIN:
            return None

        column, position = np.argwhere(gain >= best - MIN_GAIN)[0]
        low, high = sorted_x[position, column], sorted_x[position + 1, column]
        threshold = (low + high) / 2.0
        if not low <= threshold < high:
            threshold = low
        return int(feature_ids[column]), float(threshold)

    def build(self, indices: np.ndarray) -> ClassificationTree:
        feature: List[int] = []
        threshold: List[float] = []
        left: List[int] = []
        right: List[int] = []
        counts: List[np.ndarray] = []

        def new_node(rows: np.ndarray) -> int:
            feature.append(-1)
            threshold.append(np.nan)
            left.append(-1)
            right.append(-1)
            counts.append(self.onehot[rows].sum(axis=0))
            return len(feature) - 1

        root = new_node(indices)
        stack = [(root, indices, 0)]
        while stack:
            node, rows, depth = stack.pop()
            if np.count_nonzero(counts[node]) <= 1:
                continue
            if self.params.max_depth is not None and depth >= self.params.max_depth:
                continue
            split = self.best_split(rows)
            if split is None:
                continue
            split_feature, split_threshold = split
            goes_left = self.features[rows, split_feature] <= split_threshold
            left_node = new_node(rows[goes_left])
            right_node = new_node(rows[~goes_left])
            feature[node] = split_feature
            threshold[node] = split_threshold
            left[node] = left_node
            right[node] = right_node
            stack.append((right_node, rows[~goes_left], depth + 1))
            stack.append((left_node, rows[goes_left], depth + 1))

        feature_arr = np.asarray(feature, dtype=np.int64)
        left_arr = np.asarray(left, dtype=np.int64)
        right_arr = np.asarray(right, dtype=np.int64)

        leaf_of_node = np.full(feature_arr.size, -1, dtype=np.int64)
        leaf_nodes: List[int] = []
        walk = [root]
        while walk:
            node = walk.pop()
            if feature_arr[node] < 0:
                leaf_of_node[node] = len(leaf_nodes)
                leaf_nodes.append(node)
            else:
                walk.append(right_arr[node])
                walk.append(left_arr[node])

        return ClassificationTree(
            feature=feature_arr,
            threshold=np.asarray(threshold, dtype=float),
            left=left_arr,
            right=right_arr,
            counts=np.vstack(counts),
            leaf_of_node=leaf_of_node,
            leaf_nodes=np.asarray(leaf_nodes, dtype=np.int64),
            n_features=self.features.shape[1],
            n_classes=self.n_classes,
            params=self.params,
        )


def fit_tree(
    features: np.ndarray,
    labels: np.ndarray,
    indices: Sequence[int],
    params: TreeParams,
    rng_seed: int = 0,
    n_classes: Optional[int] = None,
) -> ClassificationTree:
    """
    Fit a tree on the rows named by indices (repeats allowed, as in bootstrap)

    Growth stops at pure nodes, at max_depth, or when no split leaves
    min_samples_leaf rows on both sides with positive information gain.

    Args:
        features: N x D matrix (raw values; trees are scale invariant)
        labels: Length-N class ids
        indices: Training rows
        params: Tree hyperparameters
        rng_seed: Seed for per-split feature draws (unused when all features are scanned)
        n_classes: Number of classes; defaults to max label + 1

    Returns:
        The fitted ClassificationTree
    """
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ValueError("cannot fit a tree on an empty index set")
    if indices.size < params.min_samples_leaf:
        raise ValueError(
            f"{indices.size} training rows is fewer than min_samples_leaf={params.min_samples_leaf}"
        )
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1

    builder = _TreeBuilder(features, labels, n_classes, params, np.random.default_rng(rng_seed))
    tree = builder.build(indices)
    logger.debug(f"Fitted tree on {indices.size} rows: {tree.n_leaves} leaves, {tree.n_nodes} nodes")
    return tree


@dataclass(eq=False)
class LeafStats:
    """Per-leaf quantities driving the budget allocation"""

    leaf_id: int
    labeled_indices: np.ndarray
    unlabeled_indices: np.ndarray
    class_probs: np.ndarray
    entropy: float
    density: float
    is_pure: bool
    weight: float
    allocation: int = 0
    log_base: float = 2.0

    @property
    def n_unlabeled(self) -> int:
        return int(self.unlabeled_indices.size)


def compute_leaf_stats(
    tree: ClassificationTree,
    features: np.ndarray,
    labels: np.ndarray,
    pool: PoolState,
    log_base: float = 2.0,
) -> List[LeafStats]:
    """
    Entropy, density and purity of every leaf for a tree fitted on pool.labeled

    Density is the leaf's unlabeled count over the training-pool size. A leaf
    is pure when its labeled rows carry a single class; its weight is then 1,
    otherwise the entropy.
    """
    labeled = pool.labeled
    unlabeled = pool.unlabeled
    labeled_leaf = tree.apply(features[labeled])
    unlabeled_leaf = tree.apply(features[unlabeled]) if unlabeled.size else np.empty(0, dtype=np.int64)

    stats: List[LeafStats] = []
    for leaf in range(tree.n_leaves):
        leaf_labeled = labeled[labeled_leaf == leaf]
        leaf_unlabeled = unlabeled[unlabeled_leaf == leaf]
        # every leaf holds at least min_samples_leaf of the rows the tree was fit on
        assert leaf_labeled.size > 0, f"leaf {leaf} has no labeled rows; tree and pool disagree"

        class_counts = np.bincount(labels[leaf_labeled], minlength=tree.n_classes)
        class_probs = class_counts / class_counts.sum()
        is_pure = np.count_nonzero(class_counts) == 1
        entropy = 0.0 if is_pure else shannon_entropy(class_probs, base=log_base)

        stats.append(LeafStats(
            leaf_id=leaf,
            labeled_indices=leaf_labeled,
            unlabeled_indices=leaf_unlabeled,
            class_probs=class_probs,
            entropy=entropy,
            density=leaf_unlabeled.size / pool.pool_size,
            is_pure=bool(is_pure),
            weight=1.0 if is_pure else entropy,
            log_base=log_base,
        ))
    return stats
