"""
Random forest used as the final evaluator of every strategy's training set
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from tree import ClassificationTree, TreeParams, fit_tree

logger = logging.getLogger(__name__)


class ForestParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_trees: int = Field(50, ge=1, description="Number of trees")
    min_samples_leaf: int = Field(3, ge=1, description="Minimum samples per leaf of every tree")
    max_depth: Optional[int] = Field(None, ge=1)
    bootstrap: bool = Field(True, description="Fit each tree on a same-size resample with replacement")
    features_per_split: Literal["all", "sqrt"] = Field(
        "sqrt", description="'sqrt' draws ceil(sqrt(D)) features per split"
    )
    split_criterion: Literal["entropy"] = "entropy"

    def tree_params(self, n_features: int) -> TreeParams:
        max_features = None
        if self.features_per_split == "sqrt":
            max_features = math.ceil(math.sqrt(n_features))
        return TreeParams(
            min_samples_leaf=self.min_samples_leaf,
            max_depth=self.max_depth,
            max_features=max_features,
        )


@dataclass(frozen=True, eq=False)
class Forest:
    trees: List[ClassificationTree]
    params: ForestParams
    n_classes: int

    def vote_counts(self, X: np.ndarray) -> np.ndarray:
        """n x c matrix of tree votes; every row sums to n_trees"""
        X = np.asarray(X, dtype=float)
        votes = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            np.add.at(votes, (rows, tree.predict_batch(X)), 1)
        return votes

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        # argmax keeps the smallest class id on tied votes
        return np.argmax(self.vote_counts(X), axis=1)

    def predict(self, x: Sequence[float]) -> int:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise ValueError("predict expects a single D-vector")
        return int(self.predict_batch(x.reshape(1, -1))[0])


def fit_forest(
    features: np.ndarray,
    labels: np.ndarray,
    indices: Sequence[int],
    params: ForestParams,
    rng_seed: int,
    n_classes: Optional[int] = None,
) -> Forest:
    """
    Bagged ensemble of entropy trees

    Tree t draws its bootstrap rows and split features from a stream spawned
    off (rng_seed, t), so the fitted forest does not depend on fit order.
    """
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ValueError("cannot fit a forest on an empty training set")
    labels = np.asarray(labels, dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1

    tree_params = params.tree_params(np.asarray(features).shape[1])
    streams = np.random.SeedSequence(rng_seed).spawn(params.n_trees)

    trees = []
    for stream in streams:
        rng = np.random.default_rng(stream)
        rows = indices
        if params.bootstrap:
            rows = indices[rng.integers(0, indices.size, size=indices.size)]
        tree_seed = int(rng.integers(0, 2**63 - 1))
        trees.append(fit_tree(features, labels, rows, tree_params, rng_seed=tree_seed, n_classes=n_classes))

    logger.debug(f"Fitted forest of {len(trees)} trees on {indices.size} rows")
    return Forest(trees=trees, params=params, n_classes=n_classes)
