"""
k-means clustering and the diversity / representativeness selection shared by
tree-guided div-rep sampling and iRDM
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITERS = 100
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ROUNDS = 10


@dataclass(frozen=True, eq=False)
class Clustering:
    """
    k-means result over a set of row indices

    labels[i] is the cluster of indices[i]; every cluster is non-empty.
    """

    k: int
    indices: np.ndarray
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: List[float] = field(default_factory=list)

    @property
    def assignment(self) -> Dict[int, int]:
        return {int(i): int(c) for i, c in zip(self.indices, self.labels)}

    def members(self, cluster: int) -> np.ndarray:
        """Row indices of one cluster, ascending"""
        return np.sort(self.indices[self.labels == cluster])


def _kmeans_plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seeds: first uniform, then each next one with probability proportional to D(x)^2"""
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = cdist(points, points[chosen], "sqeuclidean").min(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            pick = int(rng.choice(n, p=closest / total))
        else:
            # all remaining points coincide with a seed
            remaining = np.setdiff1d(np.arange(n), chosen)
            pick = int(rng.choice(remaining))
        chosen.append(pick)
        closest = np.minimum(closest, cdist(points, points[[pick]], "sqeuclidean")[:, 0])
    return points[chosen].copy()


def _repair_empty(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray,
                  sq_dist: np.ndarray) -> None:
    """Give every empty cluster the point farthest from its own centroid"""
    k = centroids.shape[0]
    for cluster in range(k):
        if np.any(labels == cluster):
            continue
        sizes = np.bincount(labels, minlength=k)
        own = sq_dist[np.arange(labels.size), labels]
        own = np.where(sizes[labels] > 1, own, -np.inf)
        donor = int(np.argmax(own))
        labels[donor] = cluster
        centroids[cluster] = points[donor]
        sq_dist[donor] = cdist(points[[donor]], centroids, "sqeuclidean")[0]


def kmeans(
    features: np.ndarray,
    indices: Sequence[int],
    k: int,
    rng_seed: int,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> Clustering:
    """
    Lloyd's k-means with k-means++ seeding

    Iterates until the largest centroid shift is below tol or max_iters is
    reached. Empty clusters are repaired with the point farthest from its
    centroid, so the result always has k non-empty clusters.

    Args:
        features: N x D matrix (standardized for distance work)
        indices: Rows to cluster
        k: Number of clusters, 1 <= k <= len(indices)
        rng_seed: Seed for k-means++ draws

    Returns:
        Clustering with the inertia recorded after every assignment step
    """
    indices = np.asarray(indices, dtype=np.int64)
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if k > indices.size:
        raise ValueError(f"k={k} exceeds the {indices.size} points to cluster")

    points = np.asarray(features, dtype=float)[indices]
    rng = np.random.default_rng(rng_seed)
    centroids = _kmeans_plus_plus(points, k, rng)

    history: List[float] = []
    n_iter = 0
    while True:
        n_iter += 1
        sq_dist = cdist(points, centroids, "sqeuclidean")
        labels = np.argmin(sq_dist, axis=1)
        _repair_empty(points, labels, centroids, sq_dist)
        history.append(float(sq_dist[np.arange(labels.size), labels].sum()))

        updated = np.vstack([points[labels == c].mean(axis=0) for c in range(k)])
        shift = float(np.max(np.linalg.norm(updated - centroids, axis=1)))
        centroids = updated
        if shift < tol or n_iter >= max_iters:
            break

    inertia = float(((points - centroids[labels]) ** 2).sum())
    return Clustering(
        k=k,
        indices=indices,
        labels=labels,
        centroids=centroids,
        inertia=inertia,
        n_iter=n_iter,
        inertia_history=history,
    )


def representativeness(features: np.ndarray, j: int, cluster_members: Sequence[int]) -> float:
    """Mean distance from x_j to the other members; 0 for a singleton cluster"""
    members = np.asarray(cluster_members, dtype=np.int64)
    if j not in set(members.tolist()):
        raise ValueError(f"index {j} is not a member of the cluster")
    others = members[members != j]
    if others.size == 0:
        return 0.0
    return float(cdist(features[[j]], features[others])[0].mean())


def diversity(features: np.ndarray, j: int, anchor_indices: Sequence[int]) -> float:
    """Distance from x_j to its nearest anchor; +inf when there are none"""
    anchors = np.asarray(anchor_indices, dtype=np.int64)
    if anchors.size == 0:
        return float("inf")
    return float(cdist(features[[j]], features[anchors])[0].min())


@dataclass(eq=False)
class SelectionState:
    """One chosen index per cluster plus the anchors used for diversity"""

    selected: List[int]
    clusters: List[np.ndarray]
    anchors: np.ndarray
    n_rounds: int
    converged: bool


def _cluster_groups(clusterings: Union[Clustering, Sequence[Clustering]]):
    if isinstance(clusterings, Clustering):
        clusterings = [clusterings]
    clusters, centroids = [], []
    for clustering in clusterings:
        for cluster in range(clustering.k):
            clusters.append(clustering.members(cluster))
            centroids.append(clustering.centroids[cluster])
    return clusters, centroids


def divrep_optimize(
    features: np.ndarray,
    clusterings: Union[Clustering, Sequence[Clustering]],
    labeled_anchors: Sequence[int],
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> SelectionState:
    """
    Pick one member per cluster maximizing diversity minus representativeness

    Each cluster starts at the member closest to its centroid. A round sweeps
    the clusters in order (clusterings in the order given, then cluster index)
    and replaces the pick of cluster l by the argmax of Delta - R, where Delta
    is measured against the labeled anchors plus the picks of all other
    clusters. Rounds stop once a full sweep changes nothing or after
    max_rounds. Ties go to the lowest index.

    Args:
        features: N x D matrix (standardized)
        clusterings: One clustering, or several (e.g. one per tree leaf)
        labeled_anchors: Already labeled rows
        max_rounds: Cap on full sweeps

    Returns:
        SelectionState with the picks in sweep order
    """
    clusters, centroids = _cluster_groups(clusterings)
    if not clusters:
        raise ValueError("no clusters to select from")
    if any(members.size == 0 for members in clusters):
        raise ValueError("clusters must be non-empty")

    labeled_anchors = np.asarray(labeled_anchors, dtype=np.int64)
    features = np.asarray(features, dtype=float)

    # Per-cluster quantities that do not change across rounds
    representative: List[np.ndarray] = []
    labeled_gap: List[np.ndarray] = []
    selected: List[int] = []
    for members, centroid in zip(clusters, centroids):
        points = features[members]
        pairwise = cdist(points, points)
        size = members.size
        representative.append(pairwise.sum(axis=1) / (size - 1) if size > 1 else np.zeros(1))
        if labeled_anchors.size:
            labeled_gap.append(cdist(points, features[labeled_anchors]).min(axis=1))
        else:
            labeled_gap.append(np.full(size, np.inf))
        selected.append(int(members[np.argmin(cdist(points, centroid.reshape(1, -1))[:, 0])]))

    n_rounds = 0
    converged = False
    while n_rounds < max_rounds:
        n_rounds += 1
        changed = False
        for cluster, members in enumerate(clusters):
            others = [s for position, s in enumerate(selected) if position != cluster]
            gap = labeled_gap[cluster]
            if others:
                gap = np.minimum(gap, cdist(features[members], features[others]).min(axis=1))
            if np.all(np.isinf(gap)):
                # no anchors at all: the most representative member wins
                score = -representative[cluster]
            else:
                score = gap - representative[cluster]
            pick = int(members[int(np.argmax(score))])
            if pick != selected[cluster]:
                selected[cluster] = pick
                changed = True
        if not changed:
            converged = True
            break

    logger.debug(f"Div-rep selection over {len(clusters)} clusters: {n_rounds} rounds, converged={converged}")
    return SelectionState(
        selected=selected,
        clusters=clusters,
        anchors=np.concatenate([labeled_anchors, np.asarray(selected, dtype=np.int64)]),
        n_rounds=n_rounds,
        converged=converged,
    )
