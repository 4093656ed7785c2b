"""UAV-user association by K-means on ground coordinates, with equal-size repair.

Clustering runs on (x, y) only since all UAVs fly at a fixed height. Lloyd
iterations are seeded by a farthest-point sweep, ties always break toward the
lowest index, and the within-cluster squared-distance objective is checked to
be non-increasing on every iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Assignment:
    """Exclusive user-to-UAV association.

    ``z`` is the (K, M) binary matrix with exactly one 1 per row; ``groups``
    lists each UAV's user indices ordered by distance from the UAV (nearest
    first, ties by index). Group order defines the per-UAV power-allocation
    slot order downstream, so slot j consistently means "j-th closest served
    user" across independent user draws.
    """

    z: np.ndarray
    groups: list[list[int]]

    def __post_init__(self):
        z = np.asarray(self.z)
        if not np.array_equal(z, z.astype(bool)):
            raise ValueError("assignment matrix must be binary")
        if not np.all(z.sum(axis=1) == 1):
            raise ValueError("each user must be assigned to exactly one UAV")
        flat = sorted(i for g in self.groups for i in g)
        if flat != list(range(z.shape[0])):
            raise ValueError("groups must partition the user set")

    @property
    def n_users(self) -> int:
        return self.z.shape[0]

    @property
    def m_uavs(self) -> int:
        return self.z.shape[1]

    def serving_uav(self, k: int) -> int:
        return int(np.argmax(self.z[k]))

    def local_index(self, k: int) -> int:
        return self.groups[self.serving_uav(k)].index(k)


def _as_xy(users) -> np.ndarray:
    arr = np.asarray(
        [[u.x, u.y] if hasattr(u, "x") else u[:2] for u in users], dtype=float
    )
    return arr.reshape(-1, 2)


def _labels_to_assignment(labels: np.ndarray, m: int, xy=None, centers=None) -> Assignment:
    k = len(labels)
    z = np.zeros((k, m), dtype=np.int8)
    z[np.arange(k), labels] = 1
    groups = []
    for j in range(m):
        members = np.flatnonzero(labels == j).tolist()
        if xy is not None and centers is not None:
            members.sort(key=lambda u: (((xy[u] - centers[j]) ** 2).sum(), u))
        groups.append(members)
    return Assignment(z=z, groups=groups)


def _nearest_labels(xy: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = ((xy[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    # argmin breaks ties toward the lowest UAV index
    return np.argmin(d2, axis=1)


def kmeans_objective(xy: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    """Sum of squared user-to-assigned-centroid distances."""
    return float(((xy - centroids[labels]) ** 2).sum())


def _farthest_point_seeds(xy: np.ndarray, m: int, rng) -> np.ndarray:
    first = int(rng.integers(len(xy)))
    chosen = [first]
    d2 = ((xy - xy[first]) ** 2).sum(axis=1)
    for _ in range(1, m):
        nxt = int(np.argmax(d2))  # ties -> lowest index
        chosen.append(nxt)
        d2 = np.minimum(d2, ((xy - xy[nxt]) ** 2).sum(axis=1))
    return xy[chosen].copy()


def kmeans_associate(
    users,
    n_clusters: int,
    max_iters: int = 100,
    rng=None,
    initial_centroids=None,
):
    """Lloyd K-means over user ground positions.

    Returns (assignment, centroids, objective_history). The history holds the
    objective after each assignment step and is non-increasing; a violation
    raises, since it would mean the update steps are broken. Empty clusters are
    re-seeded with the point currently farthest from its centroid, which also
    cannot increase the objective.
    """
    xy = _as_xy(users)
    k = len(xy)
    if k < n_clusters:
        raise ValueError("more clusters than users")
    if n_clusters < 1:
        raise ValueError("need at least one cluster")
    if rng is None:
        rng = np.random.default_rng(0)
    if initial_centroids is None:
        centroids = _farthest_point_seeds(xy, n_clusters, rng)
    else:
        centroids = np.asarray(initial_centroids, dtype=float).reshape(n_clusters, 2).copy()

    labels = _nearest_labels(xy, centroids)
    history = [kmeans_objective(xy, labels, centroids)]
    for _ in range(max_iters):
        for j in range(n_clusters):
            members = labels == j
            if members.any():
                centroids[j] = xy[members].mean(axis=0)
            else:
                stray = int(np.argmax(((xy - centroids[labels]) ** 2).sum(axis=1)))
                centroids[j] = xy[stray]
                labels[stray] = j
        new_labels = _nearest_labels(xy, centroids)
        obj = kmeans_objective(xy, new_labels, centroids)
        if obj > history[-1] + 1e-9 * max(1.0, history[-1]):
            raise AssertionError("k-means objective increased between iterations")
        converged = np.array_equal(new_labels, labels)
        labels = new_labels
        history.append(obj)
        if converged:
            break
    return _labels_to_assignment(labels, n_clusters, xy, centroids), centroids, history


def associate_nearest(users, uav_xy) -> Assignment:
    """Assign each user to its nearest UAV ground position (ties: lowest index)."""
    xy = _as_xy(users)
    centroids = np.asarray(uav_xy, dtype=float).reshape(-1, 2)
    return _labels_to_assignment(_nearest_labels(xy, centroids), len(centroids), xy, centroids)


def rebalance_equal(assignment: Assignment, users, centroids) -> Assignment:
    """Repair an assignment so every UAV serves exactly K/M users.

    Users move greedily from over-full to under-full groups, each move picking
    the (user, target) pair with the smallest squared-distance penalty relative
    to the user's current centroid. Centroids are not recomputed; this is a
    post-pass, not another clustering round.
    """
    xy = _as_xy(users)
    centroids = np.asarray(centroids, dtype=float).reshape(-1, 2)
    k, m = assignment.z.shape
    if k % m != 0:
        raise ValueError(f"{k} users cannot be split equally over {m} UAVs")
    target = k // m
    labels = np.argmax(assignment.z, axis=1)
    sizes = np.bincount(labels, minlength=m)
    d2 = ((xy[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)

    while (sizes > target).any():
        best = None
        for u in range(k):
            src = labels[u]
            if sizes[src] <= target:
                continue
            for dst in range(m):
                if sizes[dst] >= target:
                    continue
                penalty = d2[u, dst] - d2[u, src]
                cand = (penalty, u, dst)
                if best is None or cand < best:
                    best = cand
        _, u, dst = best
        sizes[labels[u]] -= 1
        sizes[dst] += 1
        labels[u] = dst
    return _labels_to_assignment(labels, m, xy, centroids)


def balanced_association(users, uav_xy) -> Assignment:
    """Nearest-UAV association followed by the equal-size repair pass."""
    assignment = associate_nearest(users, uav_xy)
    return rebalance_equal(assignment, users, uav_xy)
