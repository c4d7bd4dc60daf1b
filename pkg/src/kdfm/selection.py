"""Trusted pseudo-label selection.

The pipeline keeps an unlabeled sample only if (a) the teacher's confidence
clears the selection threshold and (b) k-means clustering of the penultimate
embeddings puts it in a cluster whose majority predicted class matches its
own prediction. Survivors are frozen into a TrustedSet together with their
soft label snapshots.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

_KMEANS_MAX_ITERS = 100


@dataclass
class PseudoLabelTable:
    """Teacher outputs for unlabeled samples: soft labels plus embeddings."""

    indices: np.ndarray  # dataset indices, shape [m]
    soft: np.ndarray  # [m, K]
    embeddings: np.ndarray  # [m, e]

    @property
    def predicted(self) -> np.ndarray:
        return self.soft.argmax(axis=1)

    @property
    def confidence(self) -> np.ndarray:
        return self.soft.max(axis=1)

    def __len__(self) -> int:
        return len(self.indices)


@dataclass
class TrustedSet:
    """Frozen selection result: sorted dataset indices and their outer labels."""

    indices: np.ndarray  # sorted dataset indices, shape [t]
    outer_soft: np.ndarray  # [t, K] snapshots aligned with indices
    predicted: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    confidence: np.ndarray = field(default_factory=lambda: np.empty(0))
    cluster: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    clustered: bool = True

    def __len__(self) -> int:
        return len(self.indices)

    def label_lookup(self) -> dict[int, np.ndarray]:
        """Dataset index -> frozen soft label row."""
        return {int(i): self.outer_soft[pos] for pos, i in enumerate(self.indices)}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "predicted_class", "confidence", "cluster"])
            for pos in range(len(self.indices)):
                writer.writerow(
                    [
                        int(self.indices[pos]),
                        int(self.predicted[pos]),
                        repr(float(self.confidence[pos])),
                        int(self.cluster[pos]),
                    ]
                )


def empty_trusted_set(num_classes: int) -> TrustedSet:
    return TrustedSet(
        indices=np.empty(0, dtype=np.int64),
        outer_soft=np.empty((0, num_classes)),
        clustered=False,
    )


def confident_indices(table: PseudoLabelTable, select_threshold: float) -> np.ndarray:
    """Dataset indices whose max soft value clears the threshold (inclusive)."""
    mask = table.confidence >= select_threshold
    return table.indices[mask]


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # [m, k] pairwise squared euclidean distances
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    m = len(points)
    chosen = [int(rng.integers(m))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < k:
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass at distance zero: take any unchosen point
            remaining = np.setdiff1d(np.arange(m), np.array(chosen))
            nxt = int(remaining[rng.integers(len(remaining))])
        else:
            nxt = int(rng.choice(m, p=d2 / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((points - points[nxt]) ** 2).sum(axis=1))
    return points[chosen].copy()


def kmeans(embeddings: np.ndarray, k: int, max_iters: int = _KMEANS_MAX_ITERS,
           seed: int = 0):
    """Lloyd's algorithm with k-means++ seeding.

    Runs until the assignment stops changing or max_iters is hit. An empty
    cluster is re-seeded to the point currently farthest from its assigned
    centroid. Returns (assignments [m], centroids [k, e]).
    """
    points = np.asarray(embeddings, dtype=np.float64)
    if points.ndim != 2:
        raise DataError(f"embeddings must be [m, e], got shape {points.shape}")
    m = len(points)
    if m < k:
        raise DataError(f"need at least {k} points to form {k} clusters, got {m}")
    if max_iters < 1:
        raise DataError(f"max_iters must be >= 1, got {max_iters}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, k, rng)
    assignments = np.full(m, -1, dtype=np.int64)
    for _ in range(max_iters):
        d2 = _squared_distances(points, centroids)
        new_assign = d2.argmin(axis=1)
        # re-seed empty clusters from the worst-fitting points
        for cluster_id in range(k):
            if not np.any(new_assign == cluster_id):
                cost = d2[np.arange(m), new_assign]
                worst = int(cost.argmax())
                centroids[cluster_id] = points[worst]
                d2 = _squared_distances(points, centroids)
                new_assign = d2.argmin(axis=1)
        converged = np.array_equal(new_assign, assignments)
        assignments = new_assign
        for cluster_id in range(k):
            members = points[assignments == cluster_id]
            if len(members):
                centroids[cluster_id] = members.mean(axis=0)
        if converged:
            break
    return assignments, centroids


def consistency_filter(assignments: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """Positions whose prediction equals their cluster's majority prediction.

    Majority ties break toward the smallest class index.
    """
    assignments = np.asarray(assignments)
    predicted = np.asarray(predicted)
    if assignments.shape != predicted.shape:
        raise DataError(
            f"assignments shape {assignments.shape} != predicted shape {predicted.shape}"
        )
    kept = []
    for cluster_id in np.unique(assignments):
        members = np.flatnonzero(assignments == cluster_id)
        majority = np.bincount(predicted[members]).argmax()
        kept.extend(members[predicted[members] == majority])
    return np.sort(np.array(kept, dtype=np.int64))


def build_trusted_set(table: PseudoLabelTable, select_threshold: float,
                      num_classes: int, seed: int,
                      max_iters: int = _KMEANS_MAX_ITERS) -> TrustedSet:
    """Confidence filter -> k-means on L2-normalized embeddings -> consistency.

    If fewer survivors than clusters remain, clustering is skipped and the
    confident set is returned as-is with clustered=False so callers can flag
    it in their run logs.
    """
    conf_positions = np.flatnonzero(table.confidence >= select_threshold)
    if len(conf_positions) == 0:
        return empty_trusted_set(table.soft.shape[1])
    if len(conf_positions) < num_classes:
        keep = conf_positions
        cluster = np.full(len(keep), -1, dtype=np.int64)
        clustered = False
    else:
        emb = table.embeddings[conf_positions]
        norms = np.linalg.norm(emb, axis=1, keepdims=True)
        emb = emb / np.maximum(norms, 1e-12)
        assignments, _ = kmeans(emb, num_classes, max_iters=max_iters, seed=seed)
        kept_rel = consistency_filter(assignments, table.predicted[conf_positions])
        keep = conf_positions[kept_rel]
        cluster = assignments[kept_rel]
        clustered = True
    order = np.argsort(table.indices[keep])
    keep = keep[order]
    return TrustedSet(
        indices=table.indices[keep].copy(),
        outer_soft=table.soft[keep].copy(),
        predicted=table.predicted[keep].copy(),
        confidence=table.confidence[keep].copy(),
        cluster=cluster[order].copy(),
        clustered=clustered,
    )
