"""Adaptive synthetic oversampling of minority classes in the latent space.

Minority classes are balanced toward the majority count by interpolating
between same-class neighbours, generating more points for minority samples
whose neighbourhood is dominated by other classes. The kNN is brute force;
the intended scale is tens of thousands of vectors at most.
"""

from __future__ import annotations

from collections.abc import Collection
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AdasynConfig:
    k: int = 15
    beta: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")


@dataclass(frozen=True)
class SyntheticPoint:
    """Audit record: new point = X[seed_index] + interpolation * (X[neighbor_index] - X[seed_index])."""

    seed_index: int
    neighbor_index: int
    interpolation: float


@dataclass
class SyntheticBatch:
    vectors: np.ndarray
    labels: np.ndarray
    provenance: list[SyntheticPoint] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.provenance)


def _pairwise_sq_dists(points: np.ndarray, queries: np.ndarray) -> np.ndarray:
    # (a-b)^2 expansion; block-free since inputs stay at desk scale
    sq = (queries**2).sum(axis=1)[:, None] + (points**2).sum(axis=1)[None, :]
    sq -= 2.0 * queries @ points.T
    np.maximum(sq, 0.0, out=sq)
    return sq


def knn(points: np.ndarray, query_index: int, k: int) -> np.ndarray:
    """Indices of the k nearest points to points[query_index], excluding itself.

    Euclidean distance; ties broken by lower index.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} must be in [1, {n - 1}]")
    d2 = _pairwise_sq_dists(points, points[query_index : query_index + 1])[0]
    d2[query_index] = np.inf
    return np.argsort(d2, kind="stable")[:k]


def _knn_matrix(points: np.ndarray, queries_idx: np.ndarray, k: int) -> np.ndarray:
    """k nearest indices in `points` for each query row, excluding the query itself."""
    d2 = _pairwise_sq_dists(points, points[queries_idx])
    d2[np.arange(len(queries_idx)), queries_idx] = np.inf
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def adasyn(
    X: np.ndarray,
    y: np.ndarray,
    cfg: AdasynConfig,
    exclude: Collection[int] = (),
) -> tuple[np.ndarray, np.ndarray, SyntheticBatch]:
    """Oversample every minority class toward the majority count.

    For minority class s with m_s members against majority count m_l,
    G = round(beta * (m_l - m_s)) synthetic points are allocated across the
    class members proportionally to the fraction of non-s labels among each
    member's k nearest neighbours in the full original set (uniformly when
    that fraction is zero everywhere), with largest-remainder rounding so the
    total is exact. Each point interpolates toward a uniformly drawn
    same-class neighbour (k clamped to class size - 1) with u ~ Uniform[0,1].

    Classes are processed in ascending label order against the original data
    only, so earlier synthesis never feeds later neighbour searches. Returns
    (X_out, y_out, batch) with the originals as a prefix of X_out.

    Classes listed in `exclude` are never oversampled. A minority class with
    a single member raises: exclude it or duplicate the sample first.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("adasyn requires a non-empty 2-D sample matrix")
    if len(X) != len(y):
        raise ValueError("X and y length mismatch")

    labels, counts = np.unique(y, return_counts=True)
    majority_count = int(counts.max())
    k_full = min(cfg.k, len(X) - 1)
    rng = np.random.default_rng(cfg.seed)

    new_vectors: list[np.ndarray] = []
    new_labels: list[int] = []
    provenance: list[SyntheticPoint] = []

    for label, count in zip(labels.tolist(), counts.tolist()):
        if count >= majority_count or label in exclude:
            continue
        if count < 2:
            raise ValueError(
                f"class {label} has a single member; exclude it or duplicate the sample"
            )
        gap = int(round(cfg.beta * (majority_count - count)))
        if gap == 0:
            continue

        members = np.flatnonzero(y == label)
        # adaptive weights: share of foreign labels among full-set neighbours
        neigh = _knn_matrix(X, members, k_full)
        foreign = (y[neigh] != label).sum(axis=1) / k_full
        total = foreign.sum()
        if total > 0:
            weights = foreign / total
        else:
            weights = np.full(len(members), 1.0 / len(members))

        quotas = gap * weights
        alloc = np.floor(quotas).astype(np.int64)
        remainder = gap - int(alloc.sum())
        if remainder > 0:
            order = np.argsort(-(quotas - alloc), kind="stable")
            alloc[order[:remainder]] += 1

        k_same = min(cfg.k, count - 1)
        same_neigh = _knn_matrix(X[members], np.arange(len(members)), k_same)

        for pos, n_new in enumerate(alloc.tolist()):
            seed_idx = int(members[pos])
            for _ in range(n_new):
                z = int(members[same_neigh[pos, rng.integers(k_same)]])
                u = float(rng.uniform())
                new_vectors.append(X[seed_idx] + u * (X[z] - X[seed_idx]))
                new_labels.append(label)
                provenance.append(SyntheticPoint(seed_idx, z, u))

    if new_vectors:
        batch = SyntheticBatch(
            vectors=np.vstack(new_vectors),
            labels=np.asarray(new_labels, dtype=np.int64),
            provenance=provenance,
        )
        return np.vstack([X, batch.vectors]), np.concatenate([y, batch.labels]), batch
    batch = SyntheticBatch(
        vectors=np.empty((0, X.shape[1])), labels=np.empty(0, dtype=np.int64)
    )
    return X.copy(), y.copy(), batch
