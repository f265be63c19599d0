"""Representative sampling: embed to 2-D, cluster, keep the central members.

The embedding backend is PCA (deterministic and cheap at desk scale); the
neighborhood/min-distance/metric knobs of the manifold embedding this
pipeline was designed around are recorded in :class:`EmbedConfig` so a
faithful backend can be swapped in without an interface change.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .reprs import RepresentationSet

EMBED_METHODS = ("pca", "none")

KMEANS_TOL = 1e-6
KMEANS_MAX_ITER = 300


@dataclass(frozen=True)
class EmbedConfig:
    method: str = "pca"
    out_dims: int = 2
    n_neighbors: int = 15  # recorded only; pca ignores it
    min_dist: float = 0.1  # recorded only; pca ignores it
    metric: str = "euclidean"

    def __post_init__(self):
        if self.method not in EMBED_METHODS:
            raise UsageError(f"method must be one of {EMBED_METHODS}, got {self.method!r}")
        if self.out_dims < 1:
            raise UsageError(f"out_dims must be positive, got {self.out_dims}")
        if self.metric != "euclidean":
            raise UsageError(f"only the euclidean metric is supported, got {self.metric!r}")


@dataclass(frozen=True)
class ClusterResult:
    """Assignments, centroids, and the final/per-iteration inertia."""

    k: int
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    inertia_history: tuple = field(default_factory=tuple)


def principal_directions(points: np.ndarray, out_dims: int) -> np.ndarray:
    """Top eigenvectors of the sample covariance, as columns.

    Descending eigenvalue order; each column's sign is fixed so its
    largest-magnitude loading is positive.  Degenerate covariance simply
    ranks whatever directions exist (trailing eigenvalues near zero).
    """
    pts = np.asarray(points, dtype=np.float64)
    n, d = pts.shape
    centered = pts - pts.mean(axis=0)
    if n > 1:
        cov = centered.T @ centered / (n - 1)
    else:
        cov = np.zeros((d, d))
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:out_dims]
    components = eigvecs[:, order]
    for j in range(components.shape[1]):
        lead = np.argmax(np.abs(components[:, j]))
        if components[lead, j] < 0:
            components[:, j] = -components[:, j]
    return components


def embed(points: np.ndarray, cfg: EmbedConfig = EmbedConfig()) -> np.ndarray:
    """Project points onto the top principal directions.

    Points are centered and projected onto the eigenvectors of the sample
    covariance, in descending eigenvalue order.  ``method="none"`` passes
    already-embedded points through.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise UsageError(f"points must be a [n, d] matrix, got ndim={pts.ndim}")
    n, d = pts.shape
    if cfg.method == "none":
        if d != cfg.out_dims:
            raise UsageError(
                f"method 'none' needs input dimension {cfg.out_dims}, got {d}"
            )
        return pts.copy()
    if cfg.out_dims > d:
        raise UsageError(f"out_dims={cfg.out_dims} exceeds input dimension {d}")
    if n < cfg.out_dims:
        raise UsageError(f"need at least {cfg.out_dims} points, got {n}")
    components = principal_directions(pts, cfg.out_dims)
    return (pts - pts.mean(axis=0)) @ components


def _plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = points[first]
    dist_sq = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = dist_sq.sum()
        if total > 0:
            idx = int(rng.choice(n, p=dist_sq / total))
        else:
            # All remaining points coincide with chosen centroids.
            idx = int(np.argmin(dist_sq))
        centroids[j] = points[idx]
        dist_sq = np.minimum(dist_sq, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def kmeans(points: np.ndarray, k: int, seed: int) -> ClusterResult:
    """Seeded k-means++ initialization followed by Lloyd iterations.

    Stops when the relative inertia change drops below 1e-6 or after 300
    iterations; empty clusters are re-seeded with the point farthest from
    its assigned centroid.  Deterministic given (points, k, seed).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise UsageError(f"points must be a [n, d] matrix, got ndim={pts.ndim}")
    n = pts.shape[0]
    if k < 1:
        raise UsageError(f"k must be positive, got {k}")
    if n < k:
        raise UsageError(f"need at least k={k} points, got {n}")

    rng = np.random.default_rng(seed)
    centroids = _plusplus_init(pts, k, rng)

    history = []
    prev_inertia = np.inf
    assignments = np.zeros(n, dtype=np.int64)
    for _ in range(KMEANS_MAX_ITER):
        dist_sq = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assignments = np.argmin(dist_sq, axis=1)
        inertia = float(dist_sq[np.arange(n), assignments].sum())
        history.append(inertia)

        for c in range(k):
            members = assignments == c
            if members.any():
                centroids[c] = pts[members].mean(axis=0)
            else:
                farthest = int(np.argmax(dist_sq[np.arange(n), assignments]))
                centroids[c] = pts[farthest]
                assignments[farthest] = c
                dist_sq[farthest, :] = 0.0  # keep a later empty cluster from stealing it

        if np.isfinite(prev_inertia) and (
            prev_inertia - inertia < KMEANS_TOL * max(prev_inertia, 1e-300)
        ):
            break
        prev_inertia = inertia

    # Final assignment against the last centroid update.
    dist_sq = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    assignments = np.argmin(dist_sq, axis=1)
    inertia = float(dist_sq[np.arange(n), assignments].sum())
    history.append(inertia)
    return ClusterResult(
        k=k,
        assignments=assignments,
        centroids=centroids,
        inertia=inertia,
        inertia_history=tuple(history),
    )


def sample_central(
    reps: RepresentationSet,
    clustering: ClusterResult,
    embedded: np.ndarray,
    per_cluster: int,
) -> RepresentationSet:
    """Keep the ``per_cluster`` members closest to each cluster's centroid.

    Distances are measured in embedding space; ties break toward the lower
    original index.  Clusters smaller than ``per_cluster`` contribute all
    their members, and the shortfall is recorded in the output's ``info``.
    """
    emb = np.asarray(embedded, dtype=np.float64)
    if emb.shape[0] != len(reps) or emb.shape[0] != clustering.assignments.shape[0]:
        raise UsageError(
            f"sizes disagree: {len(reps)} maps, {emb.shape[0]} embedded points, "
            f"{clustering.assignments.shape[0]} assignments"
        )
    if per_cluster < 1:
        raise UsageError(f"per_cluster must be positive, got {per_cluster}")

    chosen = []
    shortfalls = {}
    for c in range(clustering.k):
        members = np.flatnonzero(clustering.assignments == c)
        if members.size == 0:
            shortfalls[str(c)] = per_cluster
            continue
        dist = np.linalg.norm(emb[members] - clustering.centroids[c], axis=1)
        ranked = members[np.lexsort((members, dist))]
        take = ranked[:per_cluster]
        chosen.extend(int(i) for i in take)
        if members.size < per_cluster:
            shortfalls[str(c)] = int(per_cluster - members.size)

    out = reps.take(chosen)
    for i, idx in enumerate(chosen):
        out.meta[i] = {**out.meta[i], "cluster": int(clustering.assignments[idx])}
    out.info = dict(reps.info)
    out.info["per_cluster"] = int(per_cluster)
    if shortfalls:
        out.info["cluster_shortfall"] = shortfalls
    return out
