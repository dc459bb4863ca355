"""Classical clustering primitives: k-means, NCut spectral readout, and the
indicator-to-centroid projection.

NCut is realized as symmetric-normalized spectral clustering: eigenvectors of
the c smallest eigenvalues of I - D^{-1/2} S D^{-1/2}, row-normalized, then
k-means. Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DataError
from .graph import AffinityGraph


@dataclass
class ClusterAssignment:
    labels: np.ndarray      # length n, values in [0, c)
    centroids: np.ndarray   # c x l
    inertia: float          # sum of squared distances to assigned centroids


def _kmeanspp_seed(H, c, rng):
    n = H.shape[0]
    centers = np.empty((c, H.shape[1]))
    centers[0] = H[rng.integers(n)]
    d2 = cdist(H, centers[:1], "sqeuclidean")[:, 0]
    for j in range(1, c):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)  # all remaining points coincide with a center
        centers[j] = H[idx]
        d2 = np.minimum(d2, cdist(H, centers[j : j + 1], "sqeuclidean")[:, 0])
    return centers


def _reseed_empty(H, labels, centroids, counts):
    # an empty cluster grabs the sample farthest from its current centroid,
    # so the centroid count stays exactly c
    cur = np.einsum("ij,ij->i", H - centroids[labels], H - centroids[labels])
    for j in np.where(counts == 0)[0]:
        far = int(np.argmax(cur))
        centroids[j] = H[far]
        labels[far] = j
        cur[far] = 0.0
    return labels, centroids


def kmeans(H, c: int, seed: int, max_iter: int = 300) -> ClusterAssignment:
    """Lloyd iterations from k-means++ seeding until the assignment is a
    fixpoint (or max_iter). Empty clusters are re-seeded, never dropped."""
    H = np.asarray(H, dtype=np.float64)
    n = H.shape[0]
    if n < c:
        raise DataError(f"kmeans needs n >= c, got n={n}, c={c}")
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_seed(H, c, rng)
    d2 = cdist(H, centroids, "sqeuclidean")
    labels = d2.argmin(axis=1)
    for _ in range(max_iter):
        counts = np.bincount(labels, minlength=c)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, H)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        if not nonempty.all():
            labels, centroids = _reseed_empty(H, labels, centroids, counts)
        d2 = cdist(H, centroids, "sqeuclidean")
        new_labels = d2.argmin(axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    inertia = float(d2[np.arange(n), labels].sum())
    return ClusterAssignment(labels=labels.astype(np.int64), centroids=centroids, inertia=inertia)


def cluster_embeddings(F, H):
    """Project indicator rows onto the embedding: Z = F^T H (c x l).

    Works on numpy arrays and on torch tensors (keeping gradients).
    """
    if F.shape[0] != H.shape[0]:
        raise DataError(f"indicator/embedding row mismatch: {F.shape} vs {H.shape}")
    return F.T @ H


def ncut_spectral(S, c: int, seed: int) -> np.ndarray:
    """Normalized-cut readout: spectral embedding of the affinity matrix,
    then seeded k-means.

    Isolated (zero-degree) nodes cannot be placed by the cut; they inherit
    the label of the nearest (by index) connected node, with a warning.
    """
    W = S.W if isinstance(S, AffinityGraph) else np.asarray(S, dtype=np.float64)
    n = W.shape[0]
    if np.abs(W - W.T).max() > 1e-9:
        raise DataError("affinity matrix must be symmetric")
    if W.min() < 0:
        raise DataError("affinity matrix must be nonnegative")
    deg = W.sum(axis=1)
    active = np.where(deg > 0)[0]
    if active.size < c:
        raise DataError(f"only {active.size} connected nodes but c={c}")
    if active.size < n:
        warnings.warn(
            f"{n - active.size} isolated node(s); assigning labels from nearest connected node"
        )
    Wa = W[np.ix_(active, active)]
    da = Wa.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(da)
    L_sym = np.eye(active.size) - Wa * inv_sqrt[:, None] * inv_sqrt[None, :]
    _, vecs = np.linalg.eigh(L_sym)
    emb = vecs[:, :c]
    norms = np.linalg.norm(emb, axis=1)
    nz = norms > 0
    emb[nz] = emb[nz] / norms[nz, None]
    sub_labels = kmeans(emb, c, seed).labels
    labels = np.full(n, -1, dtype=np.int64)
    labels[active] = sub_labels
    for i in np.where(labels < 0)[0]:
        offsets = np.abs(active - i)
        labels[i] = labels[active[int(np.argmin(offsets))]]
    return labels
