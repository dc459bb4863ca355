"""Adaptive k-neighbor affinity graphs.

Each row's weights solve a simplex-constrained quadratic program whose
closed-form solution keeps only the k nearest non-self neighbors:

    a_j = (w_(k+1) - w_(j))_+ / (k * w_(k+1) - sum_{u<=k} w_(u))

with w the ascending-sorted candidate distances. The assembled matrix is
symmetrized to (A + A^T)/2. Construction involves a hard sort, so graphs are
always constants with respect to any network parameters (stop-gradient).

Dense n x n storage throughout; memory is 8*n^2 bytes per graph.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DataError, NumericalError

MAGIC_GRAPH = b"DCGL"

# Relative tie tolerance: a vanishing denominator means the first k+1 sorted
# distances coincide, where the closed form degenerates to uniform weights.
_TIE_EPS = 1e-12


class GraphRole(Enum):
    INITIAL_A = 0
    LPG_SL = 1
    PRE_DIFFUSION_G = 2
    GDG_SG = 3


@dataclass
class AffinityGraph:
    """Symmetric nonnegative weight matrix with zero diagonal (except GDG)."""

    W: np.ndarray
    k: int
    role: GraphRole


@dataclass
class NormalizedGraph:
    """Self-looped, symmetrically degree-normalized graph for convolution."""

    W_hat: np.ndarray
    role: GraphRole


def pairwise_sq_dists(X: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between all row pairs.

    Exact zero diagonal, symmetric, clamped at zero against round-off.
    """
    X = np.asarray(X, dtype=np.float64)
    if not np.isfinite(X).all():
        raise NumericalError("pairwise distances: non-finite input")
    D = cdist(X, X, metric="sqeuclidean")
    D = np.maximum(D, 0.0)
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return D


def solve_row_weights(d: np.ndarray, self_index: int, k: int) -> np.ndarray:
    """Closed-form neighbor weights for one node given its distance row.

    The self entry is excluded from the candidates and forced to weight 0.
    The result lies on the probability simplex with at most k nonzeros.
    k = n-1 (no (k+1)-th neighbor left) and exact ties at the (k+1)-th
    distance both fall back to uniform 1/k over the first k candidates,
    the limit of the formula; sort ties break by index.
    """
    d = np.asarray(d, dtype=np.float64)
    n = d.shape[0]
    if not 1 <= k <= n - 1:
        raise DataError(f"need 1 <= k <= n-1, got k={k}, n={n}")
    candidates = np.delete(np.arange(n), self_index)
    dc = d[candidates]
    order = np.argsort(dc, kind="stable")
    a = np.zeros(n)
    if k == n - 1:
        a[candidates] = 1.0 / k
        return a
    w = dc[order]
    w_kp1 = w[k]
    denom = k * w_kp1 - np.sum(w[:k])
    if denom <= _TIE_EPS * max(1.0, w_kp1):
        a[candidates[order[:k]]] = 1.0 / k
        return a
    weights = np.maximum(w_kp1 - dc, 0.0) / denom
    a[candidates] = weights
    return a


def build_graph(Y: np.ndarray, k: int, role: GraphRole = GraphRole.LPG_SL) -> AffinityGraph:
    """Assemble the adaptive neighbor graph of the rows of Y and symmetrize."""
    Y = np.asarray(Y, dtype=np.float64)
    n = Y.shape[0]
    D = pairwise_sq_dists(Y)
    A = np.empty((n, n))
    for i in range(n):
        A[i] = solve_row_weights(D[i], i, k)
    W = 0.5 * (A + A.T)
    np.fill_diagonal(W, 0.0)
    return AffinityGraph(W=W, k=k, role=role)


def normalize_graph(graph: AffinityGraph) -> NormalizedGraph:
    """Add self-loops and apply symmetric degree normalization.

    Returns D^{-1/2} (W + I) D^{-1/2}; the self-loop guarantees positive
    degrees, and all eigenvalues of the result lie in [-1, 1].
    """
    W = graph.W
    A_tilde = W + np.eye(W.shape[0])
    d = A_tilde.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    W_hat = A_tilde * inv_sqrt[:, None] * inv_sqrt[None, :]
    W_hat = 0.5 * (W_hat + W_hat.T)
    return NormalizedGraph(W_hat=W_hat, role=graph.role)


def neighbor_schedule(epoch: int, k_init: int, t: int, n: int, c: int) -> int:
    """Neighbor count for a 1-based epoch: grows by k_init every t epochs,
    capped at floor(n/c)."""
    if epoch < 1:
        raise DataError("epoch is 1-based")
    k = k_init * (1 + (epoch - 1) // t)
    return min(k, n // c)


def save_graph(path, graph: AffinityGraph):
    """Write a graph in the shared binary container, role tag in the header."""
    W = np.ascontiguousarray(graph.W, dtype=np.float64)
    n = W.shape[0]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIIB", MAGIC_GRAPH, n, n, graph.role.value))
        fh.write(W.astype("<f8").tobytes())


def load_graph(path) -> AffinityGraph:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError:
        raise DataError(f"graph file not found: {path}")
    header = struct.calcsize("<4sIIB")
    if len(blob) < header:
        raise DataError("graph container truncated (no header)")
    magic, n, m, role = struct.unpack_from("<4sIIB", blob, 0)
    if magic != MAGIC_GRAPH or n != m:
        raise DataError("not a graph container")
    if len(blob) != header + 8 * n * n:
        raise DataError("graph container truncated")
    W = np.frombuffer(blob, dtype="<f8", count=n * n, offset=header).reshape(n, n)
    return AffinityGraph(W=W.copy(), k=0, role=GraphRole(role))


def write_edge_list_csv(path, graph: AffinityGraph):
    """Export nonzero entries as (i, j, w) rows."""
    rows, cols = np.nonzero(graph.W)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("i,j,w\n")
        for i, j in zip(rows, cols):
            fh.write(f"{i},{j},{float(graph.W[i, j])!r}\n")
