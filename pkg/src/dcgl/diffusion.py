"""Global diffusion graph: merged representation + personalized-PageRank smoothing.

The wide-neighborhood graph G (k fixed at floor(n/c)) is diffused through

    S = lam * [I - (1 - lam) * D^{-1/2} G D^{-1/2}]^{-1}

which is the closed form of the restart random-walk series
sum_i lam*(1-lam)^i M^i. Degrees come from G itself (no self-loops here).
Like all graphs, the result is a constant w.r.t. network parameters.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError, NumericalError
from .graph import AffinityGraph, GraphRole, build_graph


def merge_representations(H1: np.ndarray, H2: np.ndarray) -> np.ndarray:
    """Elementwise mean of the two branch embeddings."""
    H1 = np.asarray(H1, dtype=np.float64)
    H2 = np.asarray(H2, dtype=np.float64)
    if H1.shape != H2.shape:
        raise DataError(f"shape mismatch: {H1.shape} vs {H2.shape}")
    return 0.5 * (H1 + H2)


def build_global_graph(H: np.ndarray, c: int) -> AffinityGraph:
    """Neighbor graph of the merged embedding with k = floor(n/c)."""
    n = H.shape[0]
    k = n // c
    if k > n - 1:
        raise DataError(f"floor(n/c)={k} exceeds n-1={n - 1}")
    return build_graph(H, k, role=GraphRole.PRE_DIFFUSION_G)


def ppr_diffusion(graph: AffinityGraph, lam: float) -> AffinityGraph:
    """Closed-form personalized-PageRank diffusion of a symmetric graph.

    Every node needs positive degree. Output is symmetrized to absorb solver
    round-off; its diagonal is bounded below by lam.
    """
    if not (0 < lam <= 1):
        raise DataError("lambda must lie in (0, 1]")
    G = graph.W
    n = G.shape[0]
    deg = G.sum(axis=1)
    dead = np.where(deg <= 0)[0]
    if dead.size:
        raise DataError(f"isolated node {dead[0]}: zero degree in diffusion input")
    inv_sqrt = 1.0 / np.sqrt(deg)
    M = G * inv_sqrt[:, None] * inv_sqrt[None, :]
    system = np.eye(n) - (1.0 - lam) * M
    try:
        S = lam * np.linalg.solve(system, np.eye(n))
    except np.linalg.LinAlgError:
        # cannot happen for lam > 0 (spectral radius of M is <= 1), but guard
        raise NumericalError("diffusion system is singular")
    if not np.isfinite(S).all():
        raise NumericalError("diffusion produced non-finite values")
    S = 0.5 * (S + S.T)
    return AffinityGraph(W=S, k=graph.k, role=GraphRole.GDG_SG)
