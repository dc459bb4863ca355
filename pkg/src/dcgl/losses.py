"""The training objective: reconstruction, the two contrastive terms, and the
graph-learning trace term.

All loss functions return float64 torch scalars, so gradients flow to
whatever tensors require them. Affinity matrices and k-means centroids enter
as constants. Inside training paths, cosine similarity guards vector norms
with a 1e-12 epsilon; the public scalar ``cosine_sim`` is strict and raises
on zero vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .clustering import ClusterAssignment
from .errors import DataError, NumericalError
from .graph import AffinityGraph
from .networks import as_tensor

_NORM_EPS = 1e-12


@dataclass
class CentroidSet:
    """k-means centroids of the attributed embedding plus the assignment that
    produced them; negatives for an anchor are the other clusters' rows."""

    C: np.ndarray            # c x l
    assignments: np.ndarray  # length n, values in [0, c)

    @classmethod
    def from_assignment(cls, assign: ClusterAssignment) -> "CentroidSet":
        return cls(C=assign.centroids, assignments=assign.labels)


@dataclass
class LossBundle:
    """Per-epoch loss snapshot; total = l_ae + l_fl + alpha*l_gl + beta*l_cl."""

    l_ae: float
    l_fl: float
    l_gl: float
    l_cl: float
    total: float
    alpha: float
    beta: float
    gamma: float
    tau: float


def loss_ae(X, X_hat) -> torch.Tensor:
    """Mean squared reconstruction error: (1/2n) * sum_i ||x_i - xhat_i||^2."""
    X, X_hat = as_tensor(X), as_tensor(X_hat)
    if X.shape != X_hat.shape:
        raise DataError(f"shape mismatch: {tuple(X.shape)} vs {tuple(X_hat.shape)}")
    n = X.shape[0]
    return ((X - X_hat) ** 2).sum() / (2.0 * n)


def cosine_sim(u, v) -> float:
    """Cosine similarity of two vectors; strict about zero vectors."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DataError("cosine similarity undefined for zero vectors")
    return float(u @ v / (nu * nv))


def _cos_matrix(A: torch.Tensor, B: torch.Tensor) -> torch.Tensor:
    """All-pairs cosine similarity with epsilon-guarded norms."""
    An = A / (A.norm(dim=1, keepdim=True) + _NORM_EPS)
    Bn = B / (B.norm(dim=1, keepdim=True) + _NORM_EPS)
    return An @ Bn.T


def _cos_rows(A: torch.Tensor, B: torch.Tensor) -> torch.Tensor:
    num = (A * B).sum(dim=1)
    den = (A.norm(dim=1) + _NORM_EPS) * (B.norm(dim=1) + _NORM_EPS)
    return num / den


def loss_feature_contrastive(H1, H2, cents: CentroidSet, tau: float,
                             centroid_negatives: bool = True) -> torch.Tensor:
    """Feature-level InfoNCE: positive is the same sample's other-branch
    embedding; negatives are the centroids of all other clusters.

    With ``centroid_negatives=False`` (guidance ablation) the negatives are
    instead the n-1 non-corresponding rows of the other branch.
    """
    H1, H2 = as_tensor(H1), as_tensor(H2)
    if H1.shape != H2.shape:
        raise DataError(f"shape mismatch: {tuple(H1.shape)} vs {tuple(H2.shape)}")
    if tau <= 0:
        raise DataError("tau must be > 0")
    n = H1.shape[0]
    pos = _cos_rows(H1, H2) / tau
    if centroid_negatives:
        if cents is None:
            raise DataError("centroid negatives need a CentroidSet")
        C = as_tensor(cents.C)
        c = C.shape[0]
        if c < 2:
            raise DataError("feature contrastive loss needs c >= 2 (no negatives)")
        sims = _cos_matrix(H1, C) / tau                      # n x c
        own = torch.from_numpy(np.asarray(cents.assignments, dtype=np.int64))
        neg_mask = torch.ones((n, c), dtype=torch.bool)
        neg_mask[torch.arange(n), own] = False               # drop own centroid
    else:
        if n < 2:
            raise DataError("need n >= 2 for branch negatives")
        sims = _cos_matrix(H1, H2) / tau                     # n x n
        neg_mask = ~torch.eye(n, dtype=torch.bool)
    # -log( e^pos / (e^pos + sum e^neg) ), computed via logsumexp for stability
    neg = torch.where(neg_mask, sims, torch.tensor(-torch.inf, dtype=torch.float64))
    logits = torch.cat([pos[:, None], neg], dim=1)
    return (torch.logsumexp(logits, dim=1) - pos).mean()


def loss_graph(H1, S, gamma: float) -> torch.Tensor:
    """Graph-learning loss in trace form:
    Tr(H^T L H) + (gamma/2) Tr(S S^T), gradient flowing through H only."""
    W = S.W if isinstance(S, AffinityGraph) else np.asarray(S, dtype=np.float64)
    if np.abs(W - W.T).max() > 1e-9:
        raise DataError("graph loss needs a symmetric affinity matrix")
    H1 = as_tensor(H1)
    St = torch.from_numpy(np.ascontiguousarray(W))           # constant
    L = torch.diag(St.sum(dim=1)) - St
    smooth = (H1 * (L @ H1)).sum()
    frob = 0.5 * gamma * (St * St).sum()
    return smooth + frob


def _one_side(cross: torch.Tensor, intra: torch.Tensor, inside_log: bool) -> torch.Tensor:
    """Per-anchor contrastive term of one view direction.

    cross[i, j] = sim(anchor_i, other_j)/tau, intra likewise within the
    anchor view. The intra-view repulsion is an additive penalty outside the
    logarithm; ``inside_log`` folds it into the denominator instead.
    """
    r = cross.shape[0]
    diag = torch.arange(r)
    off = ~torch.eye(r, dtype=torch.bool)
    if inside_log:
        intra_off = torch.where(off, intra, torch.tensor(-torch.inf, dtype=torch.float64))
        denom = torch.logsumexp(torch.cat([cross, intra_off], dim=1), dim=1)
        return denom - cross[diag, diag]
    log_term = torch.logsumexp(cross, dim=1) - cross[diag, diag]
    additive = torch.where(off, intra.exp(), torch.zeros((), dtype=torch.float64)).sum(dim=1)
    return log_term + additive


def loss_cluster_contrastive(Z1, Z2, tau: float, inside_log: bool = False) -> torch.Tensor:
    """Cluster-level contrastive loss over centroid rows, symmetrized across
    the two views and averaged over 2c anchors."""
    Z1, Z2 = as_tensor(Z1), as_tensor(Z2)
    if Z1.shape != Z2.shape:
        raise DataError(f"shape mismatch: {tuple(Z1.shape)} vs {tuple(Z2.shape)}")
    if tau <= 0:
        raise DataError("tau must be > 0")
    r = Z1.shape[0]
    if r < 2:
        raise DataError("cluster contrastive loss needs at least 2 rows")
    cross12 = _cos_matrix(Z1, Z2) / tau
    side1 = _one_side(cross12, _cos_matrix(Z1, Z1) / tau, inside_log)
    side2 = _one_side(cross12.T, _cos_matrix(Z2, Z2) / tau, inside_log)
    return (side1 + side2).sum() / (2.0 * r)


def total_loss(l_ae, l_fl, l_gl, l_cl, alpha: float, beta: float,
               gamma: float, tau: float):
    """Weighted sum of the four components (disabled components enter as
    exact zeros). Returns the differentiable scalar and a float snapshot."""
    parts = [as_tensor(x) for x in (l_ae, l_fl, l_gl, l_cl)]
    total = parts[0] + parts[1] + alpha * parts[2] + beta * parts[3]
    if not torch.isfinite(total):
        raise NumericalError(
            "non-finite loss: "
            + ", ".join(
                f"{n}={float(p.detach())}" for n, p in zip(("ae", "fl", "gl", "cl"), parts)
            )
        )
    vals = [float(p.detach()) for p in parts]
    bundle = LossBundle(
        l_ae=vals[0], l_fl=vals[1], l_gl=vals[2], l_cl=vals[3],
        total=float(total.detach()),
        alpha=alpha, beta=beta, gamma=gamma, tau=tau,
    )
    return total, bundle
