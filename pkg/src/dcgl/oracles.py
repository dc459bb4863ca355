"""Independent brute-force references used by the test suite.

Nothing here shares code with the production paths: the row-weight reference
goes through a generic sorting-based projection onto the probability simplex,
the diffusion reference sums the random-walk series term by term, and the
gradient reference is plain central differences. Not used by the CLI.
"""

from __future__ import annotations

import numpy as np


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a vector onto {x >= 0, sum x = 1}."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ranks = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ranks > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def simplex_qp_row(d: np.ndarray, k: int) -> np.ndarray:
    """Reference neighbor weights for one candidate-distance vector.

    Solves min ||a + d/(2g)||^2 over the simplex, with the regularization g
    chosen so the solution keeps exactly k nonzeros:
    g = (k*w_(k+1) - sum_{u<=k} w_(u)) / 2 for ascending-sorted w. Assumes
    generic position (g > 0); exact ties at the cut are out of scope here.
    """
    d = np.asarray(d, dtype=np.float64)
    if not 1 <= k <= d.size - 1:
        raise ValueError(f"need 1 <= k <= len(d)-1, got k={k}, len={d.size}")
    w = np.sort(d)
    g = (k * w[k] - w[:k].sum()) / 2.0
    if g <= 0:
        # exact tie through the cut: the g -> 0 limit spreads the mass
        # uniformly over the minimal distances
        argmin = d == w[0]
        return argmin / argmin.sum()
    return project_simplex(-d / (2.0 * g))


def ppr_series(G: np.ndarray, lam: float, T: int) -> tuple[np.ndarray, float]:
    """Truncated restart random-walk series sum_{i=0}^{T} lam*(1-lam)^i M^i
    with M the symmetric degree-normalized G. Returns (sum, tail bound)."""
    G = np.asarray(G, dtype=np.float64)
    n = G.shape[0]
    deg = G.sum(axis=1)
    if (deg <= 0).any():
        raise ValueError("series oracle needs positive degrees")
    inv_sqrt = 1.0 / np.sqrt(deg)
    M = G * inv_sqrt[:, None] * inv_sqrt[None, :]
    term = np.eye(n)
    acc = lam * term
    for _ in range(T):
        term = (1.0 - lam) * (M @ term)
        acc = acc + lam * term
    bound = (1.0 - lam) ** (T + 1)
    return acc, bound


def finite_diff_grad(loss_fn, params: dict[str, np.ndarray], h: float = 1e-5) -> dict[str, np.ndarray]:
    """Central-difference gradient of a scalar function of named arrays."""
    if h <= 0:
        raise ValueError("h must be > 0")
    grads = {}
    work = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    for name, arr in work.items():
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up = loss_fn(work)
            flat[idx] = orig - h
            down = loss_fn(work)
            flat[idx] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise ValueError(f"non-finite probe at {name}[{idx}]")
            gflat[idx] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads
