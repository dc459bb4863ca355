"""Clustering metrics and diagnostic plots.

ACC pairs predicted clusters with classes through a maximum-weight one-to-one
assignment on the confusion matrix (Hungarian method). NMI uses natural logs
and sqrt-of-entropies normalization. Plots are written pixel-per-entry as
PNG: a thresholded cosine-similarity heatmap and a binarized adjacency image
with a block-diagonal quality score alongside.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from matplotlib import pyplot as plt
from scipy.optimize import linear_sum_assignment

from .errors import DataError
from .graph import AffinityGraph


@dataclass
class MetricReport:
    acc: float
    nmi: float
    confusion: np.ndarray   # c x c counts, confusion[i, j] = #(true i, pred j)
    matching: np.ndarray    # matching[j] = class matched to predicted cluster j


def _check_labels(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=np.int64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.int64).ravel()
    if y_true.shape != y_pred.shape:
        raise DataError(f"label length mismatch: {y_true.size} vs {y_pred.size}")
    if y_true.size == 0:
        raise DataError("empty label vectors")
    if y_true.min() < 0 or y_pred.min() < 0:
        raise DataError("labels must be nonnegative")
    return y_true, y_pred


def _confusion(y_true, y_pred):
    c = int(max(y_true.max(), y_pred.max())) + 1
    M = np.zeros((c, c), dtype=np.int64)
    np.add.at(M, (y_true, y_pred), 1)
    return M


def accuracy(y_true, y_pred) -> float:
    """Fraction of samples matched under the best cluster-to-class bijection.

    The confusion matrix is square (padded with zero rows/columns when one
    side uses fewer labels), so empty predicted clusters are harmless.
    """
    y_true, y_pred = _check_labels(y_true, y_pred)
    M = _confusion(y_true, y_pred)
    rows, cols = linear_sum_assignment(M.max() - M)
    return float(M[rows, cols].sum()) / y_true.size


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(y_true, y_pred) -> float:
    """Mutual information normalized by sqrt(H(U) * H(V)), natural logs.

    Two single-cluster labelings are identical partitions, hence 1.0; if only
    one side is constant the mutual information is 0, hence 0.0.
    """
    y_true, y_pred = _check_labels(y_true, y_pred)
    n = y_true.size
    M = _confusion(y_true, y_pred).astype(np.float64)
    row = M.sum(axis=1)
    col = M.sum(axis=0)
    h_u = _entropy(row, n)
    h_v = _entropy(col, n)
    if h_u == 0.0 and h_v == 0.0:
        return 1.0
    if h_u == 0.0 or h_v == 0.0:
        return 0.0
    nz = M > 0
    p = M[nz] / n
    outer = np.outer(row, col)[nz] / (n * n)
    mi = float((p * np.log(p / outer)).sum())
    return mi / np.sqrt(h_u * h_v)


def metric_report(y_true, y_pred) -> MetricReport:
    y_true, y_pred = _check_labels(y_true, y_pred)
    M = _confusion(y_true, y_pred)
    rows, cols = linear_sum_assignment(M.max() - M)
    matching = np.empty(M.shape[0], dtype=np.int64)
    matching[cols] = rows
    acc = float(M[rows, cols].sum()) / y_true.size
    return MetricReport(acc=acc, nmi=nmi(y_true, y_pred), confusion=M, matching=matching)


def _sorted_by_label(M, labels_order):
    order = np.argsort(np.asarray(labels_order), kind="stable")
    return M[np.ix_(order, order)], np.asarray(labels_order)[order]


def cosine_similarity_matrix(H) -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    norms = np.linalg.norm(H, axis=1) + 1e-12
    Hn = H / norms[:, None]
    return Hn @ Hn.T


def plot_similarity_heatmap(H, labels_order, path, percentile: float = 90.0) -> np.ndarray:
    """Cosine-similarity heatmap with rows grouped by label; entries below
    the given percentile are zeroed so only the large values remain.
    Returns the thresholded matrix that was rendered."""
    sim = cosine_similarity_matrix(H)
    sim, _ = _sorted_by_label(sim, labels_order)
    cut = np.percentile(sim, percentile)
    shown = np.where(sim >= cut, sim, 0.0)
    plt.imsave(path, np.clip(shown, 0.0, 1.0), cmap="viridis", vmin=0.0, vmax=1.0)
    return shown


def block_quality_score(B: np.ndarray, labels_sorted) -> float:
    """Intra-block nonzero fraction minus inter-block nonzero fraction,
    over off-diagonal entries of a binarized matrix."""
    labels_sorted = np.asarray(labels_sorted)
    same = labels_sorted[:, None] == labels_sorted[None, :]
    off = ~np.eye(B.shape[0], dtype=bool)
    intra = B[same & off]
    inter = B[~same]
    intra_frac = float(intra.mean()) if intra.size else 0.0
    inter_frac = float(inter.mean()) if inter.size else 0.0
    return intra_frac - inter_frac


def plot_adjacency(S, labels_order, path) -> float:
    """Binarized adjacency image, rows/cols grouped by label. The block
    quality score is returned and written to ``<path>.score.json``."""
    W = S.W if isinstance(S, AffinityGraph) else np.asarray(S, dtype=np.float64)
    B = (W != 0).astype(np.float64)
    B, labels_sorted = _sorted_by_label(B, labels_order)
    score = block_quality_score(B, labels_sorted)
    plt.imsave(path, B, cmap="gray", vmin=0.0, vmax=1.0)
    with open(f"{path}.score.json", "w", encoding="utf-8") as fh:
        json.dump({"block_quality": score}, fh)
        fh.write("\n")
    return score
