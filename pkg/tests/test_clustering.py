import itertools

import numpy as np
import pytest
import torch

from dcgl.clustering import cluster_embeddings, kmeans, ncut_spectral
from dcgl.errors import DataError
from dcgl.graph import AffinityGraph, GraphRole


def test_kmeans_each_point_its_own_cluster():
    H = np.array([[0.0], [1.0], [2.0], [5.0]])
    out = kmeans(H, c=4, seed=0)
    assert out.inertia == 0.0
    assert len(set(out.labels.tolist())) == 4


def test_kmeans_two_blobs_exhaustive_partition_oracle():
    H = np.array([[0.0], [0.1], [10.0], [10.1]])
    out = kmeans(H, c=2, seed=0)
    # oracle: the best 2-partition by brute force over all assignments
    best, best_cost = None, np.inf
    for assign in itertools.product([0, 1], repeat=4):
        if len(set(assign)) < 2:
            continue
        cost = 0.0
        for j in (0, 1):
            pts = H[np.array(assign) == j]
            cost += ((pts - pts.mean(axis=0)) ** 2).sum()
        if cost < best_cost:
            best, best_cost = assign, cost
    same_best = (out.labels == out.labels[0]).astype(int)
    same_oracle = (np.array(best) == best[0]).astype(int)
    assert np.array_equal(same_best, same_oracle)
    assert abs(out.inertia - best_cost) <= 1e-12


def test_kmeans_inertia_monotone_over_iterations():
    rng = np.random.default_rng(0)
    H = rng.normal(size=(40, 3))
    inertias = [kmeans(H, c=4, seed=7, max_iter=j).inertia for j in range(1, 8)]
    assert all(b <= a + 1e-9 for a, b in zip(inertias, inertias[1:]))


def test_kmeans_deterministic():
    rng = np.random.default_rng(1)
    H = rng.normal(size=(30, 4))
    a = kmeans(H, c=3, seed=5)
    b = kmeans(H, c=3, seed=5)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.centroids, b.centroids)


def test_kmeans_never_leaves_empty_clusters():
    rng = np.random.default_rng(2)
    # heavy duplication makes empty clusters likely without the re-seed rule
    H = np.repeat(rng.normal(size=(3, 2)), [20, 20, 2], axis=0)
    H += 1e-6 * rng.normal(size=H.shape)
    for seed in range(10):
        out = kmeans(H, c=6, seed=seed)
        assert np.bincount(out.labels, minlength=6).min() >= 1


def test_kmeans_inertia_recomputable():
    rng = np.random.default_rng(3)
    H = rng.normal(size=(25, 3))
    out = kmeans(H, c=4, seed=1)
    ref = sum(np.sum((H[i] - out.centroids[out.labels[i]]) ** 2) for i in range(25))
    assert abs(out.inertia - ref) <= 1e-9


def test_kmeans_rotation_invariant_partition():
    rng = np.random.default_rng(4)
    H = np.vstack([
        rng.normal(size=(10, 3)) * 0.05 + [0, 0, 0],
        rng.normal(size=(10, 3)) * 0.05 + [4, 0, 0],
        rng.normal(size=(10, 3)) * 0.05 + [0, 4, 0],
    ])
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    a = kmeans(H, c=3, seed=2).labels
    b = kmeans(H @ Q.T, c=3, seed=2).labels
    # same partition up to relabeling
    mapping = {}
    for x, y in zip(a, b):
        mapping.setdefault(x, y)
        assert mapping[x] == y


def test_kmeans_needs_enough_samples():
    with pytest.raises(DataError):
        kmeans(np.ones((2, 2)), c=3, seed=0)


def test_cluster_embeddings_one_hot_masked_sum():
    rng = np.random.default_rng(5)
    H = rng.normal(size=(6, 3))
    labels = np.array([0, 1, 2, 0, 1, 0])
    F = np.zeros((6, 3))
    F[np.arange(6), labels] = 1.0
    Z = cluster_embeddings(F, H)
    for j in range(3):
        assert np.abs(Z[j] - H[labels == j].sum(axis=0)).max() <= 1e-12


def test_cluster_embeddings_uniform_indicator():
    rng = np.random.default_rng(6)
    H = rng.normal(size=(5, 4))
    F = np.full((5, 3), 1 / 3)
    Z = cluster_embeddings(F, H)
    expected = H.sum(axis=0) / 3
    for j in range(3):
        assert np.abs(Z[j] - expected).max() <= 1e-12


def test_cluster_embeddings_shape_and_linearity():
    rng = np.random.default_rng(7)
    F = rng.uniform(size=(6, 2))
    H1, H2 = rng.normal(size=(6, 3)), rng.normal(size=(6, 3))
    assert cluster_embeddings(F, H1).shape == (2, 3)
    lhs = cluster_embeddings(F, H1 + H2)
    rhs = cluster_embeddings(F, H1) + cluster_embeddings(F, H2)
    assert np.abs(lhs - rhs).max() <= 1e-12
    with pytest.raises(DataError):
        cluster_embeddings(np.ones((4, 2)), np.ones((5, 3)))


def test_cluster_embeddings_keeps_torch_gradients():
    F = torch.rand((4, 2), dtype=torch.float64, requires_grad=True)
    H = torch.rand((4, 3), dtype=torch.float64)
    Z = cluster_embeddings(F, H)
    (g,) = torch.autograd.grad(Z.sum(), [F])
    assert torch.isfinite(g).all()


def _block_graph(sizes, intra=1.0, inter=0.0, rng=None):
    n = sum(sizes)
    W = np.full((n, n), inter)
    start = 0
    labels = np.empty(n, dtype=int)
    for b, size in enumerate(sizes):
        W[start:start + size, start:start + size] = intra
        labels[start:start + size] = b
        start += size
    np.fill_diagonal(W, 0.0)
    if rng is not None:
        W += 0.0 * rng.normal(size=W.shape)
    return W, labels


def test_ncut_recovers_blocks_exactly():
    W, truth = _block_graph([5, 5, 5])
    labels = ncut_spectral(W, c=3, seed=0)
    # connected-components oracle: same block <=> same label
    for i in range(15):
        for j in range(15):
            assert (labels[i] == labels[j]) == (truth[i] == truth[j])


def test_disconnected_graph_has_c_zero_eigenvalues():
    W, _ = _block_graph([4, 4, 4])
    deg = W.sum(axis=1)
    inv = 1.0 / np.sqrt(deg)
    L = np.eye(12) - W * inv[:, None] * inv[None, :]
    evals = np.sort(np.linalg.eigvalsh(L))
    assert np.abs(evals[:3]).max() <= 1e-9
    assert evals[3] > 1e-6


def test_ncut_permutation_equivariance():
    rng = np.random.default_rng(8)
    W, _ = _block_graph([6, 5, 4])
    perm = rng.permutation(15)
    a = ncut_spectral(W, c=3, seed=1)
    b = ncut_spectral(W[np.ix_(perm, perm)], c=3, seed=1)
    mapping = {}
    for x, y in zip(a[perm], b):
        mapping.setdefault(x, y)
        assert mapping[x] == y


def test_ncut_scale_invariant_partition():
    W, _ = _block_graph([5, 6, 7])
    a = ncut_spectral(W, c=3, seed=0)
    b = ncut_spectral(2.0 * W, c=3, seed=0)
    mapping = {}
    for x, y in zip(a, b):
        mapping.setdefault(x, y)
        assert mapping[x] == y


def test_ncut_isolated_node_inherits_neighbor_label():
    W, _ = _block_graph([5, 5])
    n = 11
    big = np.zeros((n, n))
    big[:10, :10] = W
    with pytest.warns(UserWarning, match="isolated"):
        labels = ncut_spectral(big, c=2, seed=0)
    assert labels[10] == labels[9]  # nearest connected node by index


def test_ncut_accepts_affinity_graph_wrapper():
    W, _ = _block_graph([4, 4])
    g = AffinityGraph(W=W, k=3, role=GraphRole.LPG_SL)
    labels = ncut_spectral(g, c=2, seed=0)
    assert labels.shape == (8,)


def test_ncut_rejects_asymmetric_or_negative():
    with pytest.raises(DataError):
        ncut_spectral(np.array([[0.0, 1.0], [0.5, 0.0]]), c=2, seed=0)
    with pytest.raises(DataError):
        ncut_spectral(np.array([[0.0, -1.0], [-1.0, 0.0]]), c=2, seed=0)
