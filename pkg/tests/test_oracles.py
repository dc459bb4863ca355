import numpy as np
import pytest

from dcgl.oracles import finite_diff_grad, ppr_series, project_simplex, simplex_qp_row


def test_project_simplex_basic_properties():
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = rng.normal(size=8) * rng.uniform(0.1, 10)
        x = project_simplex(v)
        assert x.min() >= 0.0
        assert abs(x.sum() - 1.0) <= 1e-12


def test_project_simplex_known_cases():
    assert np.allclose(project_simplex(np.array([0.5, 0.5])), [0.5, 0.5])
    assert np.allclose(project_simplex(np.array([10.0, 0.0])), [1.0, 0.0])
    # equal entries share the mass regardless of scale
    assert np.allclose(project_simplex(np.array([-7.0, -7.0, -7.0])), [1 / 3] * 3)


def test_qp_row_k1_singleton():
    w = simplex_qp_row(np.array([3.0, 1.0, 2.0]), k=1)
    assert np.allclose(w, [0.0, 1.0, 0.0], atol=1e-12)


def test_qp_row_uniform_distances():
    # fully tied distances: the limit solution is uniform over the tie set
    w = simplex_qp_row(np.array([2.0, 2.0, 2.0, 2.0]), k=3)
    assert np.allclose(w, 0.25)


def test_qp_row_matches_closed_form_formula():
    rng = np.random.default_rng(1)
    for _ in range(100):
        d = rng.uniform(0.05, 4.0, size=10)
        k = int(rng.integers(1, 6))
        got = simplex_qp_row(d, k)
        w = np.sort(d)
        denom = k * w[k] - w[:k].sum()
        ref = np.maximum(w[k] - d, 0.0) / denom
        assert np.abs(got - ref).max() <= 1e-8


def test_qp_row_bad_k():
    with pytest.raises(ValueError):
        simplex_qp_row(np.array([1.0, 2.0]), k=2)


def test_ppr_series_first_term_only():
    G = np.array([[0.0, 1.0], [1.0, 0.0]])
    S, bound = ppr_series(G, lam=0.3, T=0)
    assert np.allclose(S, 0.3 * np.eye(2))
    assert bound == pytest.approx(0.7)


def test_ppr_series_collapses_at_full_restart():
    G = np.array([[0.0, 2.0], [2.0, 0.0]])
    S, _ = ppr_series(G, lam=1.0, T=37)
    assert np.allclose(S, np.eye(2), atol=1e-15)


def test_ppr_series_rejects_isolated():
    with pytest.raises(ValueError):
        ppr_series(np.zeros((2, 2)), lam=0.5, T=3)


def test_finite_diff_quadratic():
    fn = lambda p: float(p["w"] @ p["w"])
    g = finite_diff_grad(fn, {"w": np.array([1.0, 2.0])}, h=1e-5)
    assert np.abs(g["w"] - [2.0, 4.0]).max() <= 1e-6


def test_finite_diff_linear_exact():
    coef = np.array([3.0, -1.0, 0.5])
    fn = lambda p: float(coef @ p["w"])
    g = finite_diff_grad(fn, {"w": np.zeros(3)}, h=1e-5)
    assert np.abs(g["w"] - coef).max() <= 1e-9


def test_finite_diff_multiple_tensors():
    fn = lambda p: float((p["a"] ** 2).sum() + 3.0 * p["b"].sum())
    g = finite_diff_grad(fn, {"a": np.array([[1.0, -2.0]]), "b": np.array([0.0])}, h=1e-5)
    assert np.abs(g["a"] - [[2.0, -4.0]]).max() <= 1e-6
    assert np.abs(g["b"] - [3.0]).max() <= 1e-9


def test_finite_diff_rejects_non_finite_probe():
    fn = lambda p: float("nan")
    with pytest.raises(ValueError, match="non-finite"):
        finite_diff_grad(fn, {"w": np.array([1.0])}, h=1e-5)
