import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eta_stack.explain import (
    BackgroundSet,
    ExplainError,
    Explanation,
    exact_shap_oracle,
    explain,
    kernel_shap,
    lime_explain,
)
from eta_stack.explain.shap import shapley_kernel


def names(m):
    return [f"x{j}" for j in range(m)]


def background(m, k=30, seed=0, scale=1.0):
    X = np.random.default_rng(seed).normal(0, scale, size=(k, m))
    return BackgroundSet.from_data(X, names(m), k=k)


def piecewise(m, seed):
    """Random function with thresholds and an interaction, vectorised over rows."""
    g = np.random.default_rng(seed)
    w = g.normal(size=m)
    cut = g.normal(size=m)
    a, b = g.choice(m, 2, replace=False)

    def f(Z):
        Z = np.atleast_2d(Z)
        return (Z > cut) @ w + np.maximum(Z[:, a], 0) * Z[:, b] + 0.3 * Z[:, 0]
    return f


# kernel shap

def test_linear_closed_form_single_row_background():
    w, b = np.array([2.0, -1.0, 0.5, 4.0]), 7.0
    r = np.array([1.0, 1.0, -2.0, 0.0])
    x = np.array([3.0, 0.0, 1.0, -1.0])
    e = kernel_shap(lambda Z: Z @ w + b, x, BackgroundSet.single(r, names(4)))
    np.testing.assert_allclose(e.attributions, w * (x - r), atol=1e-12)
    assert e.extra["mode"] == "exact"


def test_symmetry_axiom():
    f = lambda Z: np.atleast_2d(Z)[:, 0] * np.atleast_2d(Z)[:, 1] + np.sin(np.atleast_2d(Z)[:, 2])
    x = np.array([1.5, 1.5, 0.3])
    bg = background(3)
    bg.rows[:, 1] = bg.rows[:, 0]  # exchangeable pair in the background too
    e = kernel_shap(f, x, bg)
    assert abs(e.attributions[0] - e.attributions[1]) < 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_exact_mode_matches_oracle(seed):
    f = piecewise(8, seed)
    bg = background(8, k=20, seed=seed)
    x = np.random.default_rng(100 + seed).normal(size=8)
    a = kernel_shap(f, x, bg, n_coalitions=256)
    b = exact_shap_oracle(f, x, bg)
    assert a.extra["mode"] == "exact"
    assert np.max(np.abs(a.attributions - b.attributions)) < 1e-6
    assert a.base_value == pytest.approx(b.base_value)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 7), st.integers(0, 10 ** 6))
def test_local_accuracy_exact_mode(m, seed):
    f = piecewise(max(m, 2), seed) if m >= 2 else (lambda Z: np.atleast_2d(Z)[:, 0] ** 2)
    bg = background(m, k=10, seed=seed)
    x = np.random.default_rng(seed).normal(size=m)
    e = kernel_shap(f, x, bg, n_coalitions=2 ** m)
    fx = float(f(x[None, :])[0])
    assert e.base_value + e.attributions.sum() == pytest.approx(fx, rel=1e-8, abs=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.integers(3, 7), st.integers(0, 10 ** 6))
def test_null_player(m, seed):
    inner = piecewise(m - 1, seed)
    f = lambda Z: inner(np.atleast_2d(Z)[:, :-1])  # never reads the last feature
    x = np.random.default_rng(seed).normal(size=m)
    e = kernel_shap(f, x, background(m, k=8, seed=seed))
    assert abs(e.attributions[-1]) < 1e-9


def test_sampling_converges():
    # paired sampling is exact for pairwise games, so add a third-order interaction
    g = piecewise(8, 42)
    f = lambda Z: g(Z) + np.tanh(Z[:, 1] * Z[:, 2] * Z[:, 3] + Z[:, 4]) * np.abs(Z[:, 5])
    bg = background(8, k=15, seed=3)
    x = np.random.default_rng(7).normal(size=8)
    exact = exact_shap_oracle(f, x, bg).attributions
    medians = []
    for n in (32, 64, 128):
        errs = [np.max(np.abs(kernel_shap(f, x, bg, n_coalitions=n, seed=s).attributions - exact))
                for s in range(20)]
        medians.append(np.median(errs))
    assert medians[0] > medians[1] > medians[2]


def test_sampling_efficiency_and_error():
    f = piecewise(14, 1)
    bg = background(14, k=5)
    x = np.ones(14)
    e = kernel_shap(f, x, bg, n_coalitions=200, seed=3)
    assert e.extra["mode"] == "sampled"
    assert e.base_value + e.attributions.sum() == pytest.approx(float(f(x[None, :])[0]), rel=1e-9)
    with pytest.raises(ExplainError, match="m \\+ 2"):
        kernel_shap(f, x, bg, n_coalitions=10)


def test_shapley_kernel_weights():
    assert shapley_kernel(4, 1) == pytest.approx(3 / (4 * 1 * 3))
    assert shapley_kernel(4, 2) == pytest.approx(3 / (6 * 2 * 2))


# oracle

def test_oracle_single_player():
    bg = background(1, k=12)
    f = lambda Z: np.exp(np.atleast_2d(Z)[:, 0])
    e = exact_shap_oracle(f, np.array([0.7]), bg)
    assert e.attributions[0] == pytest.approx(np.exp(0.7) - np.mean(np.exp(bg.rows[:, 0])), abs=1e-12)


def test_oracle_three_player_hand_table():
    # v: {} 0, {1} 10, {2} 20, {3} 30, {12} 40, {13} 50, {23} 60, {123} 90
    table = {(0, 0, 0): 0, (1, 0, 0): 10, (0, 1, 0): 20, (0, 0, 1): 30,
             (1, 1, 0): 40, (1, 0, 1): 50, (0, 1, 1): 60, (1, 1, 1): 90}
    f = lambda Z: np.array([table[tuple(int(v) for v in z)] for z in np.atleast_2d(Z)], dtype=float)
    bg = BackgroundSet.single(np.zeros(3), names(3))
    # phi_1 = 10/3 + (20 + 20)/6 + 30/3, and likewise for players 2 and 3
    expected = [10 / 3 + 40 / 6 + 30 / 3, 20 / 3 + 60 / 6 + 40 / 3, 30 / 3 + 80 / 6 + 50 / 3]
    np.testing.assert_allclose(exact_shap_oracle(f, np.ones(3), bg).attributions, expected, rtol=1e-12)
    np.testing.assert_allclose(kernel_shap(f, np.ones(3), bg).attributions, expected, rtol=1e-9)


def test_oracle_refuses_large_m():
    with pytest.raises(ExplainError, match="model evaluations"):
        exact_shap_oracle(lambda Z: np.zeros(len(Z)), np.zeros(13), background(13, k=2))


# lime

def test_lime_linear_recovery():
    w, b = np.array([3.0, -2.0, 0.5, 1.0]), 10.0
    bg = background(4, k=200, seed=1, scale=2.0)
    x = np.array([1.0, 2.0, -1.0, 0.5])
    e = lime_explain(lambda Z: Z @ w + b, x, bg, n_samples=5000, seed=0)
    coef = np.array(e.extra["coefficients"])
    assert coef @ w / (np.linalg.norm(coef) * np.linalg.norm(w)) > 0.99
    np.testing.assert_allclose(e.attributions, w * (x - bg.mean), rtol=0.02, atol=0.02)


def test_lime_constant_function():
    e = lime_explain(lambda Z: np.full(len(Z), 42.0), np.zeros(3), background(3), n_samples=500)
    assert np.max(np.abs(e.attributions)) < 1e-8


def test_lime_product_gradient():
    m = 5
    bg = BackgroundSet(np.zeros((1, m)), names(m), np.zeros(m), np.full(m, 0.5), np.zeros((3, m)))
    x = np.array([2.0, 3.0, 0.0, 0.0, 0.0])
    e = lime_explain(lambda Z: Z[:, 0] * Z[:, 1], x, bg, n_samples=20000, seed=4)
    coef = np.array(e.extra["coefficients"])
    grad = np.array([3.0, 2.0, 0.0, 0.0, 0.0])  # analytic gradient of z1*z2 at x
    assert np.linalg.norm(coef - grad) / np.linalg.norm(grad) < 0.05


def test_lime_deterministic_and_seed_sensitive():
    f = piecewise(4, 0)
    bg, x = background(4), np.ones(4)
    a = lime_explain(f, x, bg, n_samples=300, seed=5)
    b = lime_explain(f, x, bg, n_samples=300, seed=5)
    c = lime_explain(f, x, bg, n_samples=300, seed=6)
    np.testing.assert_array_equal(a.attributions, b.attributions)
    assert not np.array_equal(a.attributions, c.attributions)


def test_lime_errors():
    bg = background(3)
    with pytest.raises(ExplainError, match="m \\+ 2"):
        lime_explain(lambda Z: Z[:, 0], np.zeros(3), bg, n_samples=4)
    with pytest.raises(ExplainError, match="kernel_width"):
        lime_explain(lambda Z: Z[:, 0], np.zeros(3), bg, n_samples=50, kernel_width=1e-6, seed=1)


# plumbing

def test_explanation_json_round_trip():
    e = kernel_shap(lambda Z: Z.sum(axis=1), np.ones(3), background(3), sample_id=9, model="M")
    d = e.to_dict()
    assert set(d) >= {"method", "sample_id", "base_value", "features"}
    back = Explanation.from_dict(d)
    np.testing.assert_array_equal(back.attributions, e.attributions)
    assert back.sample_id == 9 and back.model == "M" and back["x1"] == e["x1"]


def test_explain_dispatch():
    bg = background(3)
    f = lambda Z: Z.sum(axis=1)
    assert explain("shap", f, np.ones(3), bg).method == "shap"
    assert explain("lime", f, np.ones(3), bg, lime_samples=100).method == "lime"
    with pytest.raises(ExplainError):
        explain("anchors", f, np.ones(3), bg)


def test_background_from_data():
    X = np.arange(300, dtype=float).reshape(100, 3)
    bg = BackgroundSet.from_data(X, names(3), k=10, seed=2)
    assert bg.k == 10 and np.all(np.diff(bg.rows[:, 0]) > 0)
    np.testing.assert_allclose(bg.mean, X.mean(axis=0))
    assert BackgroundSet.from_data(X, names(3), k=10, seed=2).rows.tolist() == bg.rows.tolist()
    with pytest.raises(ValueError):
        BackgroundSet(np.zeros((2, 2)), names(3), np.zeros(3), np.ones(3), np.zeros((3, 3)))
