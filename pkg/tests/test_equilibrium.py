import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from renkit import activations
from renkit.equilibrium import (
    EquilibriumProblem,
    equilibrium_jvp,
    equilibrium_vjp,
    residual,
    solve_acyclic,
    solve_pr,
)
from renkit.errors import ConvergenceError, StructureError


def picard(D, b, activation, iters=4000, damping=1.0):
    """Damped fixed-point iteration oracle, valid for ||D|| < 1."""
    w = np.zeros_like(b)
    for _ in range(iters):
        w = (1 - damping) * w + damping * activations.apply(activation, D @ w + b)
    return w


def test_acyclic_zero_matrix_relu():
    prob = EquilibriumProblem(np.zeros((2, 2)), np.array([1.0, -2.0]))
    assert np.array_equal(solve_acyclic(prob), np.array([1.0, 0.0]))


def test_acyclic_chain_relu():
    D = np.array([[0.0, 0.0], [1.0, 0.0]])
    prob = EquilibriumProblem(D, np.array([1.0, -2.0]))
    w = solve_acyclic(prob)
    assert np.array_equal(w, np.array([1.0, 0.0]))  # second neuron sees 1 - 2 < 0


def test_acyclic_residual_tanh(rng):
    D = np.tril(rng.standard_normal((8, 8)), -1)
    b = rng.standard_normal(8)
    prob = EquilibriumProblem(D, b, activation="tanh")
    w = solve_acyclic(prob)
    assert residual(prob, w) < 1e-14


def test_acyclic_rejects_full_matrix(rng):
    D = rng.standard_normal((3, 3))
    with pytest.raises(StructureError):
        solve_acyclic(EquilibriumProblem(D, np.zeros(3)))


def test_pr_zero_matrix(rng):
    b = rng.standard_normal(5)
    for act in ("relu", "tanh", "sigmoid"):
        prob = EquilibriumProblem(np.zeros((5, 5)), b, activation=act)
        w = solve_pr(prob)
        assert np.allclose(w, activations.apply(act, b), atol=1e-10)


def test_pr_matches_acyclic(rng):
    D = np.tril(rng.standard_normal((10, 10)), -1)
    b = rng.standard_normal(10)
    for act in ("relu", "tanh"):
        prob = EquilibriumProblem(D, b, activation=act, tolerance=1e-12)
        assert np.max(np.abs(solve_pr(prob) - solve_acyclic(prob))) < 1e-9


def test_pr_matches_picard_on_cyclic_shift(rng):
    # cyclic shift scaled to 0.4 keeps ||D|| < 1, so plain iteration converges
    D = 0.4 * np.roll(np.eye(6), 1, axis=0)
    b = rng.standard_normal(6)
    prob = EquilibriumProblem(D, b, activation="relu", tolerance=1e-13)
    w = solve_pr(prob)
    w_ref = picard(D, b, "relu")
    assert np.max(np.abs(w - w_ref)) < 1e-8


def test_pr_convergence_error_carries_residual(rng):
    D = 0.9 * np.roll(np.eye(6), 1, axis=0)
    prob = EquilibriumProblem(D, rng.standard_normal(6), tolerance=1e-14, max_iters=2)
    with pytest.raises(ConvergenceError) as exc:
        solve_pr(prob)
    assert exc.value.residual > 0


def test_jvp_identity_slopes():
    # relu with strictly positive pre-activations: J = I, D11 = 0
    prob = EquilibriumProblem(np.zeros((3, 3)), np.array([1.0, 2.0, 3.0]))
    w = solve_pr(prob)
    t = np.array([0.3, -0.1, 0.7])
    assert np.allclose(equilibrium_jvp(prob, w, t), t)


def test_jvp_dead_relu():
    prob = EquilibriumProblem(np.zeros((3, 3)), np.array([-1.0, -2.0, -3.0]))
    w = solve_pr(prob)
    assert np.allclose(equilibrium_jvp(prob, w, np.ones(3)), 0.0)


def test_jvp_matches_finite_differences(rng):
    q = 6
    D = rng.standard_normal((q, q))
    D *= 0.8 / np.linalg.norm(D, 2)
    b = rng.standard_normal(q)
    prob = EquilibriumProblem(D, b, activation="tanh", tolerance=1e-13)
    w = solve_pr(prob)
    h = 1e-6
    for k in range(q):
        db = np.zeros(q)
        db[k] = 1.0
        wp = solve_pr(EquilibriumProblem(D, b + h * db, activation="tanh", tolerance=1e-13))
        wm = solve_pr(EquilibriumProblem(D, b - h * db, activation="tanh", tolerance=1e-13))
        fd = (wp - wm) / (2 * h)
        jv = equilibrium_jvp(prob, w, db)
        assert np.max(np.abs(jv - fd)) / max(np.max(np.abs(fd)), 1e-8) < 1e-5


def test_vjp_is_jvp_transpose(rng):
    q = 5
    D = rng.standard_normal((q, q))
    D *= 0.7 / np.linalg.norm(D, 2)
    b = rng.standard_normal(q)
    prob = EquilibriumProblem(D, b, activation="sigmoid")
    w = solve_pr(prob)
    t = rng.standard_normal(q)
    c = rng.standard_normal(q)
    assert np.isclose(c @ equilibrium_jvp(prob, w, t), equilibrium_vjp(prob, w, c) @ t)


def test_uniqueness_from_different_starts(rng):
    D = rng.standard_normal((7, 7))
    D *= 0.9 / np.linalg.norm(D, 2)
    b = rng.standard_normal(7)
    tol = 1e-11
    prob = EquilibriumProblem(D, b, activation="tanh", tolerance=tol, max_iters=2000)
    w1 = solve_pr(prob, w0=10 * rng.standard_normal(7))
    w2 = solve_pr(prob, w0=-10 * rng.standard_normal(7))
    assert np.max(np.abs(w1 - w2)) < 2 * tol


@settings(max_examples=40, deadline=None)
@given(
    act=st.sampled_from(["relu", "tanh", "sigmoid"]),
    x=st.floats(-40, 40),
    y=st.floats(-40, 40),
)
def test_slope_restriction_property(act, x, y):
    if abs(x - y) < 1e-6:
        return
    ratio = (activations.apply(act, np.array(y)) - activations.apply(act, np.array(x))) / (y - x)
    assert -1e-12 <= ratio <= 1.0 + 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_pr_acyclic_consistency_property(seed):
    rng = np.random.default_rng(seed)
    q = int(rng.integers(1, 9))
    D = np.tril(rng.standard_normal((q, q)), -1)
    b = rng.standard_normal(q)
    tol = 1e-11
    prob = EquilibriumProblem(D, b, activation="relu", tolerance=tol, max_iters=3000)
    assert np.max(np.abs(solve_pr(prob) - solve_acyclic(prob))) < 10 * tol
