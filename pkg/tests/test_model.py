import numpy as np
import pytest

from conftest import make_model
from renkit import (
    Dims,
    SequenceBatch,
    embed_feedforward,
    init_direct_params,
    read_sequences,
    simulate,
    trajectory_pair_gap,
    write_sequences,
)
from renkit.errors import DimensionError
from renkit.model import rollout
from renkit.param import construct_contracting


def test_zero_model_outputs_zero(rng):
    theta = init_direct_params(Dims(2, 1, 1, 3), seed=0, scale=0.0)
    model = construct_contracting(theta)
    y, x, w = simulate(model, rng.standard_normal((20, 1)))
    assert np.all(y == 0) and np.all(x == 0)


def test_lti_matches_linear_recursion(rng):
    # q = 0: no neurons, the model is plain linear state space
    theta = init_direct_params(Dims(3, 2, 2, 0), seed=1)
    model = construct_contracting(theta)
    u = rng.standard_normal((40, 2))
    x0 = rng.standard_normal(3)
    y, xs, w = simulate(model, u, x0)
    assert w.shape == (40, 0)
    x = x0.copy()
    for t in range(40):
        y_ref = model.C2 @ x + model.D22 @ u[t] + model.by
        assert np.allclose(y[t], y_ref, atol=1e-12)
        x = model.A @ x + model.B2 @ u[t] + model.bx
    assert np.allclose(xs[-1], x, atol=1e-12)


def test_feedforward_model_is_static(rng):
    W0, b0 = rng.standard_normal((4, 2)), rng.standard_normal(4)
    W1, b1 = rng.standard_normal((1, 4)), rng.standard_normal(1)
    model = embed_feedforward([(W0, b0), (W1, b1)])
    u = rng.standard_normal((30, 2))
    y, _, _ = simulate(model, u)
    ref = np.maximum(u @ W0.T + b0, 0.0) @ W1.T + b1
    assert np.allclose(y, ref, atol=1e-13)


def test_state_trajectory_has_terminal_state(rng):
    _, _, model = make_model(("c-aren", None), (3, 1, 2, 4), seed=3)
    u = rng.standard_normal((25, 1))
    y, x, w = simulate(model, u)
    assert y.shape == (25, 2) and x.shape == (26, 3) and w.shape == (25, 4)


def test_gap_zero_for_equal_starts(rng):
    _, _, model = make_model(("c-aren", None), (3, 1, 1, 4), seed=4)
    u = rng.standard_normal((15, 1))
    a = rng.standard_normal(3)
    assert np.all(trajectory_pair_gap(model, u, a, a.copy()) == 0)


def test_gap_decays_exponentially(rng):
    theta = init_direct_params(Dims(3, 1, 1, 4), seed=5, alpha_bar=0.8)
    model = construct_contracting(theta)
    u = rng.standard_normal((80, 1))
    gap = trajectory_pair_gap(model, u, rng.standard_normal(3), rng.standard_normal(3))
    # log-linear fit oracle over the segment above the numeric floor
    ts = np.nonzero(gap > gap[0] * 1e-12)[0]
    ts = ts[(ts >= 5) & (ts < 60)]
    assert ts.size >= 10
    slope = np.polyfit(ts, np.log(gap[ts]), 1)[0]
    assert np.exp(slope) <= np.sqrt(0.8) + 0.03


def test_one_step_forgetting(rng):
    # A = 0 and B1 = 0: the state is fully determined by the last input
    theta = init_direct_params(Dims(2, 1, 1, 2), seed=6, scale=0.0)
    model = construct_contracting(theta)
    u = rng.standard_normal((10, 1))
    gap = trajectory_pair_gap(model, u, rng.standard_normal(2), rng.standard_normal(2))
    assert gap[0] > 0 and np.all(gap[1:] == 0)


def test_simulation_deterministic(rng):
    _, _, model = make_model(("c-ren", None), (3, 2, 2, 5), seed=7)
    u = rng.standard_normal((30, 2))
    y1, x1, w1 = simulate(model, u)
    y2, x2, w2 = simulate(model, u)
    assert np.array_equal(y1, y2) and np.array_equal(x1, x2) and np.array_equal(w1, w2)


def test_incremental_lyapunov_descent(rng):
    for seed in range(4):
        theta = init_direct_params(Dims(3, 2, 1, 4), seed=seed, scale=1.5)
        model = construct_contracting(theta)
        P = model.certificate.P
        u = rng.standard_normal((40, 2))
        _, xa, _ = simulate(model, u, rng.standard_normal(3))
        _, xb, _ = simulate(model, u, rng.standard_normal(3))
        dx = xa - xb
        V = np.einsum("ti,ij,tj->t", dx, P, dx)
        assert np.all(np.diff(V) <= 1e-8)


def test_rollout_batch_agrees_with_simulate(rng):
    _, _, model = make_model(("c-aren", None), (2, 2, 1, 3), seed=8)
    U = rng.standard_normal((4, 12, 2))
    Y = rollout(model, U)
    # repeated identical calls are bit-identical; batching may reassociate
    assert np.array_equal(Y, rollout(model, U))
    for b in range(4):
        yb, _, _ = simulate(model, U[b])
        assert np.allclose(Y[b], yb, atol=1e-12)


def test_rollout_rejects_bad_shapes(rng):
    _, _, model = make_model(("c-aren", None), (2, 2, 1, 3), seed=8)
    with pytest.raises(DimensionError):
        rollout(model, rng.standard_normal((4, 12, 3)))


class TestSequenceCsv:
    def test_round_trip_single(self, tmp_path, rng):
        u = rng.standard_normal((9, 2))
        y = rng.standard_normal((9, 1))
        path = tmp_path / "seq.csv"
        write_sequences(path, SequenceBatch(inputs=[u], outputs=[y]))
        back = read_sequences(path)
        assert len(back) == 1
        assert np.array_equal(back.inputs[0], u)
        assert np.array_equal(back.outputs[0], y)

    def test_round_trip_multiple_sequences(self, tmp_path, rng):
        us = [rng.standard_normal((5, 1)), rng.standard_normal((7, 1))]
        path = tmp_path / "multi.csv"
        write_sequences(path, SequenceBatch(inputs=us))
        back = read_sequences(path)
        assert back.outputs is None
        assert [u.shape for u in back.inputs] == [(5, 1), (7, 1)]
        assert np.array_equal(back.inputs[1], us[1])

    def test_rejects_garbage(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("t,u1\n0,notanumber\n")
        with pytest.raises(DimensionError):
            read_sequences(p)
        p.write_text("a,b\n1,2\n")
        with pytest.raises(DimensionError):
            read_sequences(p)
        p.write_text("")
        with pytest.raises(DimensionError):
            read_sequences(p)
