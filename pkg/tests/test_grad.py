import numpy as np
import pytest

from conftest import KIND_CASES, make_model
from renkit import Dims, IQCSpec, SequenceBatch, init_direct_params
from renkit.grad import construct_with_cache, sensitivity_and_input_grads, zeros_model_grads
from renkit.train import OneStepLoss, SimulationErrorLoss, gradient, grads_to_vector
from renkit.types import DirectParams


def fd_gradient(theta, loss, iqc, activation, h=1e-5):
    vec = theta.to_vector()
    fd = np.zeros_like(vec)
    for i in range(vec.size):
        vp, vm = vec.copy(), vec.copy()
        vp[i] += h
        vm[i] -= h
        mp, _ = construct_with_cache(theta.from_vector(vp), iqc, activation)
        mm, _ = construct_with_cache(theta.from_vector(vm), iqc, activation)
        fd[i] = (loss.value(mp) - loss.value(mm)) / (2 * h)
    return fd


def max_rel_error(g, fd, floor=1e-6):
    denom = np.maximum(np.maximum(np.abs(g), np.abs(fd)), floor)
    return float(np.max(np.abs(g - fd) / denom))


def sim_loss(rng, T, m, p):
    return SimulationErrorLoss(
        SequenceBatch(inputs=[rng.standard_normal((T, m))], outputs=[rng.standard_normal((T, p))])
    )


class TestFiniteDifferences:
    @pytest.mark.parametrize("kind_case", KIND_CASES, ids=[k for k, _ in KIND_CASES])
    def test_all_kinds_smooth_activation(self, kind_case, rng):
        theta, iqc, _ = make_model(kind_case, (2, 2, 2, 3), seed=3)
        loss = sim_loss(rng, 5, 2, 2)
        _, grads = gradient(theta, loss, iqc=iqc, activation="tanh")
        g = grads_to_vector(theta, grads)
        fd = fd_gradient(theta, loss, iqc, "tanh")
        assert max_rel_error(g, fd) < 1e-4

    def test_rectangular_lipschitz(self, rng):
        iqc = IQCSpec.lipschitz(3.0, m=3, p=1)
        theta = init_direct_params(Dims(2, 3, 1, 4), seed=4, robust=True)
        loss = sim_loss(rng, 4, 3, 1)
        _, grads = gradient(theta, loss, iqc=iqc, activation="tanh")
        fd = fd_gradient(theta, loss, iqc, "tanh")
        assert max_rel_error(grads_to_vector(theta, grads), fd) < 1e-4

    def test_one_step_loss(self, rng):
        theta = init_direct_params(Dims(3, 2, 3, 4), seed=5)
        loss = OneStepLoss(
            rng.standard_normal((6, 3)), rng.standard_normal((6, 2)), rng.standard_normal((6, 3))
        )
        _, grads = gradient(theta, loss, activation="tanh")
        fd = fd_gradient(theta, loss, None, "tanh")
        assert max_rel_error(grads_to_vector(theta, grads), fd) < 1e-4

    def test_contraction_rate_parameterized(self, rng):
        theta = init_direct_params(Dims(2, 1, 1, 3), seed=6, alpha_bar=0.5)
        loss = sim_loss(rng, 5, 1, 1)
        _, grads = gradient(theta, loss, activation="tanh")
        fd = fd_gradient(theta, loss, None, "tanh")
        assert max_rel_error(grads_to_vector(theta, grads), fd) < 1e-4


class _BiasTargetLoss:
    """Quadratic pull of the output bias toward a target vector."""

    def __init__(self, target):
        self.target = target

    def value(self, model):
        return float(np.sum((model.by - self.target) ** 2))

    def value_and_model_grad(self, model):
        g = zeros_model_grads(model)
        g["by"] = 2.0 * (model.by - self.target)
        return self.value(model), g


def test_toy_quadratic_gradient_analytic():
    theta = init_direct_params(Dims(2, 1, 1, 3), seed=7)
    theta = DirectParams(**{**theta.__dict__, "by": np.array([0.4])})
    target = np.array([1.5])
    val, grads = gradient(theta, _BiasTargetLoss(target))
    assert np.isclose(val, (0.4 - 1.5) ** 2)
    assert np.allclose(grads["by"], 2 * (0.4 - 1.5))
    # bias-only losses leave every certificate-shaping parameter untouched
    for name in ("X", "Y1", "B2til", "C2", "D12til", "D21", "bx", "bv"):
        assert np.all(grads[name] == 0)


def test_dead_output_path_isolates_readout(rng):
    # with C2 = D21 = 0, outputs see only D22 u + by: no gradient reaches
    # the dynamics parameters
    theta = init_direct_params(Dims(2, 1, 1, 3), seed=8)
    theta = DirectParams(
        **{**theta.__dict__, "C2": np.zeros((1, 2)), "D21": np.zeros((1, 3))}
    )
    loss = sim_loss(rng, 6, 1, 1)
    _, grads = gradient(theta, loss, activation="tanh")
    for name in ("X", "Y1", "B2til", "D12til", "bx", "bv"):
        assert np.allclose(grads[name], 0.0)
    assert np.any(grads["C2"] != 0)


def test_input_gradients_match_fd(rng):
    _, _, model = make_model(("c-aren", None), (2, 1, 1, 3), seed=9, activation="tanh")
    T = 6
    u = rng.standard_normal((T, 1))
    v = u + 0.05 * rng.standard_normal((T, 1))
    gamma, gu, gv = sensitivity_and_input_grads(model, u, v)
    h = 1e-6

    def val(uu, vv):
        g, _, _ = sensitivity_and_input_grads(model, uu, vv)
        return g

    for k in range(T):
        d = np.zeros((T, 1))
        d[k, 0] = h
        fd_u = (val(u + d, v) - val(u - d, v)) / (2 * h)
        fd_v = (val(u, v + d) - val(u, v - d)) / (2 * h)
        assert abs(fd_u - gu[k, 0]) < 1e-5 * max(1.0, abs(fd_u))
        assert abs(fd_v - gv[k, 0]) < 1e-5 * max(1.0, abs(fd_v))


def test_gradient_determinism(rng):
    theta, iqc, _ = make_model(("r-aren-lip", ("lipschitz", 2.0)), (2, 2, 2, 3), seed=10)
    loss = sim_loss(rng, 5, 2, 2)
    _, g1 = gradient(theta, loss, iqc=iqc)
    _, g2 = gradient(theta, loss, iqc=iqc)
    for k in g1:
        assert np.array_equal(g1[k], g2[k])
