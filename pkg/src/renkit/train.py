"""Gradient-based learning of direct parameters.

Because the parameterization is unconstrained, training is plain Adam on the
flattened parameter vector; every intermediate iterate already carries its
stability certificate, so no projection or feasibility repair ever runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import DimensionError, NumericalAbortError
from .grad import (
    construct_with_cache,
    construction_backward,
    one_step_backward,
    one_step_prediction,
    rollout,
    rollout_backward,
)
from .types import DirectParams, ExplicitModel, IQCSpec, SequenceBatch


def nrmse(y: np.ndarray, y_ref: np.ndarray) -> float:
    """Normalized root-mean-square error ||y_ref - y|| / ||y_ref||."""
    y = np.asarray(y, dtype=float)
    y_ref = np.asarray(y_ref, dtype=float)
    if y.shape != y_ref.shape:
        raise DimensionError(f"shape mismatch: {y.shape} vs {y_ref.shape}")
    ref = np.linalg.norm(y_ref)
    if ref == 0.0:
        raise ValueError("reference signal has zero norm")
    return float(np.linalg.norm(y_ref - y) / ref)


def loss_simulation_error(model: ExplicitModel, batch: SequenceBatch) -> float:
    """Total squared output error of the model rollouts over the batch."""
    return SimulationErrorLoss(batch, normalize=False).value(model)


class SimulationErrorLoss:
    """Squared output error over rolled-out sequences.

    ``normalize=True`` divides by the total number of scalar outputs, which
    keeps learning rates comparable across chunk lengths; the plain loss is
    the raw sum.
    """

    def __init__(self, batch: SequenceBatch, normalize: bool = True):
        if batch.outputs is None:
            raise ValueError("simulation-error loss needs target outputs")
        self.batch = batch
        self.normalize = normalize

    def _scale(self) -> float:
        if not self.normalize:
            return 1.0
        return 1.0 / sum(y.size for y in self.batch.outputs)

    def _groups(self) -> Iterable[tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]]:
        """Stack equal-length sequences so they roll out as one batch."""
        by_len: dict[int, list[int]] = {}
        for i, T in enumerate(self.batch.lengths):
            by_len.setdefault(T, []).append(i)
        x0s = self.batch.initial_states
        for T, idxs in by_len.items():
            U = np.stack([self.batch.inputs[i] for i in idxs])
            Y = np.stack([self.batch.outputs[i] for i in idxs])
            X0 = None if x0s is None else np.stack([x0s[i] for i in idxs])
            yield U, Y, X0

    def value(self, model: ExplicitModel) -> float:
        total = 0.0
        for U, Y, X0 in self._groups():
            Yhat = rollout(model, U, X0)
            total += float(np.sum((Yhat - Y) ** 2))
        return total * self._scale()

    def value_and_model_grad(self, model: ExplicitModel):
        scale = self._scale()
        total = 0.0
        grads = None
        for U, Y, X0 in self._groups():
            Yhat, cache = rollout(model, U, X0, return_cache=True)
            err = Yhat - Y
            total += float(np.sum(err**2))
            g, _, _ = rollout_backward(model, cache, (2.0 * scale) * err)
            grads = g if grads is None else {k: grads[k] + g[k] for k in g}
        return total * scale, grads


class OneStepLoss:
    """Mean squared next-state prediction error over snapshot pairs.

    Fits the state-update map directly: targets are states, each sample is
    independent, so no gradient flows across time.
    """

    def __init__(self, X0: np.ndarray, U: np.ndarray, X_next: np.ndarray):
        self.X0 = np.asarray(X0, dtype=float)
        self.U = np.asarray(U, dtype=float)
        self.X_next = np.asarray(X_next, dtype=float)
        if not (len(self.X0) == len(self.U) == len(self.X_next)):
            raise DimensionError("snapshot arrays must have equal lengths")

    def value(self, model: ExplicitModel) -> float:
        pred, _ = one_step_prediction(model, self.X0, self.U)
        return float(np.mean(np.sum((pred - self.X_next) ** 2, axis=1)))

    def value_and_model_grad(self, model: ExplicitModel):
        pred, cache = one_step_prediction(model, self.X0, self.U)
        err = pred - self.X_next
        val = float(np.mean(np.sum(err**2, axis=1)))
        g = one_step_backward(model, cache, (2.0 / len(err)) * err)
        return val, g


def gradient(
    theta: DirectParams,
    loss,
    *,
    iqc: Optional[IQCSpec] = None,
    activation: str = "relu",
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss value and its gradient with respect to every free parameter.

    ``loss`` is any object exposing value_and_model_grad(model); the result
    maps free-field names to arrays shaped like the parameters.
    """
    model, cache = construct_with_cache(theta, iqc, activation)
    value, mg = loss.value_and_model_grad(model)
    return value, construction_backward(cache, mg)


def grads_to_vector(theta: DirectParams, grads: dict[str, np.ndarray]) -> np.ndarray:
    return np.concatenate([grads[name].ravel() for name, _ in theta.free_arrays()])


@dataclass
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 1e-3
    lr_decay: float = 0.1
    lr_decay_every: Optional[int] = None  # epochs between decays; None = constant
    chunk_length: Optional[int] = None    # None = whole sequences
    batch_size: int = 8
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8

    def validate(self) -> None:
        if self.epochs < 0 or self.learning_rate < 0:
            raise ValueError("epochs and learning_rate must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.chunk_length is not None and self.chunk_length < 1:
            raise ValueError("chunk_length must be positive")

    def lr_at(self, epoch: int) -> float:
        if not self.lr_decay_every:
            return self.learning_rate
        return self.learning_rate * self.lr_decay ** (epoch // self.lr_decay_every)


class Adam:
    def __init__(self, size: int, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, vec: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.v / (1 - self.beta2**self.t)
        return vec - lr * mhat / (np.sqrt(vhat) + self.eps)

    def state_dict(self) -> dict:
        return {"m": self.m.tolist(), "v": self.v.tolist(), "t": self.t}

    def load_state(self, state: dict) -> None:
        self.m = np.asarray(state["m"], dtype=float)
        self.v = np.asarray(state["v"], dtype=float)
        self.t = int(state["t"])


def _chunk(batch: SequenceBatch, chunk_length: Optional[int]):
    """Cut sequences into equal-length chunks (hidden state reset to zero at
    each boundary; a trailing remainder shorter than the chunk is dropped)."""
    if batch.outputs is None:
        raise ValueError("training data needs outputs")
    if chunk_length is None:
        if len(set(batch.lengths)) != 1:
            raise ValueError("set chunk_length when sequence lengths differ")
        chunk_length = batch.lengths[0]
    if chunk_length > min(batch.lengths):
        raise ValueError("chunk_length exceeds the shortest sequence")
    us, ys = [], []
    for u, y in zip(batch.inputs, batch.outputs):
        for k in range(u.shape[0] // chunk_length):
            sl = slice(k * chunk_length, (k + 1) * chunk_length)
            us.append(u[sl])
            ys.append(y[sl])
    return np.stack(us), np.stack(ys)


class ChunkedSequences:
    """Training view of a SequenceBatch: equal-length chunks, zero initial
    state at every chunk boundary."""

    def __init__(self, batch: SequenceBatch, chunk_length: Optional[int]):
        self.U, self.Y = _chunk(batch, chunk_length)

    def __len__(self) -> int:
        return self.U.shape[0]

    def loss_for(self, idx: np.ndarray) -> SimulationErrorLoss:
        return SimulationErrorLoss(
            SequenceBatch(inputs=list(self.U[idx]), outputs=list(self.Y[idx]))
        )


class Snapshots:
    """Training view of one-step snapshot data (state, input, next state)."""

    def __init__(self, X0: np.ndarray, U: np.ndarray, X_next: np.ndarray):
        self.X0 = np.asarray(X0, dtype=float)
        self.U = np.asarray(U, dtype=float)
        self.X_next = np.asarray(X_next, dtype=float)
        if not (len(self.X0) == len(self.U) == len(self.X_next)):
            raise DimensionError("snapshot arrays must have equal lengths")

    def __len__(self) -> int:
        return len(self.X0)

    def loss_for(self, idx: np.ndarray) -> OneStepLoss:
        return OneStepLoss(self.X0[idx], self.U[idx], self.X_next[idx])


@dataclass
class FitResult:
    theta: DirectParams
    loss_history: list[float]
    step_log: list[tuple[int, int, float, float]] = field(default_factory=list)
    optimizer_state: Optional[dict] = None
    final_epoch: int = 0


def fit(
    theta0: DirectParams,
    data,
    config: TrainConfig,
    *,
    iqc: Optional[IQCSpec] = None,
    activation: str = "relu",
    frozen: tuple[str, ...] = (),
    callback: Optional[Callable[[int, DirectParams, ExplicitModel], None]] = None,
    adam: Optional[Adam] = None,
    start_epoch: int = 0,
) -> FitResult:
    """Minibatch Adam over a training view of the data.

    ``data`` is a SequenceBatch (trained on simulation error over chunks of
    config.chunk_length) or any object with __len__ and loss_for(idx).
    ``frozen`` names free fields excluded from updates (their gradient is
    zeroed).  ``callback(epoch, theta, model)`` runs after each epoch.
    ``start_epoch``/``adam`` resume a checkpointed run: the shuffling stream
    is fast-forwarded so a split run reproduces an unbroken one bit for bit.
    Raises NumericalAbortError as soon as the loss goes non-finite.
    """
    config.validate()
    if isinstance(data, SequenceBatch):
        data = ChunkedSequences(data, config.chunk_length)
    n_items = len(data)
    rng = np.random.default_rng(config.seed)
    for _ in range(start_epoch):
        rng.permutation(n_items)

    vec = theta0.to_vector()
    mask = np.ones_like(vec)
    k = 0
    for name, arr in theta0.free_arrays():
        if name in frozen:
            mask[k : k + arr.size] = 0.0
        k += arr.size

    if adam is None:
        adam = Adam(vec.size, config.beta1, config.beta2, config.eps_opt)
    history: list[float] = []
    step_log: list[tuple[int, int, float, float]] = []
    step = 0
    for epoch in range(start_epoch, start_epoch + config.epochs):
        lr = config.lr_at(epoch)
        order = rng.permutation(n_items)
        epoch_loss = 0.0
        for start in range(0, n_items, config.batch_size):
            idx = order[start : start + config.batch_size]
            theta = theta0.from_vector(vec)
            value, grads = gradient(theta, data.loss_for(idx), iqc=iqc, activation=activation)
            if not np.isfinite(value):
                raise NumericalAbortError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}",
                    epoch=epoch,
                    batch=start // config.batch_size,
                )
            gvec = grads_to_vector(theta, grads) * mask
            vec = adam.step(vec, gvec, lr)
            epoch_loss += value * len(idx)
            step_log.append((epoch, step, value, lr))
            step += 1
        history.append(epoch_loss / n_items)
        if callback is not None:
            model, _ = construct_with_cache(theta0.from_vector(vec), iqc, activation)
            callback(epoch, theta0.from_vector(vec), model)
    return FitResult(
        theta=theta0.from_vector(vec),
        loss_history=history,
        step_log=step_log,
        optimizer_state=adam.state_dict(),
        final_epoch=start_epoch + config.epochs,
    )
