"""Echo-state usage: random contracting dynamics + least-squares readout.

Random free parameters always land inside the contracting model set, so
sampled dynamics have the echo-state property by construction; only the
affine output map is learned, which is a linear least-squares problem in the
rolled-out features [x; w; u; 1].
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

import numpy as np

from .model import simulate
from .param import construct_contracting
from .types import Dims, ExplicitModel, SequenceBatch, init_direct_params


def sample_contracting(
    dims: Dims,
    seed: int | np.random.Generator = 0,
    scale: float = 1.0,
    *,
    acyclic: bool = True,
    activation: str = "relu",
    input_init: str = "default",
    epsilon: float = 1e-3,
    alpha_bar: float = 1.0,
) -> ExplicitModel:
    """Draw a random contracting model with a zeroed output map.

    Free matrices get Gaussian entries with standard deviation
    scale/sqrt(2n+q); the output blocks (C2, D21, D22, by) are left at zero
    as placeholders for a fitted readout.
    """
    theta = init_direct_params(
        Dims(*dims),
        acyclic=acyclic,
        robust=False,
        seed=seed,
        scale=scale,
        input_init=input_init,
        epsilon=epsilon,
        alpha_bar=alpha_bar,
    )
    n, m, p, q = theta.dims
    theta = replace(theta, C2=np.zeros((p, n)), D21=np.zeros((p, q)), by=np.zeros(p))
    return construct_contracting(theta, activation=activation)


def _features(model: ExplicitModel, batch: SequenceBatch):
    """Stack rollout features [x_t; w_t; u_t; 1] and targets over the batch."""
    rows, targets = [], []
    x0s = batch.initial_states
    for i, u in enumerate(batch.inputs):
        x0 = None if x0s is None else x0s[i]
        _, x, w = simulate(model, u, x0)
        rows.append(np.hstack([x[:-1], w, u, np.ones((u.shape[0], 1))]))
        if batch.outputs is not None:
            targets.append(batch.outputs[i])
    Phi = np.vstack(rows)
    Y = np.vstack(targets) if targets else None
    return Phi, Y


def fit_readout(
    model: ExplicitModel,
    data: SequenceBatch,
    ridge: float = 0.0,
) -> ExplicitModel:
    """Least-squares fit of the affine output map on rolled-out features.

    Rank-deficient feature matrices get the minimal-norm solution; ridge > 0
    adds Tikhonov rows (the constant feature included).  Dynamics blocks are
    returned untouched.
    """
    if data.outputs is None:
        raise ValueError("fit_readout needs target outputs")
    n, m, _, q = model.dims
    Phi, Y = _features(model, data)
    if ridge > 0.0:
        k = Phi.shape[1]
        Phi = np.vstack([Phi, np.sqrt(ridge) * np.eye(k)])
        Y = np.vstack([Y, np.zeros((k, Y.shape[1]))])
    Theta, *_ = np.linalg.lstsq(Phi, Y, rcond=None)
    Theta = Theta.T  # p x (n + q + m + 1)
    p = Y.shape[1]
    return replace(
        model,
        C2=Theta[:, :n].copy(),
        D21=Theta[:, n : n + q].copy(),
        D22=Theta[:, n + q : n + q + m].copy(),
        by=Theta[:, n + q + m].copy(),
    )
