"""Forward simulation of explicit models and sequence data handling."""

from __future__ import annotations

import csv
from typing import Optional

import numpy as np

from . import activations, equilibrium
from .errors import ConvergenceError, DimensionError, SimulationUnstableError
from .types import ExplicitModel, SequenceBatch

_BLOWUP = 1e12


def rollout(
    model: ExplicitModel,
    U: np.ndarray,
    X0: Optional[np.ndarray] = None,
    *,
    return_cache: bool = False,
    eq_tolerance: float = 1e-12,
):
    """Batched rollout: U is (B, T, m), X0 is (B, n) (zeros when omitted).

    Returns Y of shape (B, T, p); with ``return_cache=True`` also a dict with
    the state trajectory X (B, T+1, n), neuron outputs W (B, T, q) and their
    pre-activations Z (B, T, q), as needed for reverse-mode accumulation.
    """
    n, m, p, q = model.dims
    U = np.asarray(U, dtype=float)
    if U.ndim != 3 or U.shape[2] != m:
        raise DimensionError(f"U must be (B, T, {m}), got {U.shape}")
    B, T, _ = U.shape
    x = np.zeros((B, n)) if X0 is None else np.array(X0, dtype=float).reshape(B, n)

    full_d11 = q > 0 and np.any(np.triu(model.D11) != 0.0)
    resolvent = equilibrium._pr_resolvent_matrix(model.D11, 1.0) if full_d11 else None

    X = np.empty((B, T + 1, n))
    W = np.empty((B, T, q))
    Z = np.empty((B, T, q))
    Y = np.empty((B, T, p))
    X[:, 0] = x
    for t in range(T):
        u = U[:, t]
        bw = x @ model.C1.T + u @ model.D12.T + model.bv
        try:
            if q == 0:
                w = bw
            elif full_d11:
                w = equilibrium.solve_pr_batch(
                    model.D11, bw, model.activation,
                    resolvent=resolvent, tolerance=eq_tolerance, max_iters=2000,
                )
            else:
                w = equilibrium._sweep_lower(model.D11, bw, model.activation)
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"equilibrium failed at time step {t}: {exc}", residual=exc.residual
            ) from exc
        Z[:, t] = w @ model.D11.T + bw
        W[:, t] = w
        Y[:, t] = x @ model.C2.T + w @ model.D21.T + u @ model.D22.T + model.by
        x = x @ model.A.T + w @ model.B1.T + u @ model.B2.T + model.bx
        X[:, t + 1] = x
        if not np.all(np.abs(x) < _BLOWUP):
            raise SimulationUnstableError(f"state exceeded {_BLOWUP:g} at time step {t}")
    if return_cache:
        return Y, {"X": X, "W": W, "Z": Z, "U": U}
    return Y


def simulate(
    model: ExplicitModel, u: np.ndarray, x0: Optional[np.ndarray] = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Roll a single input sequence u (T x m) from initial state x0.

    Returns (y, x, w): outputs (T x p), states including the terminal one
    ((T+1) x n), and neuron outputs (T x q).
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    X0 = None if x0 is None else np.asarray(x0, dtype=float)[None, :]
    Y, cache = rollout(model, u[None], X0, return_cache=True)
    return Y[0], cache["X"][0], cache["W"][0]


def trajectory_pair_gap(
    model: ExplicitModel, u: np.ndarray, a: np.ndarray, b: np.ndarray
) -> np.ndarray:
    """Euclidean distance |x_t^a - x_t^b| per step for two rollouts that share
    the input sequence u but start at a and b."""
    _, xa, _ = simulate(model, u, a)
    _, xb, _ = simulate(model, u, b)
    return np.linalg.norm(xa - xb, axis=1)


# ---------------------------------------------------------------------------
# Sequence CSV format: header "t,u1..um[,y1..yp]" with an optional leading
# seq_id column separating multiple sequences within one file.
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    return repr(float(v))


def write_sequences(path, batch: SequenceBatch) -> None:
    m = batch.m
    p = batch.p
    multi = len(batch) > 1
    header = (["seq_id"] if multi else []) + ["t"] + [f"u{i+1}" for i in range(m)]
    if p is not None:
        header += [f"y{i+1}" for i in range(p)]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for s, u in enumerate(batch.inputs):
            for t in range(u.shape[0]):
                row = ([s] if multi else []) + [t] + [_fmt(v) for v in u[t]]
                if p is not None:
                    row += [_fmt(v) for v in batch.outputs[s][t]]
                wr.writerow(row)


def read_sequences(path) -> SequenceBatch:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        try:
            header = next(rd)
        except StopIteration:
            raise DimensionError(f"{path}: empty sequence file")
        rows = list(rd)
    header = [h.strip() for h in header]
    has_id = header and header[0] == "seq_id"
    base = 1 if has_id else 0
    if len(header) <= base or header[base] != "t":
        raise DimensionError(f"{path}: expected a 't' column after the optional seq_id")
    u_cols = [i for i, h in enumerate(header) if h.startswith("u")]
    y_cols = [i for i, h in enumerate(header) if h.startswith("y")]
    if not u_cols:
        raise DimensionError(f"{path}: no input columns u1..um found")
    groups: dict[str, list[list[float]]] = {}
    order: list[str] = []
    for ln, row in enumerate(rows, start=2):
        if not row:
            continue
        try:
            vals = [float(row[i]) for i in u_cols + y_cols]
        except (ValueError, IndexError):
            raise DimensionError(f"{path}: bad numeric row at line {ln}")
        key = row[0] if has_id else "0"
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(vals)
    if not order:
        raise DimensionError(f"{path}: no data rows")
    nu = len(u_cols)
    inputs, outputs = [], []
    for key in order:
        arr = np.array(groups[key])
        inputs.append(arr[:, :nu])
        if y_cols:
            outputs.append(arr[:, nu:])
    return SequenceBatch(inputs=inputs, outputs=outputs if y_cols else None)
