"""Hand-rolled reverse-mode gradients for the fixed computation graph.

The graph is always the same: direct parameters -> construction -> explicit
weights -> unrolled rollout (with an implicit equilibrium layer per step)
-> loss.  Rather than a general tape, each stage has a dedicated backward
pass; gradients flow model-space first (one array per explicit weight), then
through the construction into the free parameters.

Matrix-inverse and diagonal-scaling sensitivities use the standard factor
rules; the equilibrium layer is differentiated through the implicit function
theorem (one transposed linear solve per step).
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from . import activations, equilibrium
from .model import rollout
from .param import _construct_cached
from .types import DirectParams, ExplicitModel, IQCSpec

_WEIGHTS = ("A", "B1", "B2", "C1", "D11", "D12", "C2", "D21", "D22", "bx", "bv", "by")


def construct_with_cache(
    theta: DirectParams, iqc: Optional[IQCSpec] = None, activation: str = "relu"
):
    """Construction that also returns the intermediates its backward needs."""
    return _construct_cached(theta, iqc, activation)


def zeros_model_grads(model: ExplicitModel) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(getattr(model, name)) for name in _WEIGHTS}


def _equilibrium_adjoint(
    D11: np.ndarray, J: np.ndarray, wbar: np.ndarray, acyclic: bool
) -> np.ndarray:
    """Batched solve of (I - D11^T J) p = wbar, returning g = J * p.

    J holds per-sample activation slopes (batch x q).  For strictly
    lower-triangular D11 the system is upper triangular and one reverse
    sweep suffices.
    """
    B, q = wbar.shape
    if q == 0:
        return wbar.copy()
    if acyclic:
        p = np.empty_like(wbar)
        jp = np.empty_like(wbar)
        for i in range(q - 1, -1, -1):
            acc = wbar[:, i] if i == q - 1 else wbar[:, i] + jp[:, i + 1 :] @ D11[i + 1 :, i]
            p[:, i] = acc
            jp[:, i] = J[:, i] * acc
        return jp
    Ms = np.eye(q)[None, :, :] - D11.T[None, :, :] * J[:, None, :]
    p = np.linalg.solve(Ms, wbar[:, :, None])[:, :, 0]
    return J * p


def rollout_backward(
    model: ExplicitModel,
    cache: dict,
    Ybar: np.ndarray,
    terminal_state_bar: Optional[np.ndarray] = None,
    want_input_grads: bool = False,
):
    """Reverse-mode pass through a cached rollout.

    Ybar is the loss gradient w.r.t. the outputs (B, T, p);
    ``terminal_state_bar`` optionally seeds the gradient of the final state.
    Returns (model grads, gradient w.r.t. x0, gradient w.r.t. U or None).
    """
    X, W, Z, U = cache["X"], cache["W"], cache["Z"], cache["U"]
    B, T, _ = U.shape
    n, m, p, q = model.dims
    acyclic = not np.any(np.triu(model.D11) != 0.0)
    g = zeros_model_grads(model)
    Ubar = np.zeros_like(U) if want_input_grads else None

    xbar = np.zeros((B, n)) if terminal_state_bar is None else np.array(terminal_state_bar, dtype=float)
    for t in range(T - 1, -1, -1):
        xt, wt, ut, ybar = X[:, t], W[:, t], U[:, t], Ybar[:, t]
        # output equation
        g["C2"] += ybar.T @ xt
        g["D21"] += ybar.T @ wt
        g["D22"] += ybar.T @ ut
        g["by"] += ybar.sum(axis=0)
        wbar = ybar @ model.D21
        xcur = ybar @ model.C2
        ub = ybar @ model.D22 if want_input_grads else None
        # state update (xbar is the gradient w.r.t. x_{t+1})
        g["A"] += xbar.T @ xt
        g["B1"] += xbar.T @ wt
        g["B2"] += xbar.T @ ut
        g["bx"] += xbar.sum(axis=0)
        wbar = wbar + xbar @ model.B1
        xcur = xcur + xbar @ model.A
        if want_input_grads:
            ub = ub + xbar @ model.B2
        # equilibrium layer w = sigma(D11 w + C1 x + D12 u + bv)
        J = activations.slope(model.activation, Z[:, t])
        gv = _equilibrium_adjoint(model.D11, J, wbar, acyclic)
        g["D11"] += gv.T @ wt
        g["C1"] += gv.T @ xt
        g["D12"] += gv.T @ ut
        g["bv"] += gv.sum(axis=0)
        xcur = xcur + gv @ model.C1
        if want_input_grads:
            Ubar[:, t] = ub + gv @ model.D12
        xbar = xcur
    return g, xbar, Ubar


def one_step_prediction(model: ExplicitModel, X0: np.ndarray, U: np.ndarray):
    """Next-state map over a batch of (state, input) samples, with cache."""
    bw = X0 @ model.C1.T + U @ model.D12.T + model.bv
    q = model.dims.q
    if q == 0:
        w = bw
    elif np.any(np.triu(model.D11) != 0.0):
        w = equilibrium.solve_pr_batch(
            model.D11, bw, model.activation, tolerance=1e-12, max_iters=2000
        )
    else:
        w = equilibrium._sweep_lower(model.D11, bw, model.activation)
    xnext = X0 @ model.A.T + w @ model.B1.T + U @ model.B2.T + model.bx
    return xnext, {"X0": X0, "U": U, "W": w, "Z": w @ model.D11.T + bw}


def one_step_backward(model: ExplicitModel, cache: dict, Rbar: np.ndarray) -> dict[str, np.ndarray]:
    """Backward of the next-state map; Rbar is the gradient w.r.t. the
    predicted state (batch x n)."""
    X0, U, W, Z = cache["X0"], cache["U"], cache["W"], cache["Z"]
    acyclic = not np.any(np.triu(model.D11) != 0.0)
    g = zeros_model_grads(model)
    g["A"] += Rbar.T @ X0
    g["B1"] += Rbar.T @ W
    g["B2"] += Rbar.T @ U
    g["bx"] += Rbar.sum(axis=0)
    wbar = Rbar @ model.B1
    J = activations.slope(model.activation, Z)
    gv = _equilibrium_adjoint(model.D11, J, wbar, acyclic)
    g["D11"] += gv.T @ W
    g["C1"] += gv.T @ X0
    g["D12"] += gv.T @ U
    g["bv"] += gv.sum(axis=0)
    return g


def construction_backward(cache: dict, mg: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Pull model-space gradients back through the construction to the free
    parameters.  Returns one array per free field of the DirectParams."""
    theta: DirectParams = cache["theta"]
    model: ExplicitModel = cache["model"]
    n, m, p, q = theta.dims
    i1, i2, i3 = cache["slices"]
    E, lam = cache["E"], cache["lam"]
    abar = theta.alpha_bar

    def tsolve(M, B):
        return np.linalg.solve(M.T, B) if M.shape[0] else np.zeros_like(B)

    # explicit weights from the implicit form: A = E^{-1}F etc.
    GA = tsolve(E, mg["A"])
    GB1 = tsolve(E, mg["B1"])
    GB2 = tsolve(E, mg["B2"])
    Ebar = -(GA @ model.A.T + GB1 @ model.B1.T + GB2 @ model.B2.T)
    Fbar, B1tilbar, B2tilbar = GA, GB1, GB2

    if q:
        C1tilbar = mg["C1"] / lam[:, None]
        D11tilbar = mg["D11"] / lam[:, None]
        D12tilbar = mg["D12"] / lam[:, None]
        lambar = -(
            (mg["C1"] * model.C1).sum(axis=1)
            + (mg["D11"] * model.D11).sum(axis=1)
            + (mg["D12"] * model.D12).sum(axis=1)
        ) / lam
    else:
        C1tilbar = np.zeros((0, n))
        D11tilbar = np.zeros((0, 0))
        D12tilbar = np.zeros((0, m))
        lambar = np.zeros(0)

    # E = (H11 + Ptil/abar + Y1 - Y1^T) / 2
    H11bar = 0.5 * Ebar
    Ptilbar = Ebar / (2.0 * abar)
    Y1bar = 0.5 * (Ebar - Ebar.T)

    grads: dict[str, np.ndarray] = {
        "Y1": Y1bar,
        "B2til": B2tilbar,
        "C2": mg["C2"].copy(),
        "D12til": D12tilbar,
        "D21": mg["D21"].copy(),
        "bx": mg["bx"].copy(),
        "bv": mg["bv"].copy(),
        "by": mg["by"].copy(),
    }

    if theta.acyclic:
        H22bar = 0.5 * np.diag(lambar) - np.tril(D11tilbar, -1)
    else:
        lambar = lambar + np.diagonal(D11tilbar)
        H22bar = -0.5 * D11tilbar
        grads["Y2"] = -0.5 * (D11tilbar - D11tilbar.T)
        grads["g"] = lambar * lam

    Hbar = np.zeros((2 * n + q, 2 * n + q))
    Hbar[i1, i1] += H11bar
    Hbar[i3, i3] += Ptilbar
    Hbar[i3, i1] += Fbar
    Hbar[i3, i2] += B1tilbar
    Hbar[i2, i1] -= C1tilbar
    Hbar[i2, i2] += H22bar

    if model.iqc is not None:
        _robust_backward(cache, mg, Hbar, grads)

    grads["X"] = theta.X @ (Hbar + Hbar.T)
    return grads


def _robust_backward(cache: dict, mg: dict, Hbar: np.ndarray, grads: dict) -> None:
    """Extra gradient paths of the robust construction: the rank corrections
    of H and the Cayley-transform feedthrough."""
    theta: DirectParams = cache["theta"]
    iqc: IQCSpec = cache["model"].iqc
    n, m, p, q = theta.dims
    K, V, U, G, D22 = cache["RcalInv"], cache["V"], cache["U"], cache["G"], cache["D22"]

    Hs = Hbar + Hbar.T
    Vbar = Hs @ V @ K
    Kbar = V.T @ Hbar @ V
    Rcalbar = -K @ Kbar @ K
    Rs = Rcalbar + Rcalbar.T
    Ubar = -(Hs @ U @ iqc.Q)

    Ccal2bar = Vbar[:n].T
    Dcal21bar = Vbar[n : n + q].T
    grads["B2til"] = grads["B2til"] + Vbar[n + q :]
    grads["C2"] += Ubar[:n].T + G.T @ Ccal2bar
    grads["D21"] += Ubar[n : n + q].T + G.T @ Dcal21bar
    grads["D12til"] = grads["D12til"] - Dcal21bar.T

    D22bar = mg["D22"] + (iqc.S.T + iqc.Q @ D22) @ Rs
    D22bar = D22bar + iqc.Q @ theta.C2 @ Ccal2bar.T
    D22bar = D22bar + iqc.Q @ theta.D21 @ Dcal21bar.T

    d22c = cache["d22"]
    kind = d22c["kind"]
    if kind == "input_passive":
        Mbar = D22bar
    elif kind == "output_passive":
        W = d22c["W"]
        Mbar = -(W.T @ D22bar @ W.T) / d22c["rho"]
    else:
        W, Zfull = d22c["W"], d22c["Zfull"]
        LQ, LR = d22c["LQ"], d22c["LR"]
        Zbar = np.linalg.solve(LQ.T, D22bar) @ LR.T
        Zfullbar = np.zeros_like(Zfull)
        Zfullbar[:p, :m] = Zbar
        Gz = Zfullbar @ W.T
        Mbar = -Gz - Zfull.T @ Gz
    grads["X3"] = theta.X3 @ (Mbar + Mbar.T)
    grads["Y3"] = Mbar - Mbar.T


def sensitivity_and_input_grads(
    model: ExplicitModel, u: np.ndarray, v: np.ndarray, x0: Optional[np.ndarray] = None
) -> tuple[float, np.ndarray, np.ndarray]:
    """Observed sensitivity ||y(u)-y(v)|| / ||u-v|| for a shared initial
    state, and its gradients w.r.t. both input sequences."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    X0 = None if x0 is None else np.asarray(x0, dtype=float)[None, :]
    Yu, cu = rollout(model, u[None], X0, return_cache=True)
    Yv, cv = rollout(model, v[None], X0, return_cache=True)
    dy = Yu[0] - Yv[0]
    ny = float(np.linalg.norm(dy))
    nuv = float(np.linalg.norm(u - v))
    if nuv == 0.0:
        raise ZeroDivisionError("input pair is degenerate (u == v)")
    gamma = ny / nuv
    if ny == 0.0:
        return 0.0, np.zeros_like(u), np.zeros_like(v)
    seed = (dy / ny / nuv)[None]
    _, _, gu = rollout_backward(model, cu, seed, want_input_grads=True)
    _, _, gv = rollout_backward(model, cv, -seed, want_input_grads=True)
    du = (u - v) * (gamma / nuv**2)
    return gamma, gu[0] - du, gv[0] + du
