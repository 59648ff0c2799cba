"""Direct parameterizations: unconstrained parameters -> certified models.

The construction stuffs the whole stability LMI into H = X^T X + eps*I (plus
rank corrections in the robust case), reads the implicit-form weights off the
blocks of H, and converts to explicit weights by inverting E and the diagonal
multiplier.  Every finite parameter value therefore yields a model carrying a
valid contraction certificate, with no constraint ever enforced during
optimization.

H is partitioned into blocks of sizes (n, q, n) along both axes, matching the
row structure of the stability LMI.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

import numpy as np

from .errors import DimensionError, IllConditionedError, InfeasibleIQCError
from .types import Certificate, DirectParams, Dims, ExplicitModel, IQCSpec

_COND_LIMIT = 1e12


def _solve(M: np.ndarray, B: np.ndarray) -> np.ndarray:
    if M.shape[0] == 0:
        return np.zeros((0, B.shape[1]))
    return np.linalg.solve(M, B)


def _chol_transposed(S: np.ndarray, what: str) -> np.ndarray:
    """Upper-triangular factor U with U^T U = S for symmetric S > 0."""
    S = 0.5 * (S + S.T)
    try:
        return np.linalg.cholesky(S).T
    except np.linalg.LinAlgError:
        raise InfeasibleIQCError(f"infeasible IQC spec: {what} is not positive definite")


def construct_d22(theta: DirectParams, iqc: IQCSpec) -> np.ndarray:
    """Feedthrough term satisfying R + S D22 + D22^T S^T + D22^T Q D22 > 0."""
    D22, _ = _construct_d22_cached(theta, iqc)
    return D22


def _construct_d22_cached(theta: DirectParams, iqc: IQCSpec) -> tuple[np.ndarray, dict]:
    n, m, p, q = theta.dims
    iqc.validate()
    if (iqc.p, iqc.m) != (p, m):
        raise DimensionError(f"IQC sized for (p={iqc.p}, m={iqc.m}), model has (p={p}, m={m})")
    if theta.X3 is None or theta.Y3 is None:
        raise DimensionError("robust construction requires X3 and Y3")
    eps = theta.epsilon
    s = max(p, m)
    M = theta.X3.T @ theta.X3 + theta.Y3 - theta.Y3.T + eps * np.eye(s)
    cache: dict = {"kind": iqc.kind, "M": M}

    if iqc.kind == "output_passive":
        rho = float(iqc.param)
        W = np.linalg.inv(np.eye(s) + M)
        D22 = W / rho
        cache.update(W=W, rho=rho)
        return D22, cache
    if iqc.kind == "input_passive":
        nu = float(iqc.param)
        D22 = nu * np.eye(s) + M
        return D22, cache

    # General route via the Cayley transform of M.
    Qcal = iqc.Q - eps * np.eye(p)
    W = np.linalg.inv(np.eye(s) + M)
    Zfull = (np.eye(s) - M) @ W
    Z = Zfull[:p, :m]
    Rtil = iqc.R - iqc.S @ np.linalg.solve(Qcal, iqc.S.T)
    LQ = _chol_transposed(-Qcal, "-(Q - eps I)")
    LR = _chol_transposed(Rtil, "R - S (Q - eps I)^{-1} S^T")
    D22 = -np.linalg.solve(Qcal, iqc.S.T) + np.linalg.solve(LQ, Z) @ LR
    cache.update(W=W, Zfull=Zfull, LQ=LQ, LR=LR)
    return D22, cache


def _construct_cached(
    theta: DirectParams, iqc: Optional[IQCSpec], activation: str
) -> tuple[ExplicitModel, dict]:
    theta.validate()
    n, m, p, q = theta.dims
    eps, abar = theta.epsilon, theta.alpha_bar
    i1, i2, i3 = slice(0, n), slice(n, n + q), slice(n + q, 2 * n + q)

    H = theta.X.T @ theta.X + eps * np.eye(2 * n + q)
    cache: dict = {"slices": (i1, i2, i3)}

    if iqc is None:
        D22 = np.zeros((p, m))
        kind = "c-aren" if theta.acyclic else "c-ren"
    else:
        D22, d22_cache = _construct_d22_cached(theta, iqc)
        kind = "r-aren" if theta.acyclic else "r-ren"
        Rcal = iqc.R + iqc.S @ D22 + D22.T @ iqc.S.T + D22.T @ iqc.Q @ D22
        Rcal = 0.5 * (Rcal + Rcal.T)
        try:
            np.linalg.cholesky(Rcal)
        except np.linalg.LinAlgError:
            raise InfeasibleIQCError("infeasible IQC spec: R + S D22 + D22^T S^T + D22^T Q D22 not positive definite")
        G = D22.T @ iqc.Q + iqc.S                     # m x p
        Ccal2 = G @ theta.C2                          # m x n
        Dcal21 = G @ theta.D21 - theta.D12til.T       # m x q
        V = np.vstack([Ccal2.T, Dcal21.T, theta.B2til])
        U = np.vstack([theta.C2.T, theta.D21.T, np.zeros((n, p))])
        RcalInv = np.linalg.inv(Rcal)
        H = H + V @ RcalInv @ V.T - U @ iqc.Q @ U.T
        cache.update(d22=d22_cache, Rcal=Rcal, RcalInv=RcalInv, V=V, U=U, G=G, D22=D22)

    F = H[i3, i1]
    B1til = H[i3, i2]
    Ptil = H[i3, i3]
    C1til = -H[i2, i1]
    H11 = H[i1, i1]
    H22 = H[i2, i2]

    E = 0.5 * (H11 + Ptil / abar + theta.Y1 - theta.Y1.T)
    if n and np.linalg.cond(E) > _COND_LIMIT:
        raise IllConditionedError("ill-conditioned construction: E is near singular")

    if theta.acyclic:
        lam = 0.5 * np.diag(H22).copy()
        D11til = -np.tril(H22, -1)
    else:
        lam = np.exp(theta.g)
        D11til = np.diag(lam) - 0.5 * (H22 + theta.Y2 - theta.Y2.T)
    if q and (not np.all(lam > 0.0) or lam.max() / max(lam.min(), 1e-300) > _COND_LIMIT):
        raise IllConditionedError("ill-conditioned construction: multiplier spread too large")

    A = _solve(E, F)
    B1 = _solve(E, B1til)
    B2 = _solve(E, theta.B2til)
    C1 = C1til / lam[:, None] if q else C1til
    D11 = D11til / lam[:, None] if q else D11til
    D12 = theta.D12til / lam[:, None] if q else theta.D12til

    if n:
        Pc = np.linalg.cholesky(0.5 * (Ptil + Ptil.T))
        Einv_scaled = np.linalg.solve(Pc, E)          # Pc^{-1} E, so P = E^T Ptil^{-1} E
        P = Einv_scaled.T @ Einv_scaled
        P = 0.5 * (P + P.T)
    else:
        P = np.zeros((0, 0))

    cert = Certificate(P=P, lam=lam, alpha=abar)
    model = ExplicitModel(
        A=A, B1=B1, B2=B2, C1=C1, D11=D11, D12=D12,
        C2=theta.C2.copy(), D21=theta.D21.copy(), D22=D22,
        bx=theta.bx.copy(), bv=theta.bv.copy(), by=theta.by.copy(),
        activation=activation, certificate=cert, kind=kind,
        epsilon=eps, alpha_bar=abar, iqc=iqc,
    )
    cache.update(H=H, E=E, lam=lam, model=model, theta=theta)
    return model, cache


def _attach_margins(model: ExplicitModel) -> ExplicitModel:
    from . import verify  # deferred: verify imports this module's outputs only

    if model.iqc is None:
        lmi = verify.contraction_lmi_matrix(model)
    else:
        lmi = verify.iqc_lmi_matrix(model, model.iqc)
    wp = verify.wellposedness_matrix(model)
    cert = replace(
        model.certificate,
        lmi_min_eig=float(np.linalg.eigvalsh(lmi).min()) if lmi.size else np.inf,
        wellposed_min_eig=float(np.linalg.eigvalsh(wp).min()) if wp.size else np.inf,
    )
    return replace(model, certificate=cert)


def construct_contracting(
    theta: DirectParams,
    dims: Optional[Dims] = None,
    *,
    activation: str = "relu",
    certify: bool = True,
) -> ExplicitModel:
    """Map direct parameters to an explicit contracting model.

    ``certify=True`` additionally evaluates the certificate's LMI and
    well-posedness margins (an eigendecomposition each; skip inside tight
    optimization loops).
    """
    if dims is not None and Dims(*dims) != theta.dims:
        raise DimensionError(f"dims {tuple(dims)} do not match parameters {tuple(theta.dims)}")
    model, _ = _construct_cached(theta, None, activation)
    return _attach_margins(model) if certify else model


def construct_robust(
    theta: DirectParams,
    iqc: IQCSpec,
    dims: Optional[Dims] = None,
    *,
    activation: str = "relu",
    certify: bool = True,
) -> ExplicitModel:
    """Map direct parameters to an explicit model satisfying the given IQC."""
    if dims is not None and Dims(*dims) != theta.dims:
        raise DimensionError(f"dims {tuple(dims)} do not match parameters {tuple(theta.dims)}")
    model, _ = _construct_cached(theta, iqc, activation)
    return _attach_margins(model) if certify else model


# ---------------------------------------------------------------------------
# Expressivity embeddings: exact representations of standard model classes.
# ---------------------------------------------------------------------------


def _acyclic_multiplier(D11: np.ndarray, blocks: Optional[list[int]] = None) -> np.ndarray:
    """A positive diagonal lam certifying well-posedness of a strictly
    lower-(block-)triangular D11, by geometrically decaying weights."""
    q = D11.shape[0]
    if q == 0:
        return np.zeros(0)
    fro = float(np.linalg.norm(D11))
    r = max(4.0, 4.0 * fro * fro)
    if blocks is None:
        blocks = [1] * q
    levels = np.repeat(np.arange(len(blocks), dtype=float), blocks)
    for _ in range(60):
        lam = np.power(r, -levels)
        lam /= lam.max()
        W = 2.0 * np.diag(lam) - lam[:, None] * D11 - D11.T * lam[None, :]
        if np.linalg.eigvalsh(0.5 * (W + W.T)).min() > 0:
            return lam
        r *= 4.0
    raise IllConditionedError("failed to certify the layered network's well-posedness")


def _metric_for_shift_state(model: ExplicitModel, weights: np.ndarray) -> np.ndarray:
    """A diagonal metric c*diag(weights) making the contraction LMI pass for a
    model whose A is the input-history shift (B1 = 0).  c is grown until the
    assembled LMI is numerically positive definite."""
    from . import verify

    c = 1.0
    for _ in range(80):
        P = c * np.diag(weights)
        cert = replace(model.certificate, P=P)
        m2 = replace(model, certificate=cert)
        M = verify.contraction_lmi_matrix(m2)
        if np.linalg.eigvalsh(M).min() > 1e-9:
            return P
        c *= 2.0
    raise IllConditionedError("failed to certify the finite-memory model")


def _stack_layers(layers: list[tuple[np.ndarray, np.ndarray]], in_dim: int):
    """Shared layer validation for the feedforward/finite-memory embeddings.

    Returns (q, hidden widths, block-lower D11, weight list, bias list).
    """
    ws = [np.atleast_2d(np.asarray(W, dtype=float)) for W, _ in layers]
    bs = [np.atleast_1d(np.asarray(b, dtype=float)) for _, b in layers]
    prev = in_dim
    for k, (W, b) in enumerate(zip(ws, bs)):
        if W.shape[1] != prev:
            raise DimensionError(f"layer {k}: weight has {W.shape[1]} columns, expected {prev}")
        if b.shape != (W.shape[0],):
            raise DimensionError(f"layer {k}: bias shape {b.shape} != ({W.shape[0]},)")
        prev = W.shape[0]
    L = len(ws) - 1
    widths = [w.shape[0] for w in ws[:-1]]  # hidden activations z_1..z_L
    q = int(sum(widths))
    D11 = np.zeros((q, q))
    off_r = widths[0] if widths else 0
    off_c = 0
    for l in range(1, L):
        r, c = ws[l].shape
        D11[off_r : off_r + r, off_c : off_c + c] = ws[l]
        off_r += r
        off_c += c
    return q, widths, D11, ws, bs


def embed_feedforward(
    layers: list[tuple[np.ndarray, np.ndarray]], activation: str = "relu"
) -> ExplicitModel:
    """Represent a feedforward net y = W_L z_L + b_L, z_{l+1} = sigma(W_l z_l + b_l)
    as a stateless model whose equilibrium layer is block lower triangular.

    With a single (W, b) pair the result is the affine map y = W u + b.
    """
    if not layers:
        raise DimensionError("need at least one (weight, bias) layer")
    m = np.atleast_2d(np.asarray(layers[0][0], dtype=float)).shape[1]
    q, widths, D11, ws, bs = _stack_layers(layers, m)
    L = len(ws) - 1
    p = ws[-1].shape[0]

    D12 = np.zeros((q, m))
    if L:
        D12[: widths[0], :] = ws[0]
    D21 = np.zeros((p, q))
    if L:
        D21[:, q - widths[-1] :] = ws[-1]
    D22 = ws[0] if L == 0 else np.zeros((p, m))
    by = bs[-1]
    bv = np.concatenate(bs[:-1]) if L else np.zeros(0)

    lam = _acyclic_multiplier(D11, blocks=widths or None)
    cert = Certificate(P=np.zeros((0, 0)), lam=lam, alpha=1.0)
    model = ExplicitModel(
        A=np.zeros((0, 0)), B1=np.zeros((0, q)), B2=np.zeros((0, m)),
        C1=np.zeros((q, 0)), D11=D11, D12=D12,
        C2=np.zeros((p, 0)), D21=D21, D22=D22,
        bx=np.zeros(0), bv=bv, by=by,
        activation=activation, certificate=cert, kind="c-aren",
    )
    return _attach_margins(model)


def embed_fir(
    memory: int,
    readout: list[tuple[np.ndarray, np.ndarray]],
    activation: str = "relu",
) -> ExplicitModel:
    """Finite-memory filter: the state shifts in the input history and the
    output is a static (feedforward) readout of that history.

    ``readout`` follows the embed_feedforward layer convention and must
    consume memory * m inputs, where m is inferred from the first weight.
    """
    if memory < 1:
        raise DimensionError("memory must be at least 1")
    if not readout:
        raise DimensionError("need at least one readout layer")
    w0 = np.atleast_2d(np.asarray(readout[0][0], dtype=float))
    if w0.shape[1] % memory != 0:
        raise DimensionError(f"readout consumes {w0.shape[1]} inputs, not divisible by memory={memory}")
    m = w0.shape[1] // memory
    n = memory * m
    q, widths, D11, ws, bs = _stack_layers(readout, n)
    L = len(ws) - 1
    p = ws[-1].shape[0]

    A = np.zeros((n, n))
    if memory > 1:
        A[m:, : n - m] = np.eye(n - m)
    B2 = np.zeros((n, m))
    B2[:m, :] = np.eye(m)
    B1 = np.zeros((n, q))

    C1 = np.zeros((q, n))
    if L:
        C1[: widths[0], :] = ws[0]
    D21 = np.zeros((p, q))
    if L:
        D21[:, q - widths[-1] :] = ws[-1]
    C2 = ws[0] if L == 0 else np.zeros((p, n))
    by = bs[-1]
    bv = np.concatenate(bs[:-1]) if L else np.zeros(0)

    lam = _acyclic_multiplier(D11, blocks=widths or None)
    hist_weights = np.repeat(np.arange(memory, 0, -1, dtype=float), m)
    cert = Certificate(P=np.eye(n), lam=lam, alpha=1.0)
    model = ExplicitModel(
        A=A, B1=B1, B2=B2,
        C1=C1, D11=D11, D12=np.zeros((q, m)),
        C2=C2, D21=D21, D22=np.zeros((p, m)),
        bx=np.zeros(n), bv=bv, by=by,
        activation=activation, certificate=cert, kind="c-aren",
    )
    P = _metric_for_shift_state(model, hist_weights)
    model = replace(model, certificate=replace(cert, P=P))
    return _attach_margins(model)
