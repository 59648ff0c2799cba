"""Nonlinear feedback optimization for linear plants via the Q-augmentation.

An observer-based nominal controller leaves a free augmentation input v; any
contracting map from the innovations to v keeps the closed loop contracting.
With echo-state dynamics for that map and an affine readout theta, the closed
loop responses are affine in theta, so shaping them under hard control bounds
is a linear program.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .echo_state import sample_contracting
from .errors import DimensionError
from .model import rollout
from .types import Certificate, Dims, ExplicitModel


@dataclass(frozen=True)
class LinearPlant:
    """Discrete-time linear plant with performance and measurement channels.

        x+ = A x + B1 w + B2 u
        z  = C1 x + D11 w + D12 u     (performance output)
        y  = C2 x + D21 w             (measurement)

    L and K are observer/state-feedback gains of the nominal controller;
    both may be zero when A is already Schur stable.
    """

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    D11: np.ndarray
    D12: np.ndarray
    C2: np.ndarray
    D21: np.ndarray
    L: np.ndarray
    K: np.ndarray

    @property
    def nx(self) -> int:
        return self.A.shape[0]

    def validate(self) -> None:
        def specrad(M):
            return max(abs(np.linalg.eigvals(M))) if M.size else 0.0

        if specrad(self.A - self.L @ self.C2) >= 1.0:
            raise ValueError("A - L C2 must be Schur stable")
        if specrad(self.A - self.B2 @ self.K) >= 1.0:
            raise ValueError("A - B2 K must be Schur stable")


def plant_from_tf(rho: float, phi: float) -> LinearPlant:
    """Plant for the double-channel benchmark: the scalar transfer function
    1 / (z^2 + 2 rho cos(phi) z + phi^2) drives both the performance path
    (from w + v) and, negated, the innovations path.

    Raises ValueError when the denominator is not Schur stable.
    """
    a1 = 2.0 * rho * np.cos(phi)
    a2 = phi * phi
    roots = np.roots([1.0, a1, a2])
    if np.max(np.abs(roots)) >= 1.0:
        raise ValueError(
            f"unstable denominator: roots {roots} not inside the unit circle"
        )
    A = np.array([[-a1, -a2], [1.0, 0.0]])
    B = np.array([[1.0], [0.0]])
    C = np.array([[0.0, 1.0]])
    zero = np.zeros((1, 1))
    return LinearPlant(
        A=A, B1=B, B2=B,
        C1=C, D11=zero, D12=zero,
        C2=-C, D21=zero,
        L=np.zeros((2, 1)), K=np.zeros((1, 2)),
    )


def impulse_response(plant: LinearPlant, T: int) -> np.ndarray:
    """First T Markov parameters of the w -> z channel (u = 0)."""
    out = np.empty(T)
    x = np.zeros(plant.nx)
    for t in range(T):
        out[t] = (plant.C1 @ x)[0] + (plant.D11[0, 0] if t == 0 else 0.0)
        x = plant.A @ x + (plant.B1[:, 0] if t == 0 else 0.0)
    return out


def _lti_rollout_batch(A, B, C, D, U):
    """Batched LTI response: U is (batch, T, m_in); returns (batch, T, p_out)."""
    Bx, T, _ = U.shape
    x = np.zeros((Bx, A.shape[0]))
    Y = np.empty((Bx, T, C.shape[0]))
    for t in range(T):
        Y[:, t] = x @ C.T + U[:, t] @ D.T
        x = x @ A.T + U[:, t] @ B.T
    return Y


def closed_loop_rollout(
    plant: LinearPlant,
    q_model: Optional[ExplicitModel],
    w: np.ndarray,
    *,
    q_x0: Optional[np.ndarray] = None,
    plant_x0: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Simulate the augmented loop for one disturbance sequence w (T x mw).

    Returns (z, u, ytilde).  ``q_model=None`` runs the nominal controller
    (v = 0).  The augmentation map acts on the innovations ytilde, which by
    construction do not depend on v, so the loop stays well defined for any
    augmentation.
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    T = w.shape[0]
    x = np.zeros(plant.nx) if plant_x0 is None else np.asarray(plant_x0, dtype=float).copy()
    xhat = np.zeros(plant.nx)
    pz = plant.C1.shape[0]
    mu = plant.B2.shape[1]
    Z = np.empty((T, pz))
    Uc = np.empty((T, mu))
    Yt = np.empty((T, plant.C2.shape[0]))

    if q_model is not None:
        nq = q_model.dims.n
        qx = np.zeros(nq) if q_x0 is None else np.asarray(q_x0, dtype=float).copy()

    for t in range(T):
        y = plant.C2 @ x + plant.D21 @ w[t]
        yt = y - plant.C2 @ xhat
        if q_model is None:
            v = np.zeros(mu)
        else:
            from . import equilibrium

            bw = q_model.C1 @ qx + q_model.D12 @ yt + q_model.bv
            if q_model.dims.q == 0:
                wq = bw
            elif np.any(np.triu(q_model.D11) != 0.0):
                wq = equilibrium.solve_pr_batch(q_model.D11, bw[None], q_model.activation)[0]
            else:
                wq = equilibrium._sweep_lower(q_model.D11, bw[None], q_model.activation)[0]
            v = q_model.C2 @ qx + q_model.D21 @ wq + q_model.D22 @ yt + q_model.by
            qx = q_model.A @ qx + q_model.B1 @ wq + q_model.B2 @ yt + q_model.bx
        u = -plant.K @ xhat + v
        Z[t] = plant.C1 @ x + plant.D11 @ w[t] + plant.D12 @ u
        Uc[t] = u
        Yt[t] = yt
        xnew = plant.A @ x + plant.B1 @ w[t] + plant.B2 @ u
        xhat = plant.A @ xhat + plant.B2 @ u + plant.L @ yt
        x = xnew
    return Z, Uc, Yt


def sample_q_echo(n: int, q: int, seed: int = 0, *, acyclic: bool = True) -> ExplicitModel:
    """Random contracting augmentation dynamics for a scalar innovations
    input: free-matrix entries have variance 4/(2n+q), input maps are
    Glorot-normal, and the readout is left to the basis coefficients."""
    return sample_contracting(
        Dims(n=n, m=1, p=1, q=q),
        seed=seed,
        scale=2.0,
        acyclic=acyclic,
        input_init="glorot",
    )


def linear_q(n: int, seed: int = 0, contraction: float = 0.05) -> ExplicitModel:
    """Linear augmentation dynamics: a random matrix rescaled to spectral
    radius 1 - contraction, Glorot input map, no neurons."""
    rng = np.random.default_rng(seed)
    Abar = rng.standard_normal((n, n)) / np.sqrt(2 * n)
    Aq = (1.0 - contraction) * Abar / max(abs(np.linalg.eigvals(Abar)))
    Bq = np.sqrt(2.0 / (n + 1)) * rng.standard_normal((n, 1))
    # contraction metric from the Lyapunov series sum_k (Aq^T)^k Aq^k;
    # the 0.99 keeps the certified rate strictly inside the feasible set
    P = np.eye(n)
    M = Aq.copy()
    for _ in range(10000):
        P = P + M.T @ M
        M = Aq @ M
        if np.max(np.abs(M)) < 1e-14:
            break
    alpha = 1.0 - 0.99 / np.linalg.eigvalsh(P).max()
    cert = Certificate(P=P, lam=np.zeros(0), alpha=float(min(max(alpha, 0.0), 1.0)))
    return ExplicitModel(
        A=Aq, B1=np.zeros((n, 0)), B2=Bq,
        C1=np.zeros((0, n)), D11=np.zeros((0, 0)), D12=np.zeros((0, 1)),
        C2=np.zeros((1, n)), D21=np.zeros((1, 0)), D22=np.zeros((1, 1)),
        bx=np.zeros(n), bv=np.zeros(0), by=np.zeros(1),
        activation="relu", certificate=cert, kind="c-aren",
    )


def assemble_readout(q_model: ExplicitModel, theta: np.ndarray) -> ExplicitModel:
    """Install basis coefficients theta as the readout over [x; w; ytilde; 1]."""
    n, m, _, q = q_model.dims
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n + q + m + 1,):
        raise DimensionError(f"theta must have {n + q + m + 1} coefficients")
    return replace(
        q_model,
        C2=theta[:n][None, :].copy(),
        D21=theta[n : n + q][None, :].copy(),
        D22=theta[n + q : n + q + m][None, :].copy(),
        by=theta[-1:].copy(),
    )


def make_disturbances(
    n_seq: int = 20, T: int = 500, hold: int = 50, magnitude: float = 10.0, seed: int = 0
) -> np.ndarray:
    """Piecewise-constant test disturbances: (n_seq, T, 1) with the level
    redrawn uniformly from [-magnitude, magnitude] every ``hold`` samples."""
    rng = np.random.default_rng(seed)
    levels = rng.uniform(-magnitude, magnitude, size=(n_seq, (T + hold - 1) // hold))
    W = np.repeat(levels, hold, axis=1)[:, :T]
    return W[:, :, None]


@dataclass
class BasisResponses:
    """Everything affine in theta: per sequence j, the nominal responses and
    the per-basis contributions, so z^j(theta) = z0^j + Zb^j @ theta and
    u^j(theta) = u0^j + Ub^j @ theta."""

    ytilde: np.ndarray   # (J, T, my)
    z0: np.ndarray       # (J, T, pz)
    u0: np.ndarray       # (J, T, mu)
    z_basis: np.ndarray  # (J, T, pz, K)
    u_basis: np.ndarray  # (J, T, mu, K)

    @property
    def n_basis(self) -> int:
        return self.z_basis.shape[-1]

    def zeta(self, theta: np.ndarray, j: int) -> np.ndarray:
        return self.z0[j] + self.z_basis[j] @ theta

    def control(self, theta: np.ndarray, j: int) -> np.ndarray:
        return self.u0[j] + self.u_basis[j] @ theta


def basis_responses(plant: LinearPlant, q_model: ExplicitModel, W: np.ndarray) -> BasisResponses:
    """Roll the fixed augmentation dynamics over every disturbance and filter
    each feature through the v -> (z, u) channel of the nominal loop."""
    W = np.asarray(W, dtype=float)
    J, T, mw = W.shape
    n, my, _, q = q_model.dims
    if plant.B2.shape[1] != 1 or plant.C2.shape[0] != 1:
        raise DimensionError("basis responses assume scalar control and innovations")

    # innovations are v-independent: error dynamics driven by w only
    Ae = plant.A - plant.L @ plant.C2
    Be = plant.B1 - plant.L @ plant.D21
    Yt = _lti_rollout_batch(Ae, Be, plant.C2, plant.D21, W)

    # nominal (v = 0) closed loop responses
    z0 = np.empty((J, T, plant.C1.shape[0]))
    u0 = np.empty((J, T, plant.B2.shape[1]))
    for j in range(J):
        zj, uj, _ = closed_loop_rollout(plant, None, W[j])
        z0[j], u0[j] = zj, uj

    # echo-state features [x; w; ytilde; 1] along the fixed rollout
    _, cache = rollout(q_model, Yt, return_cache=True)
    feats = np.concatenate(
        [cache["X"][:, :-1], cache["W"], Yt, np.ones((J, T, 1))], axis=2
    )
    K = feats.shape[2]

    # v -> (z, u) channel with x == xhat: one LTI pass per basis element
    Av = plant.A - plant.B2 @ plant.K
    Cz = plant.C1 - plant.D12 @ plant.K
    mu = plant.B2.shape[1]
    V = feats.transpose(0, 2, 1).reshape(J * K, T, 1)  # scalar v per basis
    Zv = _lti_rollout_batch(Av, plant.B2, Cz, plant.D12, V)
    Uv = _lti_rollout_batch(Av, plant.B2, -plant.K, np.eye(mu), V)
    z_basis = Zv.reshape(J, K, T, -1).transpose(0, 2, 3, 1)
    u_basis = Uv.reshape(J, K, T, -1).transpose(0, 2, 3, 1)
    return BasisResponses(ytilde=Yt, z0=z0, u0=u0, z_basis=z_basis, u_basis=u_basis)


@dataclass
class PolicyResult:
    theta: np.ndarray
    l1_cost: float
    max_control: float
    solver_status: int


def optimize_policy(
    plant: LinearPlant,
    basis: BasisResponses,
    *,
    u_max: float = 5.0,
    l1_reg: float = 1e-6,
    method: str = "highs-ipm",
) -> PolicyResult:
    """Pick readout coefficients minimizing the summed l1 norm of the
    performance outputs subject to |u_t| <= u_max on every training sequence.

    The problem is a linear program in epigraph form (the optional l1
    penalty on theta keeps it an LP); theta = 0 is feasible whenever the
    nominal loop respects the bound.  Basis columns are rescaled to unit RMS
    internally for conditioning; theta is returned in the original scale.
    """
    J, T, pz, K = basis.z_basis.shape
    mu = basis.u_basis.shape[2]
    Zb = basis.z_basis.reshape(-1, K)
    z0 = basis.z0.reshape(-1)
    Ub = basis.u_basis.reshape(-1, K)
    u0 = basis.u0.reshape(-1)
    nz, nu = Zb.shape[0], Ub.shape[0]

    col_scale = np.sqrt((Zb * Zb).mean(axis=0) + (Ub * Ub).mean(axis=0)) + 1e-12
    Zb = Zb / col_scale
    Ub = Ub / col_scale

    Zs = sp.csr_matrix(Zb)
    Us = sp.csr_matrix(Ub)
    Iz = sp.identity(nz, format="csr")
    Ik = sp.identity(K, format="csr")
    zero_zk = sp.csr_matrix((nz, K))
    zero_uz = sp.csr_matrix((nu, nz))
    zero_uk = sp.csr_matrix((nu, K))
    zero_kz = sp.csr_matrix((K, nz))

    A_ub = sp.vstack(
        [
            sp.hstack([Zs, -Iz, zero_zk]),
            sp.hstack([-Zs, -Iz, zero_zk]),
            sp.hstack([Us, zero_uz, zero_uk]),
            sp.hstack([-Us, zero_uz, zero_uk]),
            sp.hstack([Ik, zero_kz, -Ik]),
            sp.hstack([-Ik, zero_kz, -Ik]),
        ],
        format="csr",
    )
    b_ub = np.concatenate(
        [-z0, z0, u_max - u0, u_max + u0, np.zeros(K), np.zeros(K)]
    )
    c = np.concatenate([np.zeros(K), np.ones(nz), l1_reg * np.ones(K)])
    bounds = [(None, None)] * K + [(0, None)] * nz + [(0, None)] * K
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method=method)
    if res.status != 0:
        raise RuntimeError(f"policy optimization failed: {res.message}")
    theta = res.x[:K] / col_scale
    l1_cost = float(np.abs(basis.z0.reshape(-1) + basis.z_basis.reshape(-1, K) @ theta).sum())
    max_u = float(np.abs(basis.u0.reshape(-1) + basis.u_basis.reshape(-1, K) @ theta).max())
    return PolicyResult(theta=theta, l1_cost=l1_cost, max_control=max_u, solver_status=res.status)
