"""Solvers for the implicit neuron equation w = sigma(D11 w + b_w).

Two routes: a single forward sweep when D11 is strictly lower triangular,
and Peaceman-Rachford operator splitting for full D11.  Both return the
unique solution whenever 2*Lambda - Lambda@D11 - D11.T@Lambda > 0 holds for
some positive diagonal Lambda; the splitting iteration itself never needs
that Lambda, only its existence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import activations
from .errors import ConvergenceError, IllConditionedError, StructureError


@dataclass
class EquilibriumProblem:
    D11: np.ndarray
    b_w: np.ndarray
    activation: str = "relu"
    tolerance: float = 1e-10
    max_iters: int = 500
    splitting: float = 1.0  # Peaceman-Rachford resolvent parameter

    @property
    def q(self) -> int:
        return self.D11.shape[0]


def residual(prob: EquilibriumProblem, w: np.ndarray) -> float:
    """Max-norm fixed-point defect of a candidate solution."""
    if w.size == 0:
        return 0.0
    r = w - activations.apply(prob.activation, w @ prob.D11.T + prob.b_w)
    return float(np.max(np.abs(r)))


def solve_acyclic(prob: EquilibriumProblem) -> np.ndarray:
    """One forward sweep; requires strictly lower-triangular D11."""
    D = prob.D11
    if np.any(np.triu(D) != 0.0):
        raise StructureError("solve_acyclic requires a strictly lower-triangular D11")
    w = _sweep_lower(D, np.atleast_2d(prob.b_w), prob.activation)
    return w[0] if prob.b_w.ndim == 1 else w


def _sweep_lower(D: np.ndarray, B: np.ndarray, activation: str) -> np.ndarray:
    """Forward substitution for batched right-hand sides B (batch x q)."""
    q = D.shape[0]
    w = np.zeros_like(B)
    for i in range(q):
        z = B[:, i] if i == 0 else B[:, i] + w[:, :i] @ D[i, :i]
        w[:, i] = activations.apply(activation, z)
    return w


def _pr_resolvent_matrix(D: np.ndarray, alpha: float) -> np.ndarray:
    M = (1.0 + alpha) * np.eye(D.shape[0]) - alpha * D
    if np.linalg.cond(M) > 1e12:
        raise IllConditionedError("splitting resolvent is near singular")
    return np.linalg.inv(M)


def solve_pr(prob: EquilibriumProblem, w0: np.ndarray | None = None) -> np.ndarray:
    """Peaceman-Rachford splitting for the fixed point.

    The nonlinearity acts as the resolvent of its own maximal monotone
    operator, which is exact at splitting parameter 1; relu is scale
    invariant so any positive parameter is allowed there.
    """
    if prob.q == 0:
        return np.zeros(0)
    single = prob.b_w.ndim == 1
    b = np.atleast_2d(prob.b_w)
    w = solve_pr_batch(
        prob.D11, b, prob.activation,
        tolerance=prob.tolerance, max_iters=prob.max_iters,
        splitting=prob.splitting,
        u0=None if w0 is None else np.atleast_2d(w0),
    )
    return w[0] if single else w


def solve_pr_batch(
    D: np.ndarray,
    b: np.ndarray,
    activation: str,
    *,
    tolerance: float = 1e-10,
    max_iters: int = 500,
    splitting: float = 1.0,
    u0: np.ndarray | None = None,
    resolvent: np.ndarray | None = None,
) -> np.ndarray:
    """Splitting iteration over a batch of right-hand sides b (batch x q)."""
    if splitting <= 0:
        raise ValueError("splitting parameter must be positive")
    if splitting != 1.0 and activation != "relu":
        raise ValueError("splitting parameter != 1 is only exact for relu")
    if D.shape[0] == 0:
        return np.zeros_like(b)
    Minv = _pr_resolvent_matrix(D, splitting) if resolvent is None else resolvent
    u = b.copy() if u0 is None else u0.copy()
    ab = splitting * b
    last = np.inf
    for _ in range(max_iters):
        za = (u + ab) @ Minv.T
        uh = 2.0 * za - u
        w = activations.apply(activation, uh)
        u = 2.0 * w - uh
        last = np.max(np.abs(w - activations.apply(activation, w @ D.T + b)))
        if last <= tolerance:
            return w
    raise ConvergenceError(
        f"equilibrium iteration did not reach tolerance {tolerance:g} "
        f"in {max_iters} steps (residual {last:.3e})",
        residual=float(last),
    )


def _linearization(prob: EquilibriumProblem, w_star: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Slopes J at the solution and the matrix I - J D11."""
    z = prob.D11 @ w_star + prob.b_w
    J = activations.slope(prob.activation, z)
    M = np.eye(prob.q) - J[:, None] * prob.D11
    if prob.q and np.linalg.cond(M) > 1e12:
        raise IllConditionedError("ill-posed linearization: I - J D11 is near singular")
    return J, M


def equilibrium_jvp(prob: EquilibriumProblem, w_star: np.ndarray, rhs_tangent: np.ndarray) -> np.ndarray:
    """Tangent of the solution map: (I - J D11)^{-1} J dot(rhs)."""
    if prob.q == 0:
        return np.zeros(0)
    J, M = _linearization(prob, w_star)
    return np.linalg.solve(M, J * rhs_tangent)


def equilibrium_vjp(prob: EquilibriumProblem, w_star: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
    """Adjoint of the solution map: J (I - D11^T J)^{-1} cotangent.

    The result is the gradient with respect to the additive pre-activation
    term; gradients for D11 follow as outer(result, w_star).
    """
    if prob.q == 0:
        return np.zeros(0)
    J, M = _linearization(prob, w_star)
    return J * np.linalg.solve(M.T, cotangent)
