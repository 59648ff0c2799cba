"""Model certification: LMI checks, trajectory-based checks, gain estimation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import MissingCertificateError
from .model import simulate, trajectory_pair_gap
from .types import Certificate, ExplicitModel, IQCSpec


def wellposedness_matrix(model: ExplicitModel, lam: Optional[np.ndarray] = None) -> np.ndarray:
    """2*Lambda - Lambda D11 - D11^T Lambda, positive definite iff the
    equilibrium layer has a unique solution for every offset."""
    if lam is None:
        if model.certificate is None:
            raise MissingCertificateError("no certificate; run construction or provide (P, Lambda)")
        lam = model.certificate.lam
    D = model.D11
    W = 2.0 * np.diag(lam) - lam[:, None] * D - D.T * lam[None, :]
    return 0.5 * (W + W.T)


def contraction_lmi_matrix(
    model: ExplicitModel, certificate: Optional[Certificate] = None
) -> np.ndarray:
    """Assemble the explicit contraction LMI for the model's certificate.

    Block structure over (state, neurons), with the certificate's contraction
    rate alpha scaling the metric block:

        [[alpha*P - A'PA,      -C1' Lam - A'PB1],
         [  (sym)        , 2Lam - Lam D11 - D11' Lam - B1'PB1]]
    """
    cert = certificate or model.certificate
    if cert is None:
        raise MissingCertificateError("no certificate; run construction or provide (P, Lambda)")
    n, _, _, q = model.dims
    P, lam, alpha = cert.P, cert.lam, cert.alpha
    A, B1, C1 = model.A, model.B1, model.C1
    PA, PB1 = P @ A, P @ B1
    M = np.zeros((n + q, n + q))
    M[:n, :n] = alpha * P - A.T @ PA
    M[:n, n:] = -(C1.T * lam[None, :]) - A.T @ PB1
    M[n:, :n] = M[:n, n:].T
    M[n:, n:] = wellposedness_matrix(model, lam) - B1.T @ PB1
    return 0.5 * (M + M.T)


def iqc_lmi_matrix(
    model: ExplicitModel,
    iqc: Optional[IQCSpec] = None,
    certificate: Optional[Certificate] = None,
) -> np.ndarray:
    """Assemble the explicit incremental-IQC LMI over (state, neurons, input)."""
    iqc = iqc or model.iqc
    if iqc is None:
        raise ValueError("no IQC attached to the model and none supplied")
    cert = certificate or model.certificate
    if cert is None:
        raise MissingCertificateError("no certificate; run construction or provide (P, Lambda)")
    n, m, p, q = model.dims
    P, lam = cert.P, cert.lam
    A, B1, B2 = model.A, model.B1, model.B2
    C1, D12 = model.C1, model.D12
    C2, D21, D22 = model.C2, model.D21, model.D22
    Q, S, R = iqc.Q, iqc.S, iqc.R
    PA, PB1, PB2 = P @ A, P @ B1, P @ B2
    QC2, QD21, QD22 = Q @ C2, Q @ D21, Q @ D22

    M = np.zeros((n + q + m, n + q + m))
    i1, i2, i3 = slice(0, n), slice(n, n + q), slice(n + q, None)
    M[i1, i1] = P - A.T @ PA + C2.T @ QC2
    M[i1, i2] = -(C1.T * lam[None, :]) - A.T @ PB1 + C2.T @ QD21
    M[i1, i3] = C2.T @ S.T - A.T @ PB2 + C2.T @ QD22
    M[i2, i2] = wellposedness_matrix(model, lam) - B1.T @ PB1 + D21.T @ QD21
    M[i2, i3] = D21.T @ S.T - lam[:, None] * D12 - B1.T @ PB2 + D21.T @ QD22
    M[i3, i3] = R + S @ D22 + D22.T @ S.T - B2.T @ PB2 + D22.T @ QD22
    M[i2, i1] = M[i1, i2].T
    M[i3, i1] = M[i1, i3].T
    M[i3, i2] = M[i2, i3].T
    return 0.5 * (M + M.T)


@dataclass
class CheckReport:
    name: str
    passed: bool
    margin: Optional[float] = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "pass": bool(self.passed), "margin": self.margin}


def _pd_margin(M: np.ndarray, tol: float, verbose: bool) -> tuple[bool, Optional[float]]:
    """Cheap positive-definiteness test: shifted Cholesky on the happy path,
    eigenvalues only on failure or when a margin value is requested."""
    if M.size == 0:
        return True, float("inf") if verbose else None
    sym = 0.5 * (M + M.T)
    try:
        np.linalg.cholesky(sym - tol * np.eye(M.shape[0]))
        ok = True
    except np.linalg.LinAlgError:
        ok = False
    if verbose or not ok:
        mineig = float(np.linalg.eigvalsh(sym).min())
        return mineig > tol, mineig
    return ok, None


def check_contraction_lmi(
    model: ExplicitModel,
    certificate: Optional[Certificate] = None,
    tol: float = 1e-9,
    verbose: bool = False,
) -> CheckReport:
    """Certify contraction at the certificate's rate; pass iff the assembled
    LMI, the metric P and the well-posedness condition all clear ``tol``."""
    cert = certificate or model.certificate
    if cert is None:
        raise MissingCertificateError("no certificate; run construction or provide (P, Lambda)")
    ok_p, p_eig = _pd_margin(cert.P, tol, verbose)
    ok_wp, wp_eig = _pd_margin(wellposedness_matrix(model, cert.lam), tol, verbose)
    ok_lmi, margin = _pd_margin(contraction_lmi_matrix(model, cert), tol, verbose)
    return CheckReport(
        name="contraction_lmi",
        passed=ok_p and ok_wp and ok_lmi,
        margin=margin,
        details={"P_min_eig": p_eig, "wellposed_min_eig": wp_eig, "alpha": cert.alpha},
    )


def check_iqc_lmi(
    model: ExplicitModel,
    iqc: Optional[IQCSpec] = None,
    certificate: Optional[Certificate] = None,
    tol: float = 1e-9,
    verbose: bool = False,
) -> CheckReport:
    """Certify the incremental IQC: both the feedthrough condition
    R + S D22 + D22' S' + D22' Q D22 > 0 and the full LMI must clear tol."""
    iqc = iqc or model.iqc
    if iqc is None:
        raise ValueError("no IQC attached to the model and none supplied")
    cert = certificate or model.certificate
    if cert is None:
        raise MissingCertificateError("no certificate; run construction or provide (P, Lambda)")
    D22 = model.D22
    Rcal = iqc.R + iqc.S @ D22 + D22.T @ iqc.S.T + D22.T @ iqc.Q @ D22
    ok_r, r_eig = _pd_margin(Rcal, tol, verbose)
    ok_p, p_eig = _pd_margin(cert.P, tol, verbose)
    ok_lmi, margin = _pd_margin(iqc_lmi_matrix(model, iqc, cert), tol, verbose)
    return CheckReport(
        name="iqc_lmi",
        passed=ok_r and ok_p and ok_lmi,
        margin=margin,
        details={"feedthrough_min_eig": r_eig, "P_min_eig": p_eig, "iqc_kind": iqc.kind},
    )


# ---------------------------------------------------------------------------
# Trajectory-based (empirical) checks.
# ---------------------------------------------------------------------------


def incremental_lyapunov_gaps(
    model: ExplicitModel, u: np.ndarray, a: np.ndarray, b: np.ndarray
) -> np.ndarray:
    """V_{t+1} - V_t along a trajectory pair with shared input, where
    V_t = dx' P dx.  Nonpositive (up to roundoff) for contracting models."""
    P = model.certificate.P
    _, xa, _ = simulate(model, u, a)
    _, xb, _ = simulate(model, u, b)
    dx = xa - xb
    V = np.einsum("ti,ij,tj->t", dx, P, dx)
    return np.diff(V)


def incremental_dissipation_gaps(
    model: ExplicitModel,
    iqc: IQCSpec,
    u: np.ndarray,
    v: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
) -> np.ndarray:
    """V_{t+1} - V_t - [dy; du]' [[Q, S'], [S, R]] [dy; du] per step.
    Nonpositive (up to roundoff) for models satisfying the IQC."""
    P = model.certificate.P
    ya, xa, _ = simulate(model, u, a)
    yb, xb, _ = simulate(model, v, b)
    dx = xa - xb
    V = np.einsum("ti,ij,tj->t", dx, P, dx)
    dz = np.hstack([ya - yb, np.asarray(u) - np.asarray(v)])
    Sigma = iqc.supply_matrix()
    supply = np.einsum("ti,ij,tj->t", dz, Sigma, dz)
    return np.diff(V) - supply


def empirical_contraction_rate(
    model: ExplicitModel, trials: int = 8, T: int = 60, seed: int = 0
) -> float:
    """Fit the per-step decay of the gap between random trajectory pairs.

    Returns the largest fitted rate over the trials (an expanding model
    yields a value above 1; instant-forgetting dynamics yield 0).
    """
    n, m, _, _ = model.dims
    if n == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        a = rng.standard_normal(n)
        b = rng.standard_normal(n)
        u = rng.standard_normal((T, m))
        gap = trajectory_pair_gap(model, u, a, b)
        floor = max(gap[0] * 1e-13, 1e-290)
        usable = np.nonzero(gap > floor)[0]
        if usable.size < 2 or usable[0] != 0:
            continue
        # keep the initial contiguous run before the gap hits the noise floor
        jumps = np.diff(usable) > 1
        stop = int(np.argmax(jumps) + 1) if np.any(jumps) else usable.size
        ts = usable[:stop]
        slope = np.polyfit(ts, np.log(gap[ts]), 1)[0]
        worst = max(worst, float(np.exp(slope)))
    return worst


def estimate_lipschitz_lower(
    model: ExplicitModel,
    T: int = 100,
    restarts: int = 10,
    steps: int = 200,
    seed: int = 0,
    step_size: float = 0.05,
    pair_scale: float = 1e-2,
) -> float:
    """Maximize the observed sensitivity ||y(u) - y(v)|| / ||u - v|| over
    input pairs by first-order ascent with restarts.

    The result is always a valid lower bound on the sequence-to-sequence
    Lipschitz constant, and is monotone in both ``restarts`` and ``steps``
    for a fixed seed (the best candidate seen so far is tracked).
    """
    from .grad import sensitivity_and_input_grads

    m = model.dims.m
    best = 0.0
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        u = rng.standard_normal((T, m))
        v = u + pair_scale * rng.standard_normal((T, m))
        mom_u = np.zeros_like(u)
        mom_v = np.zeros_like(v)
        sec_u = np.zeros_like(u)
        sec_v = np.zeros_like(v)
        for k in range(1, steps + 1):
            while np.linalg.norm(u - v) < 1e-12:
                v = u + pair_scale * rng.standard_normal((T, m))
            gamma, gu, gv = sensitivity_and_input_grads(model, u, v)
            best = max(best, gamma)
            # Adam-style ascent on (u, v)
            mom_u = 0.9 * mom_u + 0.1 * gu
            mom_v = 0.9 * mom_v + 0.1 * gv
            sec_u = 0.999 * sec_u + 0.001 * gu * gu
            sec_v = 0.999 * sec_v + 0.001 * gv * gv
            bc1 = 1.0 - 0.9**k
            bc2 = 1.0 - 0.999**k
            u = u + step_size * (mom_u / bc1) / (np.sqrt(sec_u / bc2) + 1e-8)
            v = v + step_size * (mom_v / bc1) / (np.sqrt(sec_v / bc2) + 1e-8)
    return float(best)
