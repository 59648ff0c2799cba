import numpy as np
import pytest

from renkit import Dims, IQCSpec, init_direct_params
from renkit.param import construct_contracting, construct_robust


def assemble_contraction_matrix(model, alpha=None):
    """Independent assembly of the explicit contraction condition over
    (state, neuron) blocks, used as an eigenvalue oracle in tests."""
    cert = model.certificate
    P, lam = cert.P, cert.lam
    if alpha is None:
        alpha = cert.alpha
    A, B1, C1, D11 = model.A, model.B1, model.C1, model.D11
    n, q = A.shape[0], D11.shape[0]
    Lam = np.diag(lam)
    W = 2 * Lam - Lam @ D11 - D11.T @ Lam
    top = np.hstack([alpha * P, -C1.T @ Lam])
    bot = np.hstack([-Lam @ C1, W])
    M = np.vstack([top, bot])
    AB = np.vstack([A.T, B1.T])
    M = M - AB @ P @ AB.T
    return 0.5 * (M + M.T)


def assemble_iqc_matrix(model, iqc):
    """Independent assembly of the explicit incremental-IQC condition."""
    cert = model.certificate
    P, lam = cert.P, cert.lam
    A, B1, B2 = model.A, model.B1, model.B2
    C1, D11, D12 = model.C1, model.D11, model.D12
    C2, D21, D22 = model.C2, model.D21, model.D22
    Q, S, R = iqc.Q, iqc.S, iqc.R
    Lam = np.diag(lam)
    W = 2 * Lam - Lam @ D11 - D11.T @ Lam
    row1 = np.hstack([P, -C1.T @ Lam, C2.T @ S.T])
    row2 = np.hstack([-Lam @ C1, W, D21.T @ S.T - Lam @ D12])
    row3 = np.hstack([S @ C2, S @ D21 - D12.T @ Lam, R + S @ D22 + D22.T @ S.T])
    M = np.vstack([row1, row2, row3])
    ABB = np.vstack([A.T, B1.T, B2.T])
    CDD = np.vstack([C2.T, D21.T, D22.T])
    M = M - ABB @ P @ ABB.T + CDD @ Q @ CDD.T
    return 0.5 * (M + M.T)


KIND_CASES = [
    ("c-aren", None),
    ("c-ren", None),
    ("r-aren-lip", ("lipschitz", 2.0)),
    ("r-ren-lip", ("lipschitz", 10.0)),
    ("r-aren-ip", ("input_passive", 0.1)),
    ("r-aren-op", ("output_passive", 0.5)),
]


def make_model(kind_case, dims, seed, *, scale=1.0, alpha_bar=1.0, activation="relu"):
    """Sample parameters and construct a model for one of the KIND_CASES."""
    kind, iqc_spec = kind_case
    acyclic = "aren" in kind
    robust = kind.startswith("r")
    dims = Dims(*dims)
    if iqc_spec is None:
        iqc = None
    else:
        name, val = iqc_spec
        if name == "lipschitz":
            iqc = IQCSpec.lipschitz(val, m=dims.m, p=dims.p)
        elif name == "input_passive":
            iqc = IQCSpec.input_passive(val, m=dims.m)
        else:
            iqc = IQCSpec.output_passive(val, m=dims.m)
    theta = init_direct_params(
        dims, acyclic=acyclic, robust=robust, seed=seed, scale=scale, alpha_bar=alpha_bar
    )
    if iqc is None:
        return theta, iqc, construct_contracting(theta, activation=activation)
    return theta, iqc, construct_robust(theta, iqc, activation=activation)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
