"""renkit: recurrent equilibrium networks with built-in stability and
robustness certificates.

Models are nonlinear state-space systems whose per-step nonlinearity is an
implicit equilibrium layer.  Free real-valued parameters map onto models that
are contracting by construction and, optionally, satisfy an incremental
quadratic constraint (Lipschitz bound, incremental passivity), so learning is
plain unconstrained optimization.
"""

from .types import (
    Certificate,
    DirectParams,
    Dims,
    ExplicitModel,
    IQCSpec,
    SequenceBatch,
    init_direct_params,
)
from .param import (
    construct_contracting,
    construct_d22,
    construct_robust,
    embed_feedforward,
    embed_fir,
)
from .equilibrium import (
    EquilibriumProblem,
    equilibrium_jvp,
    equilibrium_vjp,
    solve_acyclic,
    solve_pr,
)
from .model import read_sequences, rollout, simulate, trajectory_pair_gap, write_sequences
from .verify import (
    CheckReport,
    check_contraction_lmi,
    check_iqc_lmi,
    empirical_contraction_rate,
    estimate_lipschitz_lower,
)
from .train import TrainConfig, fit, gradient, loss_simulation_error, nrmse
from .echo_state import fit_readout, sample_contracting
from .serialize import load_model, load_params, save_model, save_params

__version__ = "0.1.0"

__all__ = [
    "Certificate",
    "CheckReport",
    "DirectParams",
    "Dims",
    "EquilibriumProblem",
    "ExplicitModel",
    "IQCSpec",
    "SequenceBatch",
    "TrainConfig",
    "check_contraction_lmi",
    "check_iqc_lmi",
    "construct_contracting",
    "construct_d22",
    "construct_robust",
    "embed_feedforward",
    "embed_fir",
    "empirical_contraction_rate",
    "equilibrium_jvp",
    "equilibrium_vjp",
    "estimate_lipschitz_lower",
    "fit",
    "fit_readout",
    "gradient",
    "init_direct_params",
    "load_model",
    "load_params",
    "loss_simulation_error",
    "nrmse",
    "read_sequences",
    "rollout",
    "sample_contracting",
    "save_model",
    "save_params",
    "simulate",
    "solve_acyclic",
    "solve_pr",
    "trajectory_pair_gap",
    "write_sequences",
]
