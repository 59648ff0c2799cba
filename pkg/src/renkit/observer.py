"""Learned observers for a semi-linear reaction-diffusion system.

The plant is a 1-D diffusion with bistable reaction term
R(s) = s(1-s)(s-1/2)/2 on a grid with both boundary nodes pinned to a known,
randomly walking value b_t, and a single measurement at the center node.
An observer is a contracting model with state dimension equal to the grid,
inputs (b_t, y_t) and a frozen identity output map, trained on one-step
snapshot pairs.  Contraction of the observer plus small one-step error
yields an explicit steady-state estimation-error bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DimensionError, SimulationUnstableError
from .grad import one_step_prediction
from .train import Snapshots, TrainConfig, fit
from .types import Dims, ExplicitModel, init_direct_params
from .param import construct_contracting
from .verify import empirical_contraction_rate

_STATE_LIMIT = 1e6


@dataclass
class PdeConfig:
    """Finite-difference discretization of the reaction-diffusion plant.

    The grid has n_grid nodes spaced dz apart, boundary nodes included;
    n_grid must be odd so the center measurement node exists.  The explicit
    scheme needs dt <= dz^2/2 for the diffusion part; the much smaller
    default dt = dz^2/64 also keeps the cubic reaction term stable when the
    boundary random walk drags the field far outside [0, 1].

    The default spacing makes the domain long relative to the reaction front
    width, so phase fronts between the two stable field levels persist and
    trajectories from different initial fields need not converge -- that is
    what makes an observer genuinely necessary here.
    """

    n_grid: int = 11
    dz: float = 4.0
    dt: Optional[float] = None
    steps: int = 20000
    boundary_noise_std: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.dt is None:
            self.dt = self.dz * self.dz / 64.0
        self.validate()

    def validate(self) -> None:
        if self.n_grid < 3:
            raise ValueError("n_grid must be at least 3")
        if self.dz <= 0 or self.dt <= 0 or self.steps < 1:
            raise ValueError("dz, dt and steps must be positive")
        if self.dt > self.dz * self.dz / 2.0:
            raise ValueError("explicit scheme needs dt <= dz^2 / 2")

    @property
    def center(self) -> int:
        if self.n_grid % 2 == 0:
            raise ValueError("n_grid must be odd so the center node exists")
        return self.n_grid // 2


def reaction(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 - x) * (x - 0.5)


def pde_step(state: np.ndarray, b: float, cfg: PdeConfig) -> np.ndarray:
    """One explicit finite-difference update; both boundary nodes become b."""
    state = np.asarray(state, dtype=float)
    if state.shape != (cfg.n_grid,):
        raise DimensionError(f"state must have {cfg.n_grid} nodes")
    lap = (state[2:] + state[:-2] - 2.0 * state[1:-1]) / (cfg.dz * cfg.dz)
    new = np.empty_like(state)
    new[1:-1] = state[1:-1] + cfg.dt * (lap + reaction(state[1:-1]))
    new[0] = new[-1] = b
    if not np.all(np.abs(new) < _STATE_LIMIT):
        raise SimulationUnstableError("reaction-diffusion state left the sane range")
    return new


@dataclass
class SnapshotDataset:
    """Rollout record: states xi (steps+1 x N), boundary inputs b (steps,)
    and center measurements y (steps,); pairs (xi_t, b_t, y_t, xi_{t+1})."""

    xi: np.ndarray
    b: np.ndarray
    y: np.ndarray
    config: PdeConfig

    def arrays(self):
        U = np.column_stack([self.b, self.y])
        return self.xi[:-1], U, self.xi[1:]

    def split(self, holdout_fraction: float = 0.1):
        """(train, holdout) snapshot views; the tail is held out."""
        X0, U, XN = self.arrays()
        k = len(X0) - max(1, int(round(holdout_fraction * len(X0))))
        return Snapshots(X0[:k], U[:k], XN[:k]), Snapshots(X0[k:], U[k:], XN[k:])


def generate_snapshots(cfg: PdeConfig) -> SnapshotDataset:
    """Simulate the plant from the all-ones field with a boundary value that
    starts at 1 and takes Gaussian random-walk steps."""
    rng = np.random.default_rng(cfg.seed)
    N, T = cfg.n_grid, cfg.steps
    center = cfg.center
    xi = np.empty((T + 1, N))
    xi[0] = 1.0
    b = np.empty(T)
    y = np.empty(T)
    bcur = 1.0
    for t in range(T):
        b[t] = bcur
        y[t] = xi[t, center]
        xi[t + 1] = pde_step(xi[t], bcur, cfg)
        bcur = bcur + cfg.boundary_noise_std * rng.standard_normal()
    return SnapshotDataset(xi=xi, b=b, y=y, config=cfg)


def observer_step(model: ExplicitModel, xhat: np.ndarray, b: float, y: float) -> np.ndarray:
    """One observer update xhat -> f(xhat, b, y)."""
    pred, _ = one_step_prediction(model, xhat[None, :], np.array([[b, y]]))
    return pred[0]


def one_step_errors(model: ExplicitModel, snaps: Snapshots) -> np.ndarray:
    """Euclidean next-state prediction error per snapshot."""
    pred, _ = one_step_prediction(model, snaps.X0, snaps.U)
    return np.linalg.norm(pred - snaps.X_next, axis=1)


def estimation_bound(rho: float, alpha: float, P: np.ndarray) -> float:
    """Steady-state estimation-error bound 2 rho/(1-alpha) * sqrt(cond(P))
    for a contracting observer with one-step correctness defect rho."""
    if not (0 <= alpha < 1):
        return float("inf")
    sv = np.linalg.svd(P, compute_uv=False)
    return 2.0 * rho / (1.0 - alpha) * float(np.sqrt(sv.max() / sv.min()))


@dataclass
class ObserverResult:
    model: ExplicitModel
    theta: object
    rho_hat: float
    alpha_hat: float
    error_bound: float
    loss_history: list[float] = field(default_factory=list)


def train_observer(
    dataset: SnapshotDataset,
    neurons: int = 48,
    config: Optional[TrainConfig] = None,
    *,
    activation: str = "relu",
    init_scale: float = 0.3,
    init_seed: int = 0,
    holdout_fraction: float = 0.1,
    rate_trials: int = 6,
) -> ObserverResult:
    """Fit a contracting observer on one-step snapshot prediction.

    The output map is frozen to the identity on the state, so the learned
    object is purely the state-update map; the correctness defect rho is
    estimated on a held-out tail of the snapshots.
    """
    N = dataset.xi.shape[1]
    dims = Dims(n=N, m=2, p=N, q=neurons)
    if config is None:
        config = TrainConfig(epochs=30, learning_rate=5e-3, batch_size=256, seed=1)
    theta0 = init_direct_params(dims, seed=init_seed, scale=init_scale)
    theta0 = replace(
        theta0, C2=np.eye(N), D21=np.zeros((N, neurons)), by=np.zeros(N)
    )
    train_part, holdout = dataset.split(holdout_fraction)
    result = fit(
        theta0,
        train_part,
        config,
        activation=activation,
        frozen=("C2", "D21", "by"),
    )
    model = construct_contracting(result.theta, activation=activation)
    rho_hat = float(one_step_errors(model, holdout).max())
    alpha_hat = empirical_contraction_rate(model, trials=rate_trials, T=400, seed=7)
    bound = estimation_bound(rho_hat, alpha_hat, model.certificate.P)
    return ObserverResult(
        model=model,
        theta=result.theta,
        rho_hat=rho_hat,
        alpha_hat=alpha_hat,
        error_bound=bound,
        loss_history=result.loss_history,
    )


@dataclass
class ObserverEvaluation:
    xi: np.ndarray        # true states (T+1, N)
    xi_hat: np.ndarray    # observer estimates (T+1, N)
    xi_free: np.ndarray   # free-run plant copy (T+1, N)
    b: np.ndarray
    err_observer: np.ndarray
    err_free_run: np.ndarray

    def tail_errors(self, fraction: float = 0.25) -> tuple[float, float]:
        k = int(len(self.err_observer) * (1.0 - fraction))
        return float(self.err_observer[k:].mean()), float(self.err_free_run[k:].mean())


def evaluate_observer(
    model: ExplicitModel,
    cfg: PdeConfig,
    x0_true: Optional[np.ndarray] = None,
    xhat0: Optional[np.ndarray] = None,
    T: int = 2000,
    seed: int = 123,
) -> ObserverEvaluation:
    """Co-simulate plant, observer, and a free-run plant copy started from
    the observer's initial guess, under a fresh boundary excitation."""
    N = cfg.n_grid
    center = cfg.center
    x = np.ones(N) if x0_true is None else np.asarray(x0_true, dtype=float).copy()
    xh = np.zeros(N) if xhat0 is None else np.asarray(xhat0, dtype=float).copy()
    xf = xh.copy()
    rng = np.random.default_rng(seed)
    xi = np.empty((T + 1, N))
    xi_hat = np.empty((T + 1, N))
    xi_free = np.empty((T + 1, N))
    bs = np.empty(T)
    xi[0], xi_hat[0], xi_free[0] = x, xh, xf
    b = 1.0
    for t in range(T):
        bs[t] = b
        y = x[center]
        xh = observer_step(model, xh, b, y)
        xf = pde_step(xf, b, cfg)
        x = pde_step(x, b, cfg)
        xi[t + 1], xi_hat[t + 1], xi_free[t + 1] = x, xh, xf
        b = b + cfg.boundary_noise_std * rng.standard_normal()
    err_obs = np.linalg.norm(xi_hat - xi, axis=1)
    err_free = np.linalg.norm(xi_free - xi, axis=1)
    return ObserverEvaluation(
        xi=xi, xi_hat=xi_hat, xi_free=xi_free, b=bs,
        err_observer=err_obs, err_free_run=err_free,
    )
