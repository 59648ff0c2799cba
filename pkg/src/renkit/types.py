"""Core value types: dimensions, IQC specifications, parameters, models.

All types are immutable in spirit: construct once, share freely.  Arrays are
not defensively copied; callers must not mutate them after handing them over.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import NamedTuple, Optional

import numpy as np

from .errors import DimensionError

KINDS = ("c-ren", "c-aren", "r-ren", "r-aren")


class Dims(NamedTuple):
    """Model dimensions: state n, input m, output p, neurons q."""

    n: int
    m: int
    p: int
    q: int


def _as_matrix(a, rows: int, cols: int, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (rows, cols):
        raise DimensionError(f"{name}: expected shape {(rows, cols)}, got {a.shape}")
    return a


def _as_vector(a, size: int, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (size,):
        raise DimensionError(f"{name}: expected shape {(size,)}, got {a.shape}")
    return a


@dataclass(frozen=True)
class IQCSpec:
    """Incremental quadratic constraint (Q, S, R) on output/input pairs.

    Q is p x p negative semidefinite, S is m x p, R is m x m symmetric.
    ``kind`` records which named special case produced the triple (purely
    informational for the general case).
    """

    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray
    kind: str = "general"
    param: Optional[float] = None

    @property
    def p(self) -> int:
        return self.Q.shape[0]

    @property
    def m(self) -> int:
        return self.R.shape[0]

    @staticmethod
    def lipschitz(gamma: float, m: int, p: int) -> "IQCSpec":
        """Incremental l2-gain bound gamma: Q = -I/gamma, R = gamma*I, S = 0."""
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        return IQCSpec(
            Q=-np.eye(p) / gamma,
            S=np.zeros((m, p)),
            R=gamma * np.eye(m),
            kind="lipschitz",
            param=float(gamma),
        )

    @staticmethod
    def input_passive(nu: float, m: int) -> "IQCSpec":
        """Incremental input passivity with margin nu >= 0 (square models)."""
        if nu < 0:
            raise ValueError("nu must be nonnegative")
        return IQCSpec(
            Q=np.zeros((m, m)),
            S=np.eye(m),
            R=-2.0 * nu * np.eye(m),
            kind="input_passive",
            param=float(nu),
        )

    @staticmethod
    def output_passive(rho: float, m: int) -> "IQCSpec":
        """Incremental strict output passivity with margin rho > 0 (square)."""
        if rho <= 0:
            raise ValueError("rho must be positive")
        return IQCSpec(
            Q=-2.0 * rho * np.eye(m),
            S=np.eye(m),
            R=np.zeros((m, m)),
            kind="output_passive",
            param=float(rho),
        )

    @staticmethod
    def general(Q, S, R) -> "IQCSpec":
        Q = np.asarray(Q, dtype=float)
        S = np.asarray(S, dtype=float)
        R = np.asarray(R, dtype=float)
        return IQCSpec(Q=Q, S=S, R=R, kind="general", param=None)

    def validate(self) -> None:
        p, m = self.p, self.m
        _as_matrix(self.Q, p, p, "Q")
        _as_matrix(self.S, m, p, "S")
        _as_matrix(self.R, m, m, "R")
        if not np.allclose(self.Q, self.Q.T):
            raise ValueError("Q must be symmetric")
        if not np.allclose(self.R, self.R.T):
            raise ValueError("R must be symmetric")
        if np.linalg.eigvalsh((self.Q + self.Q.T) / 2).max() > 1e-10:
            raise ValueError("Q must be negative semidefinite")

    def supply_matrix(self) -> np.ndarray:
        """The (p+m) x (p+m) block matrix [[Q, S^T], [S, R]] acting on [dy; du]."""
        top = np.hstack([self.Q, self.S.T])
        bot = np.hstack([self.S, self.R])
        return np.vstack([top, bot])


@dataclass(frozen=True)
class Certificate:
    """Stability certificate attached to an explicit model.

    P is the n x n contraction metric, ``lam`` the diagonal of the positive
    multiplier matrix.  The two min-eigenvalue fields are filled when the
    corresponding checks have been evaluated (None otherwise).
    """

    P: np.ndarray
    lam: np.ndarray
    alpha: float = 1.0
    lmi_min_eig: Optional[float] = None
    wellposed_min_eig: Optional[float] = None

    @property
    def Lambda(self) -> np.ndarray:
        return np.diag(self.lam)


# Free-parameter fields, in the canonical flattening order.  Fields that are
# None for a given kind are simply skipped.
_FREE_FIELDS = (
    "X",
    "Y1",
    "g",
    "Y2",
    "X3",
    "Y3",
    "B2til",
    "C2",
    "D12til",
    "D21",
    "bx",
    "bv",
    "by",
)


@dataclass(frozen=True)
class DirectParams:
    """Unconstrained parameter vector of a REN, as named arrays.

    Every finite value of these arrays maps to a well-posed model with the
    requested contraction/robustness property; there is nothing to project.
    """

    dims: Dims
    X: np.ndarray                     # (2n+q) x (2n+q)
    Y1: np.ndarray                    # n x n
    B2til: np.ndarray                 # n x m
    C2: np.ndarray                    # p x n
    D12til: np.ndarray                # q x m
    D21: np.ndarray                   # p x q
    bx: np.ndarray                    # n
    bv: np.ndarray                    # q
    by: np.ndarray                    # p
    acyclic: bool = True
    g: Optional[np.ndarray] = None    # q, full-D11 only
    Y2: Optional[np.ndarray] = None   # q x q, full-D11 only
    X3: Optional[np.ndarray] = None   # s x s, robust only
    Y3: Optional[np.ndarray] = None   # s x s, robust only
    epsilon: float = 1e-3
    alpha_bar: float = 1.0

    def validate(self) -> None:
        n, m, p, q = self.dims
        _as_matrix(self.X, 2 * n + q, 2 * n + q, "X")
        _as_matrix(self.Y1, n, n, "Y1")
        _as_matrix(self.B2til, n, m, "B2til")
        _as_matrix(self.C2, p, n, "C2")
        _as_matrix(self.D12til, q, m, "D12til")
        _as_matrix(self.D21, p, q, "D21")
        _as_vector(self.bx, n, "bx")
        _as_vector(self.bv, q, "bv")
        _as_vector(self.by, p, "by")
        if not self.acyclic:
            if self.g is None or self.Y2 is None:
                raise DimensionError("full-D11 parameters require g and Y2")
            _as_vector(self.g, q, "g")
            _as_matrix(self.Y2, q, q, "Y2")
        if self.X3 is not None or self.Y3 is not None:
            s = max(p, m)
            _as_matrix(self.X3, s, s, "X3")
            _as_matrix(self.Y3, s, s, "Y3")
        if not (self.epsilon > 0):
            raise ValueError("epsilon must be positive")
        if not (0 < self.alpha_bar <= 1):
            raise ValueError("alpha_bar must lie in (0, 1]")
        for name, arr in self.free_arrays():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite entries in {name}")

    def free_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Present free-parameter arrays in canonical order."""
        out = []
        for name in _FREE_FIELDS:
            arr = getattr(self, name)
            if arr is not None:
                out.append((name, arr))
        return out

    def to_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for _, a in self.free_arrays()])

    def from_vector(self, vec: np.ndarray) -> "DirectParams":
        """Rebuild parameters of this exact structure from a flat vector."""
        upd, k = {}, 0
        for name, arr in self.free_arrays():
            upd[name] = vec[k : k + arr.size].reshape(arr.shape).copy()
            k += arr.size
        if k != vec.size:
            raise DimensionError(f"vector length {vec.size}, expected {k}")
        return replace(self, **upd)

    def zeros_like(self) -> dict[str, np.ndarray]:
        """A gradient accumulator matching the free arrays."""
        return {name: np.zeros_like(arr) for name, arr in self.free_arrays()}

    @property
    def num_params(self) -> int:
        return sum(a.size for _, a in self.free_arrays())


def init_direct_params(
    dims: Dims,
    *,
    acyclic: bool = True,
    robust: bool = False,
    seed: int | np.random.Generator = 0,
    scale: float = 1.0,
    input_init: str = "default",
    epsilon: float = 1e-3,
    alpha_bar: float = 1.0,
) -> DirectParams:
    """Sample fresh direct parameters.

    Free matrices get i.i.d. zero-mean Gaussian entries with standard
    deviation scale/sqrt(2n+q); biases start at zero.  With
    ``input_init="glorot"`` the input maps B2til/D12til use Glorot-normal
    scaling instead, which is the convention used by the feedback-design
    pipeline.
    """
    n, m, p, q = dims
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    std = scale / np.sqrt(2 * n + q)

    def mat(rows, cols, sd):
        return sd * rng.standard_normal((rows, cols))

    if input_init == "glorot":
        b2_std = np.sqrt(2.0 / (n + m))
        d12_std = np.sqrt(2.0 / (q + m)) if q else 0.0
    elif input_init == "default":
        b2_std = d12_std = std
    else:
        raise ValueError(f"unknown input_init {input_init!r}")

    s = max(p, m)
    return DirectParams(
        dims=dims,
        X=mat(2 * n + q, 2 * n + q, std),
        Y1=mat(n, n, std),
        B2til=mat(n, m, b2_std),
        C2=mat(p, n, std),
        D12til=mat(q, m, d12_std),
        D21=mat(p, q, std),
        bx=np.zeros(n),
        bv=np.zeros(q),
        by=np.zeros(p),
        acyclic=acyclic,
        g=None if acyclic else std * rng.standard_normal(q),
        Y2=None if acyclic else mat(q, q, std),
        X3=mat(s, s, std) if robust else None,
        Y3=mat(s, s, std) if robust else None,
        epsilon=epsilon,
        alpha_bar=alpha_bar,
    )


@dataclass(frozen=True)
class ExplicitModel:
    """Explicit REN weights, biases and stability certificate.

    The per-step map is
        w_t : w = sigma(D11 w + C1 x_t + D12 u_t + bv)
        x'  = A x_t + B1 w_t + B2 u_t + bx
        y_t = C2 x_t + D21 w_t + D22 u_t + by
    """

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    D11: np.ndarray
    D12: np.ndarray
    C2: np.ndarray
    D21: np.ndarray
    D22: np.ndarray
    bx: np.ndarray
    bv: np.ndarray
    by: np.ndarray
    activation: str = "relu"
    certificate: Optional[Certificate] = None
    kind: str = "c-aren"
    epsilon: float = 1e-3
    alpha_bar: float = 1.0
    iqc: Optional[IQCSpec] = None

    @property
    def dims(self) -> Dims:
        return Dims(
            n=self.A.shape[0],
            m=self.B2.shape[1],
            p=self.C2.shape[0],
            q=self.D11.shape[0],
        )

    def validate(self) -> None:
        n, m, p, q = self.dims
        _as_matrix(self.A, n, n, "A")
        _as_matrix(self.B1, n, q, "B1")
        _as_matrix(self.B2, n, m, "B2")
        _as_matrix(self.C1, q, n, "C1")
        _as_matrix(self.D11, q, q, "D11")
        _as_matrix(self.D12, q, m, "D12")
        _as_matrix(self.C2, p, n, "C2")
        _as_matrix(self.D21, p, q, "D21")
        _as_matrix(self.D22, p, m, "D22")
        _as_vector(self.bx, n, "bx")
        _as_vector(self.bv, q, "bv")
        _as_vector(self.by, p, "by")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")

    def weight_arrays(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                out.append((f.name, v))
        return out

    def __eq__(self, other) -> bool:  # bitwise equality on weights + metadata
        if not isinstance(other, ExplicitModel):
            return NotImplemented
        for (na, a), (nb, b) in zip(self.weight_arrays(), other.weight_arrays()):
            if na != nb or not np.array_equal(a, b):
                return False
        if (self.certificate is None) != (other.certificate is None):
            return False
        if self.certificate is not None:
            if not np.array_equal(self.certificate.P, other.certificate.P):
                return False
            if not np.array_equal(self.certificate.lam, other.certificate.lam):
                return False
            if self.certificate.alpha != other.certificate.alpha:
                return False
        if (self.iqc is None) != (other.iqc is None):
            return False
        if self.iqc is not None:
            for x, y in ((self.iqc.Q, other.iqc.Q), (self.iqc.S, other.iqc.S), (self.iqc.R, other.iqc.R)):
                if not np.array_equal(x, y):
                    return False
            if self.iqc.kind != other.iqc.kind or self.iqc.param != other.iqc.param:
                return False
        return (
            self.activation == other.activation
            and self.kind == other.kind
            and self.epsilon == other.epsilon
            and self.alpha_bar == other.alpha_bar
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass
class SequenceBatch:
    """Time-major sequence data: a list of (T_i x m) inputs with optional
    (T_i x p) outputs and per-sequence initial states (zero by default)."""

    inputs: list[np.ndarray]
    outputs: Optional[list[np.ndarray]] = None
    initial_states: Optional[list[np.ndarray]] = None

    def __post_init__(self):
        self.inputs = [np.atleast_2d(np.asarray(u, dtype=float)) for u in self.inputs]
        if not self.inputs:
            raise DimensionError("empty batch")
        m = self.inputs[0].shape[1]
        for u in self.inputs:
            if u.ndim != 2 or u.shape[1] != m or u.shape[0] < 1:
                raise DimensionError("inputs must be (T_i x m) with T_i >= 1 and a common m")
        if self.outputs is not None:
            self.outputs = [np.atleast_2d(np.asarray(y, dtype=float)) for y in self.outputs]
            if len(self.outputs) != len(self.inputs):
                raise DimensionError("outputs must pair with inputs")
            p = self.outputs[0].shape[1]
            for u, y in zip(self.inputs, self.outputs):
                if y.shape != (u.shape[0], p):
                    raise DimensionError("each output must be (T_i x p)")
        if self.initial_states is not None:
            self.initial_states = [np.asarray(x, dtype=float) for x in self.initial_states]
            if len(self.initial_states) != len(self.inputs):
                raise DimensionError("initial_states must pair with inputs")

    @property
    def m(self) -> int:
        return self.inputs[0].shape[1]

    @property
    def p(self) -> Optional[int]:
        return None if self.outputs is None else self.outputs[0].shape[1]

    @property
    def lengths(self) -> list[int]:
        return [u.shape[0] for u in self.inputs]

    def __len__(self) -> int:
        return len(self.inputs)
