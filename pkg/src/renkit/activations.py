"""Scalar activations, all slope-restricted in [0, 1].

Each activation is applied elementwise.  ``slope`` returns the (Clarke)
derivative used for linearizing through the equilibrium layer; at the relu
kink (pre-activation exactly 0) the slope 0 element is chosen.  The sigmoid
is the standard logistic function, whose maximum slope is 1/4 -- still within
the admissible [0, 1] slope range, so no rescaling is applied.
"""

from __future__ import annotations

import numpy as np

SUPPORTED = ("relu", "tanh", "sigmoid")


def apply(name: str, x: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "tanh":
        return np.tanh(x)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-x))
    raise ValueError(f"unknown activation {name!r}; supported: {SUPPORTED}")


def slope(name: str, x: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (x > 0.0).astype(float)
    if name == "tanh":
        t = np.tanh(x)
        return 1.0 - t * t
    if name == "sigmoid":
        s = 1.0 / (1.0 + np.exp(-x))
        return s * (1.0 - s)
    raise ValueError(f"unknown activation {name!r}; supported: {SUPPORTED}")
