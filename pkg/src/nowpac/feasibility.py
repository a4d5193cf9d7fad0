"""Inner boundary path offset and the model-feasible step region."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

EPS_B_MIN_FRACTION = 1e-3
EPS_B_MAX_FACTOR = 1e3


@dataclass(frozen=True)
class IbpParams:
    eps_b: float
    eps_b_k: float
    p: float = 0.0

    def __post_init__(self):
        if not self.eps_b > 0 or not self.eps_b_k > 0:
            raise ValueError("inner boundary path constants must be positive")
        if not 0.0 <= self.p < 1.0:
            raise ValueError("p must lie in [0, 1)")

    @classmethod
    def initial(cls, eps_b: float, p: float = 0.0) -> "IbpParams":
        return cls(eps_b, eps_b, p)

    @property
    def exponent(self) -> float:
        return 2.0 / (1.0 + self.p)


def ibp_value(d, params: IbpParams) -> float:
    """``eps_b_k * ||d|| ** (2 / (1 + p))``."""
    nd = float(np.linalg.norm(d))
    if nd == 0.0:
        return 0.0
    return params.eps_b_k * nd ** params.exponent


def ibp_gradient(d, params: IbpParams) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    nd = float(np.linalg.norm(d))
    if nd == 0.0:
        return np.zeros_like(d)
    beta = params.exponent
    return params.eps_b_k * beta * nd ** (beta - 2.0) * d


def ibp_hessian(d, params: IbpParams) -> np.ndarray:
    """Hessian of the offset; for ``p > 0`` evaluated with ``||d||`` floored at 1e-8."""
    d = np.asarray(d, dtype=float)
    n = d.size
    beta = params.exponent
    if params.p == 0.0:
        return 2.0 * params.eps_b_k * np.eye(n)
    nd = max(float(np.linalg.norm(d)), 1e-8)
    u = d / nd
    return params.eps_b_k * beta * nd ** (beta - 2.0) * (np.eye(n) + (beta - 2.0) * np.outer(u, u))


def adapt_eps_b(params: IbpParams, prev_step_norm: float, prev_rho: float,
                eps_b_min: float | None = None) -> IbpParams:
    """Rescale by the squared ratio of the last step length to its radius."""
    if not prev_rho > 0:
        raise ValueError("prev_rho must be positive")
    if eps_b_min is None:
        eps_b_min = EPS_B_MIN_FRACTION * params.eps_b
    eps = params.eps_b * (prev_step_norm / prev_rho) ** 2
    return replace(params, eps_b_k=max(eps, eps_b_min))


def escalate_eps_b(params: IbpParams, factor: float = 2.0) -> IbpParams:
    """Enlarge the offset after repeated infeasible trial points."""
    return replace(params, eps_b_k=min(params.eps_b_k * factor, EPS_B_MAX_FACTOR * params.eps_b))


def model_constraint_values(models_c: Sequence, s, params: IbpParams) -> np.ndarray:
    """``m_ci(x_k + s) + h(s)`` for every constraint model; feasible iff all ``<= 0``."""
    h = ibp_value(s, params)
    return np.array([mc.value_at_step(s) + h for mc in models_c], dtype=float)
