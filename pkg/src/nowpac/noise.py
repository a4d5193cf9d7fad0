"""Detection of evaluation noise from model-Hessian growth at rejected steps.

If evaluation errors do not decay like ``rho**2``, model Hessians built
from noisy values grow like ``delta / rho**2`` as the trust region shrinks.
The indicator regresses ``log ||H||`` on ``log(1 / rho)`` over a sliding
window of rejected steps; a slope ``tau >= threshold`` (default 1) flags
the possibly non-convergent regime.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, Optional, Sequence, Tuple

import numpy as np

CONVERGENT = "convergent"
NON_CONVERGENT = "non_convergent"
INSUFFICIENT_DATA = "insufficient_data"

MIN_SAMPLES = 3
# norms below this are rounding noise of a linear model, not curvature
HESSIAN_FLOOR = 1e-8


@dataclass
class NoiseIndicatorState:
    window: int = 5
    samples: List[Deque[Tuple[float, float]]] = field(default_factory=list)
    tau: List[Optional[float]] = field(default_factory=list)
    consecutive_nc: int = 0

    def ensure_models(self, n_models: int):
        while len(self.samples) < n_models:
            self.samples.append(deque(maxlen=self.window))
            self.tau.append(None)

    def clear(self):
        for buf in self.samples:
            buf.clear()
        self.tau = [None] * len(self.samples)


def regression_slope(rhos: Sequence[float], norms: Sequence[float]) -> Optional[float]:
    """Least-squares slope of ``log(norm)`` against ``log(1 / rho)``."""
    x = -np.log(np.asarray(rhos, dtype=float))
    y = np.log(np.asarray(norms, dtype=float))
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx <= 1e-24:
        return None
    return float(xc @ (y - y.mean()) / sxx)


def noise_indicator_update(state: NoiseIndicatorState, rejected: bool, rho: float,
                           hessian_norms: Sequence[float], tau_threshold: float = 1.0):
    """Record a rejected step and classify the current regime.

    Returns ``(state, classification)``; ``state`` is updated in place.
    """
    state.ensure_models(len(hessian_norms))
    if rejected:
        for buf, h in zip(state.samples, hessian_norms):
            # a vanishing Hessian (linear model) carries no growth information
            if h > HESSIAN_FLOOR and np.isfinite(h):
                buf.append((float(rho), float(h)))
    any_data = False
    non_conv = False
    for i, buf in enumerate(state.samples):
        if len(buf) < MIN_SAMPLES:
            state.tau[i] = None
            continue
        rhos, norms = zip(*buf)
        tau = regression_slope(rhos, norms)
        state.tau[i] = tau
        if tau is None:
            continue
        any_data = True
        if tau >= tau_threshold:
            non_conv = True
    if non_conv:
        if rejected:
            state.consecutive_nc += 1
        return state, NON_CONVERGENT
    if any_data:
        state.consecutive_nc = 0
        return state, CONVERGENT
    return state, INSUFFICIENT_DATA
