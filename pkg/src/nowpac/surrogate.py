"""Minimum-Frobenius-norm quadratic models and interpolation-set geometry."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .blackbox import evaluate
from .errors import BudgetExhausted, ImprovementStalled, SingularGeometry
from .trs import max_abs_quadratic

_log = logging.getLogger(__name__)

COND_MAX = 1e12
LAMBDA_THRESHOLD = 100.0
SCALE_FACTOR = 2.0


@dataclass
class QuadraticModel:
    """``m(center + s) = c0 + g.s + s.H.s / 2``."""

    c0: float
    g: np.ndarray
    H: np.ndarray
    center: np.ndarray

    def value_at_step(self, s) -> float:
        s = np.asarray(s, dtype=float)
        return float(self.c0 + self.g @ s + 0.5 * s @ self.H @ s)

    def gradient_at_step(self, s) -> np.ndarray:
        return self.g + self.H @ np.asarray(s, dtype=float)

    def __call__(self, x) -> float:
        return self.value_at_step(np.asarray(x, dtype=float) - self.center)

    def hessian_norm(self) -> float:
        return float(np.linalg.norm(self.H, 2)) if self.H.size else 0.0


@dataclass
class InterpolationSet:
    """Sample points with their objective and constraint values.

    ``points[center_index]`` is the current iterate.
    """

    center: np.ndarray
    points: np.ndarray
    f_values: np.ndarray
    c_values: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.f_values = np.asarray(self.f_values, dtype=float).reshape(-1)
        m = self.points.shape[0]
        self.c_values = np.asarray(self.c_values, dtype=float).reshape(m, -1)

    @property
    def n(self) -> int:
        return self.center.size

    @property
    def r(self) -> int:
        return self.c_values.shape[1]

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def center_index(self) -> int:
        d = np.linalg.norm(self.points - self.center, axis=1)
        i = int(np.argmin(d))
        if d[i] > 0.0:
            raise ValueError("center is not an element of the interpolation set")
        return i

    def distances(self) -> np.ndarray:
        return np.linalg.norm(self.points - self.center, axis=1)

    def center_values(self) -> Tuple[float, np.ndarray]:
        i = self.center_index
        return float(self.f_values[i]), self.c_values[i].copy()

    def copy(self) -> "InterpolationSet":
        return InterpolationSet(self.center.copy(), self.points.copy(),
                                self.f_values.copy(), self.c_values.copy())

    def _keep(self, mask) -> "InterpolationSet":
        return InterpolationSet(self.center.copy(), self.points[mask],
                                self.f_values[mask], self.c_values[mask])

    def _append(self, x, f, c) -> "InterpolationSet":
        return InterpolationSet(
            self.center.copy(),
            np.vstack([self.points, np.asarray(x, dtype=float)[None, :]]),
            np.append(self.f_values, f),
            np.vstack([self.c_values, np.asarray(c, dtype=float).reshape(1, self.r)]),
        )


@dataclass
class FullyLinearDiagnostics:
    max_value_error: float
    max_gradient_error: float
    rho: float


def max_set_size(n: int) -> int:
    return (n + 1) * (n + 2) // 2


def _scaled(iset: InterpolationSet, scale: Optional[float]) -> Tuple[np.ndarray, float]:
    Y = iset.points - iset.center
    if scale is None:
        scale = float(np.max(np.linalg.norm(Y, axis=1)))
    if not scale > 0.0:
        raise SingularGeometry("interpolation set has no spread")
    return Y / scale, scale


def _saddle_matrix(Yh: np.ndarray) -> np.ndarray:
    m, n = Yh.shape
    A = 0.5 * (Yh @ Yh.T) ** 2
    P = np.hstack([np.ones((m, 1)), Yh])
    K = np.zeros((m + n + 1, m + n + 1))
    K[:m, :m] = A
    K[:m, m:] = P
    K[m:, :m] = P.T
    return K


def _solve_saddle(Yh: np.ndarray, V: np.ndarray) -> np.ndarray:
    m, n = Yh.shape
    if m < n + 1:
        raise SingularGeometry(f"{m} points cannot determine a model in dimension {n}")
    K = _saddle_matrix(Yh)
    cond = np.linalg.cond(K)
    if not np.isfinite(cond) or cond > COND_MAX:
        raise SingularGeometry(f"interpolation system condition {cond:.3g} exceeds {COND_MAX:.0e}")
    rhs = np.zeros((m + n + 1, V.shape[1]))
    rhs[:m] = V
    return np.linalg.solve(K, rhs)


def _coefficients_to_models(sol, Yh, scale, center) -> List[QuadraticModel]:
    m, n = Yh.shape
    models = []
    for j in range(sol.shape[1]):
        lam = sol[:m, j]
        c0 = sol[m, j]
        gh = sol[m + 1:, j]
        Hh = Yh.T @ (lam[:, None] * Yh)
        Hh = 0.5 * (Hh + Hh.T)
        models.append(QuadraticModel(float(c0), gh / scale, Hh / scale**2, center.copy()))
    return models


def build_mfn_model(iset: InterpolationSet, values, scale: Optional[float] = None) -> QuadraticModel:
    """Minimum-Frobenius-norm quadratic interpolating ``values`` on the set."""
    Yh, scale = _scaled(iset, scale)
    V = np.asarray(values, dtype=float).reshape(-1, 1)
    sol = _solve_saddle(Yh, V)
    return _coefficients_to_models(sol, Yh, scale, iset.center)[0]


def build_models(iset: InterpolationSet, scale: Optional[float] = None):
    """Objective and constraint models sharing one saddle solve.

    The constant terms are pinned to the exact values at the center.
    """
    Yh, scale = _scaled(iset, scale)
    V = np.hstack([iset.f_values[:, None], iset.c_values])
    sol = _solve_saddle(Yh, V)
    models = _coefficients_to_models(sol, Yh, scale, iset.center)
    ic = iset.center_index
    models[0].c0 = float(iset.f_values[ic])
    for i, mc in enumerate(models[1:]):
        mc.c0 = float(iset.c_values[ic, i])
    return models[0], models[1:]


def lagrange_polynomials(iset: InterpolationSet, scale: Optional[float] = None) -> List[QuadraticModel]:
    Yh, scale = _scaled(iset, scale)
    sol = _solve_saddle(Yh, np.eye(iset.m))
    return _coefficients_to_models(sol, Yh, scale, iset.center)


def _lagrange_maxima(iset: InterpolationSet, radius: float):
    """Per-point ``max |l_i|`` over the ball, with the maximizing steps."""
    polys = lagrange_polynomials(iset, scale=radius)
    vals = np.empty(len(polys))
    steps = []
    for i, ell in enumerate(polys):
        s, v = max_abs_quadratic(ell.c0, ell.g, ell.H, radius)
        vals[i] = v
        steps.append(s)
    return vals, steps


def poisedness(iset: InterpolationSet, radius: float) -> float:
    """Largest Lagrange-polynomial magnitude over ``B(center, radius)``."""
    vals, _ = _lagrange_maxima(iset, radius)
    return float(np.max(vals))


def is_fully_linear(iset: InterpolationSet, rho: float, threshold: float = LAMBDA_THRESHOLD,
                    scale_factor: float = SCALE_FACTOR) -> bool:
    if iset.m < iset.n + 1:
        return False
    if np.any(iset.distances() > scale_factor * rho * (1 + 1e-12)):
        return False
    try:
        return poisedness(iset, rho) <= threshold
    except SingularGeometry:
        return False


class _Evaluator:
    def __init__(self, problem, counter, max_evals):
        self.problem = problem
        self.counter = counter
        self.max_evals = max_evals
        self.n_new = 0

    def __call__(self, x):
        if self.max_evals is not None and self.counter is not None and self.counter.count >= self.max_evals:
            raise BudgetExhausted()
        self.n_new += 1
        return evaluate(self.problem, x, self.counter)


def prune_degenerate(iset: InterpolationSet, rho: float) -> InterpolationSet:
    """Greedy well-conditioned subset, nearest points first, center always kept."""
    ic = iset.center_index
    order = [ic] + [int(i) for i in np.argsort(iset.distances(), kind="stable") if i != ic]
    Yh = (iset.points - iset.center) / rho
    chosen = [ic]
    for i in order[1:]:
        trial = chosen + [i]
        Y = Yh[trial]
        if len(trial) <= iset.n + 1:
            sv = np.linalg.svd(Y[1:], compute_uv=False)
            ok = sv.min() > 1e-6 * max(1.0, sv.max())
        else:
            cond = np.linalg.cond(_saddle_matrix(Y))
            ok = bool(np.isfinite(cond) and cond <= 1e-2 * COND_MAX)
        if ok:
            chosen.append(i)
    mask = np.zeros(iset.m, dtype=bool)
    mask[chosen] = True
    return iset._keep(mask)


def _fill_directions(iset: InterpolationSet, rho: float, ev: _Evaluator) -> InterpolationSet:
    """Add points along directions missing from the span of the displacements."""
    n = iset.n
    while True:
        D = iset.points - iset.center
        D = D[np.linalg.norm(D, axis=1) > 0]
        if D.shape[0] == 0:
            basis = np.eye(n)
        else:
            _, sv, Vt = np.linalg.svd(D / rho, full_matrices=True)
            rank = int(np.sum(sv > 1e-6 * max(1.0, sv.max())))
            if rank >= n and iset.m >= n + 1:
                return iset
            basis = Vt[rank:]
        if basis.shape[0] == 0:
            return iset
        v = basis[0]
        # prefer a coordinate-aligned direction if one spans the same gap
        j = int(np.argmax(np.abs(v)))
        if abs(abs(v[j]) - 1.0) < 1e-12:
            v = np.sign(v[j]) * np.eye(n)[j]
        x = iset.center + rho * v
        f, c = ev(x)
        iset = iset._append(x, f, c)


def ensure_fully_linear(iset: InterpolationSet, problem, counter, rho: float, *,
                        threshold: float = LAMBDA_THRESHOLD, scale_factor: float = SCALE_FACTOR,
                        max_evals: Optional[int] = None):
    """Make the set Lambda-poised in ``B(center, rho)`` and rebuild the models.

    Far points are dropped, missing directions are filled, and the worst
    Lagrange polynomial's point is swapped for that polynomial's maximizer
    over the ball until ``Lambda <= threshold``.

    Returns ``(iset, (model_f, models_c))``.
    """
    ev = _Evaluator(problem, counter, max_evals)
    iset = iset.copy()
    ic = iset.center_index
    keep = iset.distances() <= scale_factor * rho * (1 + 1e-12)
    keep[ic] = True
    if not np.all(keep):
        iset = iset._keep(keep)
    try:
        _solve_saddle(_scaled(iset, rho)[0], np.zeros((iset.m, 1)))
    except SingularGeometry:
        iset = prune_degenerate(iset, rho)
    iset = _fill_directions(iset, rho, ev)

    n_steps = 2 * iset.m
    lam0 = None
    for step in range(n_steps + 1):
        try:
            vals, steps = _lagrange_maxima(iset, rho)
        except SingularGeometry:
            iset = _fill_directions(prune_degenerate(iset, rho), rho, ev)
            continue
        lam = float(np.max(vals))
        if lam0 is None:
            lam0 = lam
        if lam <= threshold:
            break
        if step == n_steps:
            if not lam < lam0:
                raise ImprovementStalled(f"poisedness {lam:.3g} not reduced below {threshold}")
            _log.debug("poisedness %.3g still above threshold after %d steps", lam, n_steps)
            break
        vals[iset.center_index] = -np.inf
        i = int(np.argmax(vals))
        x = iset.center + steps[i]
        f, c = ev(x)
        iset.points[i] = x
        iset.f_values[i] = f
        iset.c_values[i] = c
    models = build_models(iset, scale=rho)
    return iset, models


def update_set_after_step(iset: InterpolationSet, new_point, f, c, accepted: bool,
                          rho: float) -> InterpolationSet:
    """Insert an evaluated trial point; recenter on acceptance."""
    x = np.asarray(new_point, dtype=float)
    out = iset.copy()
    d = np.linalg.norm(out.points - x, axis=1)
    j = int(np.argmin(d))
    if d[j] <= 1e-12 * rho:
        if j == out.center_index and not accepted:
            return out
        out.points[j] = x
        out.f_values[j] = f
        out.c_values[j] = c
    else:
        out = out._append(x, f, c)
    if accepted:
        out.center = x.copy()
    if out.m > max_set_size(out.n):
        dist = out.distances()
        dist[out.center_index] = -np.inf
        drop = int(np.argmax(dist))
        mask = np.ones(out.m, dtype=bool)
        mask[drop] = False
        out = out._keep(mask)
    return out


def initial_set(x0, f0, c0) -> InterpolationSet:
    """Single-point set; ``ensure_fully_linear`` grows it to a coordinate simplex."""
    x0 = np.asarray(x0, dtype=float)
    return InterpolationSet(x0, x0[None, :], [f0], np.asarray(c0, dtype=float).reshape(1, -1))


def model_errors(model: QuadraticModel, fun, grad, rho: float, n_samples: int = 2000,
                 seed: int = 0) -> FullyLinearDiagnostics:
    """Sampled value/gradient errors of ``model`` against ``fun``/``grad`` over the ball."""
    rng = np.random.default_rng(seed)
    n = model.center.size
    d = rng.standard_normal((n_samples, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    d *= rho * rng.uniform(0.0, 1.0, (n_samples, 1)) ** (1.0 / n)
    d = np.vstack([np.zeros(n), d])
    ve = 0.0
    ge = 0.0
    for s in d:
        x = model.center + s
        ve = max(ve, abs(fun(x) - model.value_at_step(s)))
        if grad is not None:
            ge = max(ge, float(np.linalg.norm(grad(x) - model.gradient_at_step(s))))
    return FullyLinearDiagnostics(ve, ge if grad is not None else float("nan"), rho)
