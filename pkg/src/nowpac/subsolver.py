"""Trial-step and criticality subproblems over the model-feasible trust ball.

Both problems minimize a quadratic (or linear) function of the step ``s``
subject to ``m_ci(x_k + s) + h(s) <= 0`` and ``||s|| <= radius``. When the
unconstrained ball minimizer already satisfies the constraint models it is
returned directly; otherwise a log-barrier Newton method is used, started
from a strictly interior point found by a phase-I barrier solve.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from .errors import SubproblemInfeasibleStart
from .feasibility import IbpParams, model_constraint_values
from .surrogate import QuadraticModel
from .trs import solve_trs

_log = logging.getLogger(__name__)

FEAS_SLACK = 1e-10
SUB_TOL = 1e-8
ACTIVE_TOL = 1e-8
MU_REDUCTION = 0.1
# inner Newton loop stops once the (squared) Newton decrement falls below this
NEWTON_TOL = 1e-12


@dataclass
class LinearObjective:
    g: np.ndarray

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)


@dataclass
class SubproblemSpec:
    objective: Union[QuadraticModel, LinearObjective]
    constraint_models: Sequence[QuadraticModel]
    ibp: IbpParams
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")


@dataclass
class SubproblemSolution:
    s: np.ndarray
    objective_value: float
    active_set: List[int] = field(default_factory=list)
    converged: bool = True


class _Problem:
    """Scaled problem in ``u = s / radius``; everything normalized to O(1)."""

    def __init__(self, spec: SubproblemSpec):
        rho = spec.radius
        obj = spec.objective
        self.rho = rho
        self.n = obj.g.size
        H = obj.H if isinstance(obj, QuadraticModel) else np.zeros((self.n, self.n))
        self.g = rho * obj.g
        self.H = rho * rho * H
        self.obj_scale = max(np.linalg.norm(self.g) + 0.5 * np.linalg.norm(self.H, 2), 1e-300)

        ibp = spec.ibp
        self.p = ibp.p
        self.beta = ibp.exponent
        self.eps = ibp.eps_b_k * rho ** self.beta
        a, B, C = [], [], []
        for mc in spec.constraint_models:
            Ci = rho * rho * mc.H
            if self.p == 0.0:
                Ci = Ci + 2.0 * self.eps * np.eye(self.n)
            a.append(mc.c0)
            B.append(rho * mc.g)
            C.append(Ci)
        r = len(a)
        self.a = np.array(a, dtype=float)
        self.B = np.array(B, dtype=float).reshape(r, self.n)
        self.C = np.array(C, dtype=float).reshape(r, self.n, self.n)
        ibp_mag = self.eps if self.p > 0 else 0.0
        self.c_scale = np.array([
            max(abs(self.a[i]), np.linalg.norm(self.B[i]), np.linalg.norm(self.C[i], 2), ibp_mag, 1e-300)
            for i in range(r)
        ])

    # objective -------------------------------------------------------------
    def f(self, u):
        return float(self.g @ u + 0.5 * u @ self.H @ u)

    # constraints (unnormalized), plus the ball as the last entry -------------
    def cons(self, u):
        vals = self.a + self.B @ u + 0.5 * ((self.C @ u) @ u)
        if self.p > 0.0:
            nu = np.linalg.norm(u)
            vals = vals + (self.eps * nu ** self.beta if nu > 0 else 0.0)
        return vals

    def cons_derivs(self, u):
        grads = self.B + self.C @ u
        hess = self.C
        if self.p > 0.0:
            nu = np.linalg.norm(u)
            if nu > 0:
                grads = grads + self.eps * self.beta * nu ** (self.beta - 2.0) * u
            nuf = max(nu, 1e-8)
            w = u / nuf
            hh = self.eps * self.beta * nuf ** (self.beta - 2.0) * (np.eye(self.n) + (self.beta - 2.0) * np.outer(w, w))
            hess = hess + hh
        return grads, hess


def _all_cons(P: _Problem, u):
    """Normalized constraint values including the ball ``(|u|^2 - 1) / 2``."""
    return np.append(P.cons(u) / P.c_scale, 0.5 * (u @ u - 1.0))


def _all_cons_derivs(P: _Problem, u):
    grads, hess = P.cons_derivs(u)
    grads = grads / P.c_scale[:, None]
    hess = hess / P.c_scale[:, None, None]
    grads = np.vstack([grads, u[None, :]])
    hess = np.concatenate([hess, np.eye(P.n)[None]], axis=0)
    return grads, hess


def _barrier(fun, cons, cons_derivs, x, mu0, mu_min, budget, stop=None):
    """Minimize ``fun`` over ``{cons < 0}`` by a sequence of log-barrier problems.

    ``fun(x) -> (value, grad, hess)``. Returns ``(x, iterations, converged)``.
    """
    mu = mu0
    iters = 0
    converged = False
    d = x.size

    def merit(z, mu):
        cv = cons(z)
        if np.any(cv >= 0.0):
            return np.inf
        return fun(z)[0] - mu * np.sum(np.log(-cv))

    while True:
        inner_ok = False
        for _ in range(60):
            if iters >= budget:
                return x, iters, False
            iters += 1
            cv = cons(x)
            cg, ch = cons_derivs(x)
            fv, fg, fh = fun(x)
            w = -1.0 / cv
            G = fg + mu * (w @ cg)
            K = fh + mu * (np.einsum("k,kij->ij", w, ch) + (cg.T * w * w) @ cg)
            K = 0.5 * (K + K.T)
            lam, Q = np.linalg.eigh(K)
            floor = 1e-12 * max(1.0, abs(lam[-1]))
            lam = np.maximum(lam, floor) if lam[0] > floor else lam + (floor - lam[0])
            step = -Q @ ((Q.T @ G) / lam)
            dec = float(-G @ step)
            if dec <= NEWTON_TOL:
                inner_ok = True
                break
            m0 = merit(x, mu)
            t = 1.0
            accepted = False
            for _ in range(60):
                z = x + t * step
                mz = merit(z, mu)
                if mz <= m0 - 1e-4 * t * dec:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                inner_ok = True  # no further progress possible at this barrier weight
                break
            x = z
            if stop is not None and stop(x):
                return x, iters, True
        if mu <= mu_min:
            converged = inner_ok
            break
        mu = max(mu * MU_REDUCTION, mu_min)
    return x, iters, converged


def _phase_one(P: _Problem, budget):
    """Strictly interior point of the normalized constraints, or None."""
    n = P.n
    u0 = np.zeros(n)
    c0 = _all_cons(P, u0)
    t0 = float(np.max(c0)) + 1.0

    def fun(z):
        g = np.zeros(n + 1)
        g[-1] = 1.0
        return z[-1], g, np.zeros((n + 1, n + 1))

    def cons(z):
        u, t = z[:-1], z[-1]
        cv = _all_cons(P, u)
        cv[:-1] -= t
        # keep t bounded below so the barrier problem is bounded
        return np.append(cv, -1.0 - t)

    def cons_derivs(z):
        u = z[:-1]
        cg, ch = _all_cons_derivs(P, u)
        k = cg.shape[0]
        G = np.zeros((k + 1, n + 1))
        G[:, :n][:k] = cg
        G[:k - 1, n] = -1.0
        G[k, n] = -1.0
        Hs = np.zeros((k + 1, n + 1, n + 1))
        Hs[:k, :n, :n] = ch
        return G, Hs

    def interior_enough(z):
        return float(np.max(_all_cons(P, z[:-1]))) <= -1e-3

    z, iters, _ = _barrier(fun, cons, cons_derivs, np.append(u0, t0), 1.0, 1e-10, budget, stop=interior_enough)
    u = z[:-1]
    if float(np.max(_all_cons(P, u))) < -1e-12:
        return u, iters
    return None, iters


def _phase_two(P: _Problem, u_start, budget):
    def fun(u):
        s = P.obj_scale
        return P.f(u) / s, (P.g + P.H @ u) / s, P.H / s

    return _barrier(fun, lambda u: _all_cons(P, u), lambda u: _all_cons_derivs(P, u),
                    u_start, 0.1, SUB_TOL * 1e-2 / (P.a.size + 2), budget)


def _backtrack_into_interior(P: _Problem, u_in, u_out):
    """Point on the segment from interior ``u_in`` toward ``u_out``, strictly feasible."""
    lo, hi = 0.0, 1.0
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if np.max(_all_cons(P, u_in + mid * (u_out - u_in))) < 0.0:
            lo = mid
        else:
            hi = mid
    t = 0.999 * lo
    return u_in + t * (u_out - u_in) if t > 0 else None


def _solve(spec: SubproblemSpec):
    P = _Problem(spec)
    n = P.n
    budget = 200 * n
    zero = np.zeros(n)
    c_at_zero = P.cons(zero)
    if np.any(c_at_zero > FEAS_SLACK):
        raise SubproblemInfeasibleStart(f"model constraints at s=0: {c_at_zero}")

    u_trs, _ = solve_trs(P.g, P.H, 1.0)
    if P.a.size == 0 or np.all(P.cons(u_trs) <= 0.0):
        return u_trs, True

    if np.all(_all_cons(P, zero) < -1e-12):
        u_start, used = zero, 0
    else:
        u_start, used = _phase_one(P, budget)
        if u_start is None:
            # the model-feasible region has empty interior; only the zero step is safe
            return zero, True

    candidates = []
    u, it, conv = _phase_two(P, u_start, budget - used)
    used += it
    candidates.append((P.f(u), u, conv))
    if np.linalg.eigvalsh(P.H)[0] < 0.0 and used < budget:
        alt = _backtrack_into_interior(P, u_start, u_trs)
        if alt is not None:
            u2, it2, conv2 = _phase_two(P, alt, budget - used)
            candidates.append((P.f(u2), u2, conv2))
    fval, u, conv = min(candidates, key=lambda t: t[0])
    if fval > 0.0:
        return zero, conv
    return u, conv


def _finish(spec: SubproblemSpec, u, conv) -> SubproblemSolution:
    s = spec.radius * u
    ns = np.linalg.norm(s)
    if ns > spec.radius:
        s *= spec.radius / ns
    cv = model_constraint_values(spec.constraint_models, s, spec.ibp)
    active = [int(i) for i in np.flatnonzero(np.abs(cv) <= ACTIVE_TOL)]
    obj = spec.objective
    if isinstance(obj, QuadraticModel):
        val = obj.value_at_step(s)
    else:
        val = float(obj.g @ s)
    return SubproblemSolution(s, val, active, bool(conv))


def solve_trial_step(spec: SubproblemSpec) -> SubproblemSolution:
    """Approximate minimizer of the objective model over the model-feasible ball."""
    u, conv = _solve(spec)
    return _finish(spec, u, conv)


def solve_criticality_subproblem(spec: SubproblemSpec) -> SubproblemSolution:
    if not isinstance(spec.objective, LinearObjective):
        spec = SubproblemSpec(LinearObjective(spec.objective.g), spec.constraint_models, spec.ibp, spec.radius)
    if not np.any(spec.objective.g):
        return SubproblemSolution(np.zeros_like(spec.objective.g), 0.0, [], True)
    u, conv = _solve(spec)
    return _finish(spec, u, conv)


def solve_criticality(spec: SubproblemSpec) -> float:
    """``alpha = |min <g, d>| / radius`` over the model-feasible ball."""
    sol = solve_criticality_subproblem(spec)
    return abs(min(sol.objective_value, 0.0)) / spec.radius
