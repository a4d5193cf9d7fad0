"""The trust-region main loop with inner-boundary-path constraint handling."""

from __future__ import annotations

import dataclasses
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .blackbox import EvalCounter, _fmt, evaluate
from .errors import (BudgetExhausted, ConfigRangeError, ImprovementStalled, InfeasibleStart,
                     SingularGeometry)
from .feasibility import IbpParams, adapt_eps_b, escalate_eps_b
from .noise import NON_CONVERGENT, NoiseIndicatorState, noise_indicator_update
from .subsolver import (LinearObjective, SubproblemSpec, solve_criticality,
                        solve_trial_step)
from .surrogate import (InterpolationSet, QuadraticModel, build_models, ensure_fully_linear,
                        initial_set, is_fully_linear, max_set_size, update_set_after_step)

_log = logging.getLogger(__name__)

DENOM_FLOOR = 1e-14
N_INFEASIBLE_ESCALATE = 1

SUCCESSFUL = "successful"
ACCEPTABLE = "acceptable"
REJECTED = "rejected"
INFEASIBLE_TRIAL = "infeasible_trial"
CRITICALITY_SHRINK = "criticality_shrink"
NOISE_TERMINATED = "noise_terminated"

TERMINATION_REASONS = ("rho_min", "max_evals", "noise_detected", "improvement_stalled")


def _open(lo, hi):
    return lambda v: lo < v < hi


def _halfopen(lo, hi):
    return lambda v: lo <= v < hi


# name -> (predicate, human-readable range)
_RANGES = {
    "eps_b": (lambda v: v > 0, "]0, inf["),
    "eta_0": (_halfopen(0.0, 1.0), "[0, 1["),
    "eta_1": (lambda v: 0 < v < 1, "[eta_0, 1[ with eta_1 > 0"),
    "gamma": (_open(0.0, 1.0), "]0, 1["),
    "gamma_inc": (lambda v: v > 1, "]1, inf["),
    "omega": (_open(0.0, 1.0), "]0, 1["),
    "eps_c": (lambda v: v > 0, "]0, inf["),
    "mu": (lambda v: v > 0, "]0, inf["),
    "p": (_halfopen(0.0, 1.0), "[0, 1["),
    "q": (_halfopen(0.0, 1.0), "[0, 1["),
    "rho_0": (lambda v: v > 0, "]rho_min, rho_max]"),
    "rho_min": (lambda v: v > 0, "]0, rho_0["),
    "rho_max": (lambda v: v > 0, "[rho_0, inf["),
    "mu_1": (lambda v: 0 < v <= 1, "]0, 1]"),
    "max_evals": (lambda v: v >= 1, "[1, inf["),
    "feasibility_margin": (lambda v: v >= 0, "[0, inf["),
    "noise_window": (lambda v: v >= 3, "[3, inf["),
    "tau_threshold": (lambda v: v > 0, "]0, inf["),
    "nc_limit": (lambda v: v >= 1, "[1, inf["),
    "seed": (lambda v: True, "any integer"),
    "early_termination": (lambda v: True, "true/false"),
}


@dataclass
class SolverConfig:
    """Algorithm parameters. Defaults follow the published NOWPAC settings."""

    eps_b: float = 10.0
    eta_0: float = 0.1
    eta_1: float = 0.7
    gamma: float = 0.8
    gamma_inc: float = 2.0
    omega: float = 0.6
    eps_c: float = 1e-2
    mu: float = 1.0
    p: float = 0.0
    q: float = 0.0
    rho_0: float = 0.1
    rho_min: float = 1e-5
    rho_max: float = 1.0
    mu_1: float = 1e-4
    max_evals: int = 5000
    feasibility_margin: float = 0.0
    noise_window: int = 5
    tau_threshold: float = 1.0
    nc_limit: int = 1
    seed: int = 0
    early_termination: bool = True

    def validate(self) -> "SolverConfig":
        for name, (ok, text) in _RANGES.items():
            v = getattr(self, name)
            if isinstance(v, float) and math.isnan(v) or not ok(v):
                raise ConfigRangeError(f"{name}={v} outside admissible range {text}")
        if self.eta_1 < self.eta_0:
            raise ConfigRangeError(f"eta_1={self.eta_1} must be >= eta_0={self.eta_0} (range [eta_0, 1[)")
        if not self.rho_min < self.rho_0 <= self.rho_max:
            raise ConfigRangeError(
                f"need 0 < rho_min < rho_0 <= rho_max, got {self.rho_min}, {self.rho_0}, {self.rho_max}")
        return self

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in dataclasses.fields(cls)]

    def with_overrides(self, **kw) -> "SolverConfig":
        return dataclasses.replace(self, **kw).validate()

    @staticmethod
    def range_of(name: str) -> str:
        return _RANGES[name][1]


@dataclass
class IterationRecord:
    k: int
    x: np.ndarray
    f: float
    rho: float
    alpha: float
    r_k: Optional[float]
    status: str
    hessian_norms: List[float]
    evals_so_far: int
    sufficient_decrease: Optional[bool] = None
    subproblem_converged: Optional[bool] = None
    n_points: Optional[int] = None


@dataclass
class TrustRegionState:
    x: np.ndarray
    f: float
    c: np.ndarray
    rho: float
    ibp: IbpParams
    iset: InterpolationSet
    model_f: QuadraticModel
    models_c: List[QuadraticModel]
    k: int = 0
    alpha: float = float("nan")
    history: List[IterationRecord] = field(default_factory=list)
    noise: NoiseIndicatorState = field(default_factory=NoiseIndicatorState)
    consecutive_infeasible: int = 0
    terminated: Optional[str] = None

    def hessian_norms(self) -> List[float]:
        return [self.model_f.hessian_norm()] + [m.hessian_norm() for m in self.models_c]


@dataclass
class OptimizeResult:
    x_best: np.ndarray
    f_best: float
    history: List[IterationRecord]
    termination_reason: str
    n_evals: int
    counter: EvalCounter
    config: SolverConfig
    problem_name: str = ""

    def __iter__(self):
        return iter((self.x_best, self.f_best, self.history, self.termination_reason))


# --------------------------------------------------------------------------
# building blocks


def _evaluate(problem, counter: EvalCounter, config: SolverConfig, x):
    if counter.count >= config.max_evals:
        raise BudgetExhausted()
    return evaluate(problem, x, counter)


def _record(state: TrustRegionState, counter: EvalCounter, status: str, r_k=None, **extra):
    state.history.append(IterationRecord(
        k=state.k, x=state.x.copy(), f=state.f, rho=state.rho, alpha=state.alpha, r_k=r_k,
        status=status, hessian_norms=state.hessian_norms(), evals_so_far=counter.count, **extra))


def make_fully_linear(state: TrustRegionState, problem, counter: EvalCounter, config: SolverConfig):
    state.iset, (state.model_f, state.models_c) = ensure_fully_linear(
        state.iset, problem, counter, state.rho, max_evals=config.max_evals)
    return state


def _rebuild(state, problem, counter, config):
    try:
        state.model_f, state.models_c = build_models(state.iset, scale=state.rho)
    except SingularGeometry:
        make_fully_linear(state, problem, counter, config)
    return state


def compute_alpha(state: TrustRegionState) -> float:
    spec = SubproblemSpec(LinearObjective(state.model_f.g), state.models_c, state.ibp, state.rho)
    state.alpha = solve_criticality(spec)
    return state.alpha


def criticality_step(state: TrustRegionState, config: SolverConfig, problem, counter: EvalCounter):
    """Shrink the radius while the criticality measure is small relative to it."""
    if not state.alpha <= config.eps_c:
        return state
    while True:
        if state.rho <= config.mu * state.alpha and is_fully_linear(state.iset, state.rho):
            return state
        state.rho *= config.omega
        _record(state, counter, CRITICALITY_SHRINK)
        if state.rho < config.rho_min:
            state.terminated = "rho_min"
            return state
        make_fully_linear(state, problem, counter, config)
        compute_alpha(state)


def compute_trial_step(state: TrustRegionState, config: SolverConfig):
    """Returns ``(solution, predicted_decrease, sufficient_decrease)``."""
    spec = SubproblemSpec(state.model_f, state.models_c, state.ibp, state.rho)
    sol = solve_trial_step(spec)
    if not sol.converged:
        _log.debug("trial-step subproblem hit its iteration cap at k=%d", state.k)
    pred = state.model_f.c0 - sol.objective_value
    alpha = state.alpha if np.isfinite(state.alpha) else 0.0
    sufficient = pred >= config.mu_1 * alpha * state.rho
    return sol, pred, sufficient


def check_trial_feasibility(state: TrustRegionState, s, problem, counter: EvalCounter,
                            config: SolverConfig):
    """Evaluate ``x + s``; on infeasibility shrink the radius and repair the models.

    Returns ``("feasible", f, c)`` or ``("infeasible", f, c)``.
    """
    x_trial = state.x + s
    f_t, c_t = _evaluate(problem, counter, config, x_trial)
    if np.all(c_t <= -config.feasibility_margin):
        state.consecutive_infeasible = 0
        return "feasible", f_t, c_t
    state.rho *= config.gamma
    state.consecutive_infeasible += 1
    if state.consecutive_infeasible >= N_INFEASIBLE_ESCALATE:
        state.ibp = escalate_eps_b(state.ibp)
        state.consecutive_infeasible = 0
    _record(state, counter, INFEASIBLE_TRIAL)
    if state.rho < config.rho_min:
        state.terminated = "rho_min"
        return "infeasible", f_t, c_t
    make_fully_linear(state, problem, counter, config)
    compute_alpha(state)
    return "infeasible", f_t, c_t


def acceptance_ratio(f_old: float, f_new: float, m_old: float, m_new: float) -> float:
    denom = m_old - m_new
    if not denom > DENOM_FLOOR:
        return -math.inf
    return (f_old - f_new) / denom


def trust_region_update(rho: float, r_k: float, config: SolverConfig) -> float:
    if r_k >= config.eta_1:
        rho = config.gamma_inc * rho
    elif r_k < config.eta_0:
        rho = config.gamma * rho
    return min(rho, config.rho_max)


def classify_step(r_k: float, config: SolverConfig) -> str:
    if r_k >= config.eta_1:
        return SUCCESSFUL
    if r_k >= config.eta_0:
        return ACCEPTABLE
    return REJECTED


# --------------------------------------------------------------------------
# main loop


def initialize(problem, config: SolverConfig, counter: EvalCounter) -> TrustRegionState:
    x0 = np.asarray(problem.x0, dtype=float)
    f0, c0 = _evaluate(problem, counter, config, x0)
    if np.any(c0 > 0.0):
        raise InfeasibleStart(f"c(x0) = {c0} violates c <= 0")
    iset = initial_set(x0, f0, c0)
    ibp = IbpParams.initial(config.eps_b, config.p)
    iset, (mf, mc) = ensure_fully_linear(iset, problem, counter, config.rho_0, max_evals=config.max_evals)
    return TrustRegionState(x=x0.copy(), f=f0, c=c0, rho=config.rho_0, ibp=ibp, iset=iset,
                            model_f=mf, models_c=mc, noise=NoiseIndicatorState(window=config.noise_window))


def _iterate(state: TrustRegionState, problem, config: SolverConfig, counter: EvalCounter):
    """One pass through STEPS 1-6; sets ``state.terminated`` when done."""
    compute_alpha(state)
    criticality_step(state, config, problem, counter)
    if state.terminated:
        return

    # STEPS 2 and 3: infeasible trials shrink the radius and retry the step
    n_infeasible = 0
    while True:
        sol, pred, sufficient = compute_trial_step(state, config)
        if not pred > DENOM_FLOOR:
            f_t = c_t = None
            break
        verdict, f_t, c_t = check_trial_feasibility(state, sol.s, problem, counter, config)
        if state.terminated:
            return
        if verdict == "feasible":
            break
        n_infeasible += 1

    # STEP 4
    s = sol.s
    rho_k = state.rho
    norms_k = state.hessian_norms()
    m_k = state.iset.m
    if f_t is None:
        r_k = -math.inf
    else:
        r_k = acceptance_ratio(state.f, f_t, state.model_f.c0, sol.objective_value)
    status = classify_step(r_k, config)
    x_trial = state.x + s
    if f_t is not None:
        state.iset = update_set_after_step(state.iset, x_trial, f_t, c_t, status != REJECTED, rho_k)
    if status != REJECTED:
        state.x, state.f, state.c = x_trial, f_t, c_t
        state.noise.clear()

    # STEP 5 and inner-boundary-path rescaling
    state.rho = trust_region_update(rho_k, r_k, config)
    if n_infeasible == 0:
        state.ibp = adapt_eps_b(state.ibp, float(np.linalg.norm(s)), rho_k)

    stop_for_noise = False
    if status == REJECTED:
        # an underdetermined model's Hessian tracks the set composition, not curvature
        informative = m_k >= max_set_size(state.iset.n)
        _, cls = noise_indicator_update(state.noise, informative, rho_k, norms_k, config.tau_threshold)
        if cls == NON_CONVERGENT and config.early_termination and state.noise.consecutive_nc >= config.nc_limit:
            stop_for_noise = True
    state.history.append(IterationRecord(
        k=state.k, x=state.x.copy(), f=state.f, rho=state.rho, alpha=state.alpha, r_k=r_k,
        status=NOISE_TERMINATED if stop_for_noise else status, hessian_norms=norms_k,
        evals_so_far=counter.count, sufficient_decrease=bool(sufficient),
        subproblem_converged=sol.converged, n_points=m_k))
    if stop_for_noise:
        state.terminated = "noise_detected"
        return
    if state.rho < config.rho_min:
        state.terminated = "rho_min"
        return

    # STEP 6 (and model update after an accepted step)
    if status == REJECTED:
        make_fully_linear(state, problem, counter, config)
    else:
        _rebuild(state, problem, counter, config)
    state.k += 1


def optimize(problem, config: Optional[SolverConfig] = None, counter: Optional[EvalCounter] = None,
             callback: Optional[Callable[[TrustRegionState], None]] = None) -> OptimizeResult:
    """Minimize ``problem.f`` subject to ``problem.c <= 0`` from the feasible ``problem.x0``.

    Unpacks as ``x_best, f_best, history, termination_reason``.
    """
    config = (config or SolverConfig()).validate()
    counter = counter if counter is not None else EvalCounter()
    state = None
    try:
        state = initialize(problem, config, counter)
        while not state.terminated:
            _iterate(state, problem, config, counter)
            if callback is not None:
                callback(state)
    except BudgetExhausted:
        reason = "max_evals"
    except ImprovementStalled as exc:
        _log.warning("stopping: %s", exc)
        reason = "improvement_stalled"
    else:
        reason = state.terminated
    if state is None:
        raise RuntimeError("evaluation budget too small to build the initial models")
    if state.terminated is None:
        state.terminated = reason
    return OptimizeResult(state.x.copy(), state.f, state.history, reason, counter.count, counter,
                          config, getattr(problem, "name", ""))


# --------------------------------------------------------------------------
# serialization


def _na(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "NA"
    return _fmt(v)


def format_history(result: OptimizeResult) -> str:
    """Config header (``# key = value``) followed by one line per record.

    Columns: ``k,status,rho,alpha,r_k,f,x_1..x_n,Hf_norm,Hc1_norm..``.
    """
    buf = io.StringIO()
    if result.problem_name:
        buf.write(f"# problem = {result.problem_name}\n")
    for name in SolverConfig.field_names():
        buf.write(f"# {name} = {getattr(result.config, name)}\n")
    buf.write(f"# termination_reason = {result.termination_reason}\n")
    buf.write(f"# n_evals = {result.n_evals}\n")
    for rec in result.history:
        fields = [str(rec.k), rec.status, _na(rec.rho), _na(rec.alpha), _na(rec.r_k), _na(rec.f)]
        fields += [_fmt(v) for v in rec.x]
        fields += [_na(h) for h in rec.hessian_norms]
        buf.write(",".join(fields) + "\n")
    return buf.getvalue()


def write_history(result: OptimizeResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_history(result))
