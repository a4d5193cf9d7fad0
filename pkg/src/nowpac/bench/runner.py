"""Benchmark runs, noise sweeps, result tables and the exact criticality oracle."""

from __future__ import annotations

import dataclasses
import io
import logging
import math
import os
from collections import Counter
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from ..blackbox import NoisyProblem
from ..core import ACCEPTABLE, SUCCESSFUL, SolverConfig, optimize, write_history
from ..errors import EmptyResults, FeasibilityViolation, NowpacError
from .problems import HS_IDS, aniso_exp, hs_problem, rosenbrock

_log = logging.getLogger(__name__)

COLUMNS = ("case", "SC", "n_evals", "d_x", "d_f_abs", "d_f_rel", "n_saved", "terminated_by")
FEAS_TOL = 0.0


@dataclass
class NoiseSpec:
    delta_f: float = 0.0
    delta_c: float = 0.0
    seeds: Optional[List[int]] = None


@dataclass
class BenchmarkCase:
    problem: object
    sc: float
    noise: Optional[NoiseSpec] = None
    replicates: int = 1
    name: Optional[str] = None

    def __post_init__(self):
        if not self.sc > 0:
            raise ValueError(f"stopping threshold must be positive, got {self.sc}")
        if int(self.replicates) < 1:
            raise ValueError(f"replicates must be at least 1, got {self.replicates}")
        self.replicates = int(self.replicates)
        if self.noise is not None and self.noise.seeds is not None and len(self.noise.seeds) < self.replicates:
            raise ValueError("fewer noise seeds than replicates")
        if self.name is None:
            self.name = self.problem.name
            if self.noisy:
                self.name += f"[df={self.noise.delta_f:g},dc={self.noise.delta_c:g}]"

    @property
    def noisy(self) -> bool:
        return self.noise is not None and (self.noise.delta_f > 0 or self.noise.delta_c > 0)

    def seeds(self) -> List[int]:
        if self.noise is not None and self.noise.seeds is not None:
            return list(self.noise.seeds[: self.replicates])
        return list(range(self.replicates))


@dataclass
class BenchmarkResult:
    case: str
    sc: float
    n_evals: float
    d_x: Optional[float]
    d_f_abs: Optional[float]
    d_f_rel: Optional[float]
    n_saved: Optional[float]
    terminated_by: str
    seed: Optional[int] = None
    x_best: Optional[np.ndarray] = None
    f_best: Optional[float] = None


def _errors(problem, x):
    """Distances to the known optimum, using a noise-free evaluation."""
    if problem.known_optimum is None or x is None:
        return None, None, None
    x_star, f_star = problem.known_optimum
    f_true, _ = problem.true_eval(x)
    d_x = float(np.linalg.norm(np.asarray(x) - x_star))
    d_f = abs(f_true - f_star)
    d_rel = d_f / abs(f_star) if f_star != 0 else None
    return d_x, d_f, d_rel


def check_feasibility_invariant(problem, history, tol: float = FEAS_TOL):
    """Every accepted iterate must satisfy the true constraints."""
    for rec in history:
        if rec.status in (SUCCESSFUL, ACCEPTABLE) and problem.r:
            _, c = problem.true_eval(rec.x)
            if np.any(c > tol):
                raise FeasibilityViolation(f"iterate {rec.k} of {problem.name} violates c <= 0: {c}")


def _hist_name(case: BenchmarkCase, seed) -> str:
    name = case.name.replace("/", "_").replace(" ", "")
    return f"{name}_{case.sc:g}_{seed}.hist"


def _instance(case: BenchmarkCase, seed):
    if case.noisy:
        return NoisyProblem(case.problem, case.noise.delta_f, case.noise.delta_c, seed)
    return case.problem


def run_benchmark(case: BenchmarkCase, solver_config: Optional[SolverConfig] = None,
                  out_dir=None) -> List[BenchmarkResult]:
    """One result per replicate. Noisy cases also run a twin without early
    termination to count the evaluations saved."""
    base = solver_config or SolverConfig()
    results = []
    for seed in case.seeds():
        cfg = dataclasses.replace(base, rho_min=case.sc, seed=seed).validate()
        problem = _instance(case, seed)
        try:
            res = optimize(problem, cfg)
        except NowpacError as exc:
            _log.warning("%s seed %s failed: %s", case.name, seed, exc)
            results.append(BenchmarkResult(case.name, case.sc, float("nan"), None, None, None, None,
                                           f"error:{type(exc).__name__}", seed))
            continue
        if not (case.noisy and case.noise.delta_c > 0):
            check_feasibility_invariant(problem, res.history)
        n_saved = None
        if case.noisy:
            if cfg.early_termination:
                twin = optimize(_instance(case, seed), dataclasses.replace(cfg, early_termination=False))
                n_saved = twin.n_evals - res.n_evals
            else:
                n_saved = 0
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            write_history(res, os.path.join(out_dir, _hist_name(case, seed)))
        d_x, d_f, d_rel = _errors(problem, res.x_best)
        results.append(BenchmarkResult(case.name, case.sc, res.n_evals, d_x, d_f, d_rel, n_saved,
                                       res.termination_reason, seed, res.x_best, res.f_best))
    return results


def _mean(values):
    vals = [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
    return float(np.mean(vals)) if vals else None


def aggregate(results: Sequence[BenchmarkResult]) -> BenchmarkResult:
    """Mean over replicates; ``terminated_by`` is the most frequent reason."""
    if not results:
        raise EmptyResults("nothing to aggregate")
    reasons = Counter(r.terminated_by for r in results)
    top, count = reasons.most_common(1)[0]
    label = top if count == len(results) else f"{top}({count}/{len(results)})"
    first = results[0]
    return BenchmarkResult(first.case, first.sc, _mean(r.n_evals for r in results),
                           _mean(r.d_x for r in results), _mean(r.d_f_abs for r in results),
                           _mean(r.d_f_rel for r in results), _mean(r.n_saved for r in results), label)


# ---------------------------------------------------------------------------
# tables


def _cell(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        if math.isnan(v):
            return "NA"
        if v.is_integer() and abs(v) < 1e15:
            return str(int(v))
        return format(v, ".6g")
    return str(v)


def _row(r: BenchmarkResult):
    return [r.case, _cell(r.sc), _cell(r.n_evals), _cell(r.d_x), _cell(r.d_f_abs),
            _cell(r.d_f_rel), _cell(r.n_saved), r.terminated_by]


def emit_table(results: Sequence[BenchmarkResult], fmt: str = "csv") -> str:
    if not results:
        raise EmptyResults("no benchmark results to tabulate")
    rows = [_row(r) for r in results]
    buf = io.StringIO()
    if fmt == "csv":
        buf.write(",".join(COLUMNS) + "\n")
        for row in rows:
            buf.write(",".join(row) + "\n")
    elif fmt == "markdown":
        buf.write("| " + " | ".join(COLUMNS) + " |\n")
        buf.write("|" + "|".join("---" for _ in COLUMNS) + "|\n")
        for row in rows:
            buf.write("| " + " | ".join(row) + " |\n")
    else:
        raise ValueError(f"unknown table format {fmt!r}")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# suites


def default_suite() -> List[BenchmarkCase]:
    cases = [BenchmarkCase(rosenbrock(), 1e-5), BenchmarkCase(aniso_exp(), 1e-5)]
    cases += [BenchmarkCase(hs_problem(i), 1e-3) for i in HS_IDS]
    return cases


def noise_sweep(problem, deltas_f: Sequence[float], deltas_c: Sequence[float] = (0.0,),
                replicates: int = 100, sc: float = 1e-5, solver_config: Optional[SolverConfig] = None,
                out_dir=None, seed0: int = 0):
    """One aggregated row per ``(delta_f, delta_c)`` pair."""
    rows = []
    for dc in deltas_c:
        for df in deltas_f:
            seeds = list(range(seed0, seed0 + replicates))
            case = BenchmarkCase(problem, sc, NoiseSpec(df, dc, seeds), replicates)
            rows.append(aggregate(run_benchmark(case, solver_config, out_dir)))
    return rows


# ---------------------------------------------------------------------------
# exact criticality


def exact_criticality_oracle(problem, x, eps_b: float = 10.0, p: float = 0.0, n_starts: int = 8,
                             seed: int = 0) -> float:
    """``|min <grad f(x), d>|`` over ``{c(x + d) + eps_b |d|^(2/(1+p)) <= 0, |d| <= 1}``.

    Uses analytic gradients and the true constraints; the subproblem is solved
    by multi-start SLSQP, seeded from a polar grid when ``n <= 2``.
    """
    if problem.analytic_grad is None:
        raise ValueError(f"problem {problem.name!r} has no analytic gradient")
    x = np.asarray(x, dtype=float)
    n = x.size
    g, _ = problem.analytic_grad(x)
    g = np.asarray(g, dtype=float)
    if not np.any(g):
        return 0.0
    beta = 2.0 / (1.0 + p)

    def cons(d):
        _, c = problem.true_eval(x + d)
        nd = float(np.linalg.norm(d))
        return np.append(-(c + eps_b * nd ** beta), 1.0 - nd * nd)

    def feasible(d, tol=1e-10):
        return bool(np.all(cons(d) >= -tol))

    best = 0.0
    starts = [-g / np.linalg.norm(g)]
    rng = np.random.default_rng(seed)
    if n <= 2:
        best, d_grid = _polar_grid_min(g, feasible, n)
        if d_grid is not None:
            starts.insert(0, d_grid)
    for _ in range(n_starts):
        v = rng.normal(size=n)
        starts.append(rng.uniform(0.0, 1.0) * v / np.linalg.norm(v))
    for d0 in starts:
        for scale in (1.0, 0.1, 0.01):
            out = minimize(lambda d: float(g @ d), scale * d0, jac=lambda d: g, method="SLSQP",
                           constraints=[{"type": "ineq", "fun": cons}],
                           options={"maxiter": 300, "ftol": 1e-14})
            if feasible(out.x) and float(g @ out.x) < best:
                best = float(g @ out.x)
            if out.success:
                break
    return abs(min(best, 0.0))


def _polar_grid_min(g, feasible, n, n_radii=200, n_angles=720):
    """Best feasible grid point of ``<g, d>`` in the unit ball (``n <= 2``)."""
    best, arg = 0.0, None
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        th = np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False)
        dirs = np.column_stack([np.cos(th), np.sin(th)])
    radii = np.linspace(1.0 / n_radii, 1.0, n_radii)
    for u in dirs:
        slope = float(g @ u)
        if slope >= best:
            continue
        for t in radii:
            if slope * t >= best:
                continue
            if feasible(t * u, tol=0.0):
                best, arg = slope * t, t * u
    return best, arg
