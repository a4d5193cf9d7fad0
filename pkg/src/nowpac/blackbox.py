"""Black-box objective/constraint evaluation, counting and noise injection."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, NonFiniteEvaluation

EvalFn = Callable[[np.ndarray], Tuple[float, np.ndarray]]
GradFn = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


@dataclass
class BlackBoxProblem:
    """Minimize ``f(x)`` subject to ``c_i(x) <= 0`` for ``i = 1..r``.

    ``eval`` maps a point to ``(f, c)`` with ``c`` of length ``r``.
    ``analytic_grad`` (benchmarks only) maps a point to ``(grad_f, jac_c)``
    where ``jac_c`` has shape ``(n, r)``.
    """

    name: str
    n: int
    r: int
    eval: EvalFn
    x0: np.ndarray
    analytic_grad: Optional[GradFn] = None
    known_optimum: Optional[Tuple[np.ndarray, float]] = None
    bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.r < 0:
            raise ValueError("r must be nonnegative")
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.x0.shape != (self.n,):
            raise DimensionMismatch(f"x0 has shape {self.x0.shape}, expected ({self.n},)")

    @property
    def inner(self) -> "BlackBoxProblem":
        return self

    def true_eval(self, x) -> Tuple[float, np.ndarray]:
        """Noise-free evaluation, not counted (diagnostics only)."""
        f, c = self.eval(np.asarray(x, dtype=float))
        return float(f), np.atleast_1d(np.asarray(c, dtype=float)).reshape(self.r)


class NoisyProblem:
    """Wraps a problem and adds uniform noise to every evaluation.

    The draw for the k-th call depends only on ``(seed, k)``, so a fresh
    instance with the same seed replays the same noise sequence.
    """

    def __init__(self, inner: BlackBoxProblem, delta_f_max: float = 0.0,
                 delta_c_max: float = 0.0, seed: int = 0):
        if delta_f_max < 0 or delta_c_max < 0:
            raise ValueError("noise half-widths must be nonnegative")
        self.inner = inner
        self.delta_f_max = float(delta_f_max)
        self.delta_c_max = float(delta_c_max)
        self.seed = int(seed)
        self.n_calls = 0

    name = property(lambda self: self.inner.name)
    n = property(lambda self: self.inner.n)
    r = property(lambda self: self.inner.r)
    x0 = property(lambda self: self.inner.x0)
    analytic_grad = property(lambda self: self.inner.analytic_grad)
    known_optimum = property(lambda self: self.inner.known_optimum)
    bounds = property(lambda self: self.inner.bounds)

    def reset(self):
        self.n_calls = 0

    def true_eval(self, x):
        return self.inner.true_eval(x)

    def eval(self, x):
        f, c = self.inner.eval(x)
        k = self.n_calls
        self.n_calls += 1
        if self.delta_f_max == 0.0 and self.delta_c_max == 0.0:
            return f, c
        rng = np.random.default_rng([self.seed & 0xFFFFFFFFFFFFFFFF, k])
        u = rng.uniform(-1.0, 1.0, size=1 + self.inner.r)
        c = np.atleast_1d(np.asarray(c, dtype=float))
        if self.delta_f_max > 0.0:
            f = f + self.delta_f_max * u[0]
        if self.delta_c_max > 0.0:
            c = c + self.delta_c_max * u[1:]
        return f, c


@dataclass
class EvalCounter:
    """Counts evaluations and keeps the full ``(x, f, c)`` log."""

    log: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.log)

    def dump(self, out=None) -> str:
        """Render the log as ``k,x_1..x_n,f,c_1..c_r`` lines."""
        buf = io.StringIO()
        for k, (x, f, c) in enumerate(self.log):
            fields = [str(k)] + [_fmt(v) for v in x] + [_fmt(f)] + [_fmt(v) for v in c]
            buf.write(",".join(fields) + "\n")
        text = buf.getvalue()
        if out is not None:
            out.write(text)
        return text


def evaluate(problem, x: Sequence[float], counter: Optional[EvalCounter] = None):
    """Evaluate ``problem`` at ``x``, returning ``(f, c)`` as ``(float, ndarray)``."""
    x = np.array(x, dtype=float)
    if x.shape != (problem.n,):
        raise DimensionMismatch(f"x has shape {x.shape}, expected ({problem.n},)")
    f, c = problem.eval(x.copy())
    f = float(f)
    c = np.atleast_1d(np.asarray(c, dtype=float)).copy()
    if c.size != problem.r:
        raise DimensionMismatch(f"problem returned {c.size} constraints, expected {problem.r}")
    if counter is not None:
        counter.log.append((x, f, c))
    if not (np.isfinite(f) and np.all(np.isfinite(c))):
        raise NonFiniteEvaluation(x, f, c)
    return f, c


def is_feasible(problem, x, margin: float = 0.0, counter: Optional[EvalCounter] = None) -> bool:
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    _, c = evaluate(problem, x, counter)
    return bool(np.all(c <= -margin))
