"""Benchmark problems: Rosenbrock, a constrained anisotropic exponential and a
subset of the Hock-Schittkowski collection.

Hock-Schittkowski constraints are stated as ``g(x) >= 0`` in the collection;
here they are returned as ``c = -g <= 0``. Their gradients are computed by
complex-step differentiation, which is exact to rounding for these
polynomial formulations.
"""

from __future__ import annotations

import math
from typing import Callable, Dict

import numpy as np

from ..blackbox import BlackBoxProblem
from ..errors import UnknownProblemId

HS_IDS = (29, 43, 100, 113, 227, 228, 264, 285)


def _complex_step_grad(fun, x, m):
    """Jacobian of ``fun: C^n -> C^m`` (as a flat vector) at real ``x``; shape ``(n, m)``."""
    n = x.size
    h = 1e-30
    J = np.empty((n, m))
    for j in range(n):
        z = x.astype(complex)
        z[j] += 1j * h
        J[j] = np.imag(np.asarray(fun(z))) / h
    return J


def _wrap(name, x0, objective, constraints, x_star=None, f_star=None, r=None, bounds=None):
    """Build a problem from ``objective(x)`` and ``constraints(x) -> list of g >= 0``."""
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    r = len(constraints(x0)) if r is None else r

    def eval_(x):
        return float(objective(x)), -np.asarray(constraints(x), dtype=float).reshape(r)

    def grad(x):
        x = np.asarray(x, dtype=float)
        gf = _complex_step_grad(lambda z: [objective(z)], x, 1)[:, 0]
        jc = -_complex_step_grad(constraints, x, r) if r else np.zeros((n, 0))
        return gf, jc

    opt = None
    if x_star is not None:
        opt = (np.asarray(x_star, dtype=float), float(f_star))
    return BlackBoxProblem(name=name, n=n, r=r, eval=eval_, x0=x0, analytic_grad=grad,
                           known_optimum=opt, bounds=bounds)


# ---------------------------------------------------------------------------


def rosenbrock() -> BlackBoxProblem:
    def eval_(x):
        return (x[1] - x[0] ** 2) ** 2 + (x[0] - 1.0) ** 2, np.zeros(0)

    def grad(x):
        a = x[1] - x[0] ** 2
        g = np.array([-4.0 * x[0] * a + 2.0 * (x[0] - 1.0), 2.0 * a])
        return g, np.zeros((2, 0))

    return BlackBoxProblem("rosenbrock", 2, 0, eval_, np.array([1.5, 1.5]), analytic_grad=grad,
                           known_optimum=(np.array([1.0, 1.0]), 0.0))


_D = np.arange(1.0, 6.0)
_E5 = np.array([0.0, 0.0, 0.0, 0.0, 0.375])


def aniso_exp() -> BlackBoxProblem:
    """``-exp(x^T D x)`` with ``sin(|x|^2) <= 1/2`` and ``|x - 3/8 e5| <= 3/8``."""

    def eval_(x):
        with np.errstate(over="ignore"):
            f = -float(np.exp(x @ (_D * x)))
        return f, np.array([math.sin(float(x @ x)) - 0.5, float(np.linalg.norm(x - _E5)) - 0.375])

    def grad(x):
        q = float(x @ (_D * x))
        with np.errstate(over="ignore"):
            gf = -np.exp(q) * 2.0 * _D * x
        g1 = math.cos(float(x @ x)) * 2.0 * x
        d = x - _E5
        nd = float(np.linalg.norm(d))
        g2 = d / nd if nd > 0 else np.zeros(5)
        return gf, np.column_stack([g1, g2])

    x_star = np.array([0.0, 0.0, 0.0, 0.0, math.sqrt(math.asin(0.5))])
    f_star = -math.exp(5.0 * math.asin(0.5))
    return BlackBoxProblem("aniso_exp", 5, 2, eval_, np.full(5, 0.1), analytic_grad=grad,
                           known_optimum=(x_star, f_star))


# ---------------------------------------------------------------------------
# Hock-Schittkowski


def _hs29():
    return _wrap(
        "hs29", [1.0, 1.0, 1.0],
        lambda x: -x[0] * x[1] * x[2],
        lambda x: [48.0 - x[0] ** 2 - 2.0 * x[1] ** 2 - 4.0 * x[2] ** 2],
        x_star=[4.0, 2.0 * math.sqrt(2.0), 2.0], f_star=-16.0 * math.sqrt(2.0))


def _hs43_objective(x):
    return (x[0] ** 2 + x[1] ** 2 + 2.0 * x[2] ** 2 + x[3] ** 2
            - 5.0 * x[0] - 5.0 * x[1] - 21.0 * x[2] + 7.0 * x[3])


def _hs43_like(name, b2):
    def cons(x):
        return [
            8.0 - x[0] ** 2 - x[1] ** 2 - x[2] ** 2 - x[3] ** 2 - x[0] + x[1] - x[2] + x[3],
            b2 - x[0] ** 2 - 2.0 * x[1] ** 2 - x[2] ** 2 - 2.0 * x[3] ** 2 + x[0] + x[3],
            5.0 - 2.0 * x[0] ** 2 - x[1] ** 2 - x[2] ** 2 - 2.0 * x[0] + x[1] + x[3],
        ]

    return _wrap(name, np.zeros(4), _hs43_objective, cons, x_star=[0.0, 1.0, 2.0, -1.0], f_star=-44.0)


def _hs43():
    return _hs43_like("hs43", 10.0)


def _hs264():
    return _hs43_like("hs264", 9.0)


def _hs227():
    return _wrap(
        "hs227", [0.5, 0.5],
        lambda x: (x[0] - 2.0) ** 2 + (x[1] - 1.0) ** 2,
        lambda x: [-x[0] ** 2 + x[1], x[0] - x[1] ** 2],
        x_star=[1.0, 1.0], f_star=1.0)


def _hs228():
    return _wrap(
        "hs228", [0.0, 0.0],
        lambda x: x[0] ** 2 + x[1],
        lambda x: [-x[0] - x[1] + 1.0, -(x[0] ** 2 + x[1] ** 2) + 9.0],
        x_star=[0.0, -3.0], f_star=-3.0)


def _hs100():
    def f(x):
        return ((x[0] - 10.0) ** 2 + 5.0 * (x[1] - 12.0) ** 2 + x[2] ** 4 + 3.0 * (x[3] - 11.0) ** 2
                + 10.0 * x[4] ** 6 + 7.0 * x[5] ** 2 + x[6] ** 4 - 4.0 * x[5] * x[6]
                - 10.0 * x[5] - 8.0 * x[6])

    def g(x):
        return [
            127.0 - 2.0 * x[0] ** 2 - 3.0 * x[1] ** 4 - x[2] - 4.0 * x[3] ** 2 - 5.0 * x[4],
            282.0 - 7.0 * x[0] - 3.0 * x[1] - 10.0 * x[2] ** 2 - x[3] + x[4],
            196.0 - 23.0 * x[0] - x[1] ** 2 - 6.0 * x[5] ** 2 + 8.0 * x[6],
            -4.0 * x[0] ** 2 - x[1] ** 2 + 3.0 * x[0] * x[1] - 2.0 * x[2] ** 2 - 5.0 * x[5] + 11.0 * x[6],
        ]

    x_star = [2.330499, 1.951372, -0.4775414, 4.365726, -0.6244870, 1.038131, 1.594227]
    return _wrap("hs100", [1.0, 2.0, 0.0, 4.0, 0.0, 1.0, 1.0], f, g, x_star=x_star, f_star=680.6300573)


def _hs113():
    def f(x):
        return (x[0] ** 2 + x[1] ** 2 + x[0] * x[1] - 14.0 * x[0] - 16.0 * x[1] + (x[2] - 10.0) ** 2
                + 4.0 * (x[3] - 5.0) ** 2 + (x[4] - 3.0) ** 2 + 2.0 * (x[5] - 1.0) ** 2 + 5.0 * x[6] ** 2
                + 7.0 * (x[7] - 11.0) ** 2 + 2.0 * (x[8] - 10.0) ** 2 + (x[9] - 7.0) ** 2 + 45.0)

    def g(x):
        return [
            105.0 - 4.0 * x[0] - 5.0 * x[1] + 3.0 * x[6] - 9.0 * x[7],
            -10.0 * x[0] + 8.0 * x[1] + 17.0 * x[6] - 2.0 * x[7],
            8.0 * x[0] - 2.0 * x[1] - 5.0 * x[8] + 2.0 * x[9] + 12.0,
            -3.0 * (x[0] - 2.0) ** 2 - 4.0 * (x[1] - 3.0) ** 2 - 2.0 * x[2] ** 2 + 7.0 * x[3] + 120.0,
            -5.0 * x[0] ** 2 - 8.0 * x[1] - (x[2] - 6.0) ** 2 + 2.0 * x[3] + 40.0,
            -0.5 * (x[0] - 8.0) ** 2 - 2.0 * (x[1] - 4.0) ** 2 - 3.0 * x[4] ** 2 + x[5] + 30.0,
            -x[0] ** 2 - 2.0 * (x[1] - 2.0) ** 2 + 2.0 * x[0] * x[1] - 14.0 * x[4] + 6.0 * x[5],
            3.0 * x[0] - 6.0 * x[1] - 12.0 * (x[8] - 8.0) ** 2 + 7.0 * x[9],
        ]

    x0 = [2.0, 3.0, 5.0, 5.0, 1.0, 2.0, 7.0, 3.0, 6.0, 10.0]
    x_star = [2.171996, 2.363683, 8.773926, 5.095984, 0.9906548, 1.430574, 1.321644,
              9.828726, 8.280092, 8.375927]
    return _wrap("hs113", x0, f, g, x_star=x_star, f_star=24.3062091)


_HS285_C = np.array([486, 640, 758, 776, 477, 707, 175, 619, 627, 614, 475, 377, 524, 468, 529], dtype=float)
_HS285_B = np.array([385, 470, 560, 565, 645, 430, 485, 455, 390, 460], dtype=float)
_HS285_A = np.array([
    [100, 100, 10, 5, 10, 0, 0, 25, 0, 10, 55, 5, 45, 20, 0],
    [90, 100, 10, 35, 20, 5, 0, 35, 55, 25, 20, 0, 40, 25, 10],
    [70, 50, 0, 55, 25, 100, 40, 50, 0, 30, 60, 10, 30, 0, 40],
    [50, 0, 0, 65, 35, 100, 35, 60, 0, 15, 0, 75, 35, 30, 65],
    [50, 10, 70, 60, 45, 45, 0, 35, 65, 5, 75, 100, 75, 10, 0],
    [40, 0, 50, 95, 50, 35, 10, 60, 0, 45, 15, 20, 0, 5, 5],
    [30, 60, 30, 90, 0, 30, 5, 25, 0, 70, 20, 0, 70, 15, 15],
    [20, 30, 40, 25, 40, 25, 15, 10, 80, 20, 30, 30, 5, 65, 20],
    [10, 70, 10, 35, 25, 65, 0, 30, 0, 0, 25, 0, 15, 50, 55],
    [5, 10, 100, 5, 20, 5, 10, 35, 95, 70, 20, 10, 35, 10, 30],
], dtype=float)


def _hs285():
    return _wrap(
        "hs285", np.zeros(15),
        lambda x: -(_HS285_C @ x),
        lambda x: list(_HS285_B - _HS285_A @ (x * x)),
        x_star=np.ones(15), f_star=-float(_HS285_C.sum()))


_HS: Dict[int, Callable[[], BlackBoxProblem]] = {
    29: _hs29, 43: _hs43, 100: _hs100, 113: _hs113, 227: _hs227, 228: _hs228, 264: _hs264, 285: _hs285,
}


def hs_problem(pid: int) -> BlackBoxProblem:
    try:
        return _HS[int(pid)]()
    except (KeyError, ValueError, TypeError):
        raise UnknownProblemId(f"unsupported Hock-Schittkowski problem {pid!r}; choose from {HS_IDS}") from None


def problem_names():
    return ["rosenbrock", "aniso_exp"] + [f"hs{i}" for i in HS_IDS]


def get_problem(name: str) -> BlackBoxProblem:
    """Look up a problem by id: ``rosenbrock``, ``aniso_exp`` (or ``aniso-exp``), ``hs29`` / ``29``..."""
    key = str(name).strip().lower().replace("-", "_")
    if key == "rosenbrock":
        return rosenbrock()
    if key in ("aniso_exp", "anisoexp"):
        return aniso_exp()
    if key.startswith("hs"):
        key = key[2:].lstrip("_")
    if key.isdigit():
        return hs_problem(int(key))
    raise UnknownProblemId(f"unknown problem {name!r}; choose from {', '.join(problem_names())}")
