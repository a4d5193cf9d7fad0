import math

import numpy as np
import pytest

from nowpac.errors import SubproblemInfeasibleStart
from nowpac.feasibility import IbpParams, model_constraint_values
from nowpac.subsolver import (LinearObjective, SubproblemSpec, solve_criticality,
                              solve_criticality_subproblem, solve_trial_step)
from nowpac.surrogate import QuadraticModel


def _quad(c0, g, H):
    g = np.asarray(g, dtype=float)
    return QuadraticModel(float(c0), g, np.asarray(H, dtype=float), np.zeros(g.size))


def _lin(c0, g):
    g = np.asarray(g, dtype=float)
    return _quad(c0, g, np.zeros((g.size, g.size)))


IBP10 = IbpParams(10.0, 10.0)


def grid_oracle(objective, constraints, eps, radius, h=1e-4):
    """Global minimum over a Cartesian grid of the 2-D feasible region (value only)."""
    xs = np.arange(-radius, radius + h / 2, h)
    X, Y = np.meshgrid(xs, xs)
    S = np.column_stack([X.ravel(), Y.ravel()])
    S = S[np.einsum("ij,ij->i", S, S) <= radius * radius]
    sq = np.einsum("ij,ij->i", S, S)
    ok = np.ones(len(S), dtype=bool)
    for m in constraints:
        ok &= m.c0 + S @ m.g + 0.5 * np.einsum("ij,jk,ik->i", S, m.H, S) + eps * sq <= 0.0
    vals = S @ objective.g
    if isinstance(objective, QuadraticModel):
        vals = vals + 0.5 * np.einsum("ij,jk,ik->i", S, objective.H, S)
    return min(float(vals[ok].min()), 0.0)


def random_subproblem(rng, convex_objective=True):
    A = rng.normal(size=(2, 2))
    Hf = A @ A.T * rng.uniform(0.0, 3.0)
    if not convex_objective:
        Hf = Hf - 2.0 * np.eye(2)
    objective = _quad(0.0, rng.normal(size=2), Hf)
    constraints = []
    for _ in range(int(rng.integers(1, 3))):
        B = rng.normal(size=(2, 2))
        constraints.append(_quad(-rng.uniform(0.0, 0.3), rng.normal(size=2), 0.5 * (B + B.T)))
    eps = 0.5 * max(np.linalg.norm(m.H, 2) for m in constraints) + rng.uniform(0.0, 2.0)
    radius = rng.uniform(0.05, 0.1)
    return objective, constraints, eps, radius


def test_linear_model_unconstrained():
    sol = solve_trial_step(SubproblemSpec(_lin(0.0, [1.0, 0.0]), [], IBP10, 0.1))
    np.testing.assert_allclose(sol.s, [-0.1, 0.0], atol=1e-12)
    assert sol.objective_value == pytest.approx(-0.1)
    assert sol.converged


def test_inactive_offset_constraint():
    spec = SubproblemSpec(_lin(0.0, [1.0, 0.0]), [_lin(-0.05, [1.0, 0.0])], IBP10, 0.1)
    sol = solve_trial_step(spec)
    np.testing.assert_allclose(sol.s, [-0.1, 0.0], atol=1e-6)
    assert sol.objective_value == pytest.approx(-0.1, abs=1e-6)


def test_offset_binds_for_larger_radius():
    # s1 + 10 s1^2 <= 0.05 along the steepest-descent ray: s1 = (-1 - sqrt(3)) / 20
    spec = SubproblemSpec(_lin(0.0, [1.0, 0.0]), [_lin(-0.05, [1.0, 0.0])], IBP10, 0.5)
    sol = solve_trial_step(spec)
    exact = (-1.0 - math.sqrt(3.0)) / 20.0
    assert sol.objective_value == pytest.approx(exact, abs=1e-7)
    assert sol.objective_value == pytest.approx(
        grid_oracle(spec.objective, spec.constraint_models, 10.0, 0.5, h=5e-4), abs=1e-3)
    assert 0 in sol.active_set


def test_infeasible_start_rejected():
    with pytest.raises(SubproblemInfeasibleStart):
        solve_trial_step(SubproblemSpec(_lin(0.0, [1.0, 0.0]), [_lin(1e-6, [1.0, 0.0])], IBP10, 0.1))


def test_criticality_interior_is_gradient_norm():
    assert solve_criticality(SubproblemSpec(LinearObjective([3.0, 4.0]), [], IBP10, 0.37)) == pytest.approx(5.0)
    assert solve_criticality(SubproblemSpec(LinearObjective([0.0, 0.0]), [], IBP10, 0.1)) == 0.0


def test_criticality_boundary_critical():
    # max s1 subject to s1 <= -10 |s|^2 forces s = 0
    spec = SubproblemSpec(LinearObjective([-1.0, 0.0]), [_lin(0.0, [1.0, 0.0])], IBP10, 0.05)
    assert solve_criticality(spec) == pytest.approx(0.0, abs=1e-6)


def test_criticality_scales_with_gradient():
    cons = [_lin(-0.01, [0.3, 1.0])]
    a1 = solve_criticality(SubproblemSpec(LinearObjective([1.0, -2.0]), cons, IBP10, 0.2))
    a2 = solve_criticality(SubproblemSpec(LinearObjective([3.0, -6.0]), cons, IBP10, 0.2))
    assert a2 == pytest.approx(3.0 * a1, rel=1e-6)
    s1 = solve_criticality_subproblem(SubproblemSpec(LinearObjective([1.0, -2.0]), cons, IBP10, 0.2)).s
    s2 = solve_criticality_subproblem(SubproblemSpec(LinearObjective([3.0, -6.0]), cons, IBP10, 0.2)).s
    np.testing.assert_allclose(s1, s2, atol=1e-6)


@pytest.mark.parametrize("convex", [True, False])
def test_random_problems_against_grid(convex):
    rng = np.random.default_rng(2024 if convex else 77)
    for _ in range(12):
        objective, constraints, eps, radius = random_subproblem(rng, convex)
        ibp = IbpParams(eps, eps)
        sol = solve_trial_step(SubproblemSpec(objective, constraints, ibp, radius))
        assert np.linalg.norm(sol.s) <= radius * (1 + 1e-10)
        assert np.all(model_constraint_values(constraints, sol.s, ibp) <= 1e-8)
        assert sol.objective_value <= 0.0
        assert sol.objective_value == pytest.approx(grid_oracle(objective, constraints, eps, radius), abs=1e-3)


def test_nonconvex_objective_uses_boundary():
    # pure negative curvature, inactive constraint: the optimum is on the sphere
    spec = SubproblemSpec(_quad(0.0, [0.0, 0.0], -np.eye(2)), [_lin(-1.0, [0.0, 0.0])], IBP10, 0.1)
    sol = solve_trial_step(spec)
    assert sol.objective_value == pytest.approx(-0.005, abs=1e-9)


def test_empty_interior_returns_zero_step():
    # model-feasible set is the single point s = 0
    spec = SubproblemSpec(_lin(0.0, [1.0, 0.0]), [_lin(0.0, [0.0, 0.0])], IBP10, 0.1)
    sol = solve_trial_step(spec)
    np.testing.assert_array_equal(sol.s, 0.0)
    assert sol.objective_value == 0.0


def test_radius_must_be_positive():
    with pytest.raises(ValueError):
        SubproblemSpec(LinearObjective([1.0]), [], IBP10, 0.0)
