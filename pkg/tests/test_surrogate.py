import numpy as np
import pytest
from scipy.linalg import null_space

from conftest import make_problem
from nowpac.blackbox import EvalCounter
from nowpac.errors import SingularGeometry
from nowpac.surrogate import (InterpolationSet, build_mfn_model, build_models, ensure_fully_linear,
                              initial_set, is_fully_linear, lagrange_polynomials, max_set_size,
                              model_errors, poisedness, update_set_after_step)
from nowpac.trs import max_abs_quadratic, solve_trs

# six points in general position around the origin
POISED6 = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [-0.07, 0.05], [0.04, -0.09], [0.06, 0.08]])


def _set(points, fvals=None, center_index=0):
    points = np.asarray(points, dtype=float)
    m = len(points)
    fvals = np.zeros(m) if fvals is None else fvals
    return InterpolationSet(points[center_index], points, fvals, np.zeros((m, 0)))


def _ball_samples(center, radius, n_samples=20000, seed=0):
    rng = np.random.default_rng(seed)
    n = center.size
    d = rng.standard_normal((n_samples, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    d *= radius * rng.uniform(0, 1, (n_samples, 1)) ** (1.0 / n)
    return center + d


def test_constant_values_give_constant_model():
    model = build_mfn_model(_set(POISED6), np.full(6, 3.0))
    assert model.c0 == pytest.approx(3.0, abs=1e-12)
    np.testing.assert_allclose(model.g, 0.0, atol=1e-10)
    np.testing.assert_allclose(model.H, 0.0, atol=1e-8)


def test_full_set_reproduces_sphere():
    f = lambda y: y[0] ** 2 + y[1] ** 2  # noqa: E731
    model = build_mfn_model(_set(POISED6), [f(y) for y in POISED6])
    assert model.c0 == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(model.g, 0.0, atol=1e-9)
    np.testing.assert_allclose(model.H, 2.0 * np.eye(2), atol=1e-7)
    for y in POISED6:
        assert abs(model(y) - f(y)) <= 1e-8 * max(1.0, abs(f(y)))


def _min_frobenius_oracle(points, values, center):
    """Among all quadratics interpolating the data, the Hessian of least Frobenius norm.

    Unknowns (c0, g1, g2, h11, h12, h22); minimize h11^2 + 2 h12^2 + h22^2 over the
    affine solution set via an explicit null-space parametrization.
    """
    Y = np.asarray(points) - center
    M = np.column_stack([np.ones(len(Y)), Y[:, 0], Y[:, 1],
                         0.5 * Y[:, 0] ** 2, Y[:, 0] * Y[:, 1], 0.5 * Y[:, 1] ** 2])
    x_p = np.linalg.lstsq(M, values, rcond=None)[0]
    N = null_space(M)
    W = np.diag([0, 0, 0, 1.0, np.sqrt(2.0), 1.0])
    z = np.linalg.lstsq(W @ N, -W @ x_p, rcond=None)[0]
    x = x_p + N @ z
    return np.array([[x[3], x[4]], [x[4], x[5]]])


def test_underdetermined_model_has_minimal_frobenius_hessian():
    pts = POISED6[:4]
    vals = np.array([y[0] ** 2 for y in pts])
    model = build_mfn_model(_set(pts), vals)
    H_oracle = _min_frobenius_oracle(pts, vals, pts[0])
    np.testing.assert_allclose(model.H, H_oracle, atol=1e-8)
    for y, v in zip(pts, vals):
        assert model(y) == pytest.approx(v, abs=1e-10)


def test_underdetermined_kkt_structure():
    # optimality: H lies in the span of the outer products of the shifted points
    pts = POISED6[:5]
    rng = np.random.default_rng(4)
    vals = rng.normal(size=5)
    model = build_mfn_model(_set(pts), vals)
    Y = pts - pts[0]
    basis = np.array([np.outer(y, y)[np.triu_indices(2)] for y in Y]).T
    h = model.H[np.triu_indices(2)]
    coef, *_ = np.linalg.lstsq(basis, h, rcond=None)
    np.testing.assert_allclose(basis @ coef, h, atol=1e-8)


def test_build_models_pins_center_values():
    pts = POISED6
    cvals = np.column_stack([pts[:, 0] - 0.3, np.sin(pts[:, 1])])
    iset = InterpolationSet(pts[2], pts, np.cos(pts[:, 0]), cvals)
    mf, mc = build_models(iset, scale=0.1)
    assert mf.c0 == np.cos(pts[2, 0])
    assert [m.c0 for m in mc] == list(cvals[2])
    np.testing.assert_allclose(mc[0].g, [1.0, 0.0], atol=1e-10)


def test_too_few_points_is_singular():
    with pytest.raises(SingularGeometry):
        build_mfn_model(_set(POISED6[:2]), [0.0, 1.0])
    with pytest.raises(SingularGeometry):
        lagrange_polynomials(_set(POISED6[:1]))


def test_lagrange_kronecker_and_partition_of_unity():
    iset = _set(POISED6)
    polys = lagrange_polynomials(iset, scale=0.1)
    for i, ell in enumerate(polys):
        for j, y in enumerate(POISED6):
            assert ell(y) == pytest.approx(1.0 if i == j else 0.0, abs=1e-8)
    for x in _ball_samples(np.zeros(2), 0.1, 10, seed=1):
        assert sum(ell(x) for ell in polys) == pytest.approx(1.0, abs=1e-10)


def test_poisedness_matches_sampling_oracle():
    iset = _set(POISED6)
    lam = poisedness(iset, 0.1)
    polys = lagrange_polynomials(iset, scale=0.1)
    X = _ball_samples(np.zeros(2), 0.1)
    sampled = max(max(abs(ell(x)) for x in X[:4000]) for ell in polys)
    assert sampled <= lam * (1 + 1e-9)
    assert lam <= sampled * 1.05
    assert 1.0 <= lam <= 100.0


def test_nearly_collinear_set_is_badly_poised():
    pts = np.array([[0.0, 0.0], [0.1, 0.0], [0.05, 1e-5]])
    assert poisedness(_set(pts), 0.1) > 100.0
    assert not is_fully_linear(_set(pts), 0.1)


def test_trs_against_sampling():
    rng = np.random.default_rng(11)
    for _ in range(50):
        A = rng.normal(size=(3, 3))
        H = A + A.T
        g = rng.normal(size=3) * rng.choice([0.0, 1.0])
        s, v = solve_trs(g, H, 0.7)
        assert np.linalg.norm(s) <= 0.7 * (1 + 1e-10)
        X = _ball_samples(np.zeros(3), 0.7, 5000, seed=int(rng.integers(1 << 30)))
        vals = X @ g + 0.5 * np.einsum("ij,jk,ik->i", X, H, X)
        assert v <= vals.min() + 1e-10
        assert v == pytest.approx(g @ s + 0.5 * s @ H @ s, abs=1e-12)


def test_max_abs_quadratic_hard_case():
    # g = 0, H = diag(-1, 1): both axes attain |q| = 1/2 at the boundary
    step, val = max_abs_quadratic(0.0, np.zeros(2), np.diag([-1.0, 1.0]), 1.0)
    assert val == pytest.approx(0.5)
    assert np.linalg.norm(step) == pytest.approx(1.0)


class TestEnsureFullyLinear:
    def _quad_problem(self):
        f = lambda x: float(3 * x[0] ** 2 - x[0] * x[1] + 2 * x[1] ** 2 + x[0])  # noqa: E731
        grad = lambda x: np.array([6 * x[0] - x[1] + 1, -x[0] + 4 * x[1]])  # noqa: E731
        return make_problem("quad", 2, f, x0=[0.2, -0.1]), f, grad

    def test_well_poised_set_is_untouched(self):
        p, f, _ = self._quad_problem()
        pts = POISED6 + p.x0
        iset = InterpolationSet(pts[0], pts, [f(x) for x in pts], np.zeros((6, 0)))
        counter = EvalCounter()
        out, _ = ensure_fully_linear(iset, p, counter, 0.1)
        assert counter.count == 0
        np.testing.assert_array_equal(out.points, iset.points)

    def test_far_point_is_replaced(self):
        p, f, _ = self._quad_problem()
        pts = POISED6[:3] + p.x0
        pts = np.vstack([pts, p.x0 + [1.0, 0.0]])
        iset = InterpolationSet(pts[0], pts, [f(x) for x in pts], np.zeros((4, 0)))
        out, _ = ensure_fully_linear(iset, p, EvalCounter(), 0.1)
        assert np.all(out.distances() <= 0.2 + 1e-15)

    def test_collinear_set_is_repaired(self):
        p, f, grad = self._quad_problem()
        rho = 0.1
        pts = p.x0 + np.array([[0.0, 0.0], [0.05, 0.0], [0.1, 0.0]])
        iset = InterpolationSet(pts[0], pts, [f(x) for x in pts], np.zeros((3, 0)))
        out, (mf, _) = ensure_fully_linear(iset, p, EvalCounter(), rho)
        assert poisedness(out, rho) <= 100.0
        assert np.linalg.norm(mf.g - grad(p.x0)) <= 10 * rho

    def test_grows_single_point_to_simplex(self):
        p, f, _ = self._quad_problem()
        counter = EvalCounter()
        iset, _ = ensure_fully_linear(initial_set(p.x0, f(p.x0), np.zeros(0)), p, counter, 0.1)
        assert iset.m == 3 and counter.count == 2
        assert is_fully_linear(iset, 0.1)


class TestUpdateSet:
    def _full(self):
        pts = POISED6
        return InterpolationSet(pts[0], pts, np.arange(6.0), np.zeros((6, 0)))

    def test_accepted_step_recenters(self):
        iset = _set(POISED6[:4])
        out = update_set_after_step(iset, [0.02, 0.03], 1.0, np.zeros(0), True, 0.1)
        np.testing.assert_array_equal(out.center, [0.02, 0.03])
        assert out.m == 5

    def test_rejected_step_keeps_center(self):
        iset = _set(POISED6[:4])
        out = update_set_after_step(iset, [0.02, 0.03], 1.0, np.zeros(0), False, 0.1)
        np.testing.assert_array_equal(out.center, iset.center)
        assert any(np.allclose(p, [0.02, 0.03]) for p in out.points)

    def test_full_set_stays_at_capacity(self):
        iset = self._full()
        assert iset.m == max_set_size(2)
        out = update_set_after_step(iset, [0.01, 0.01], 9.0, np.zeros(0), False, 0.1)
        assert out.m == iset.m
        assert any(np.allclose(p, [0.01, 0.01]) for p in out.points)


def test_fully_linear_error_orders():
    """Value error ~ rho^2 and gradient error ~ rho on a smooth non-quadratic."""
    f = lambda x: float(np.exp(x[0]) + x[1] ** 3)  # noqa: E731
    grad = lambda x: np.array([np.exp(x[0]), 3 * x[1] ** 2])  # noqa: E731
    p = make_problem("expcubic", 2, f, x0=[0.3, 0.4])
    rhos = [0.1, 0.05, 0.025, 0.0125]
    ve, ge = [], []
    for rho in rhos:
        iset, (mf, _) = ensure_fully_linear(initial_set(p.x0, f(p.x0), np.zeros(0)), p, EvalCounter(), rho)
        assert poisedness(iset, rho) <= 100.0
        d = model_errors(mf, f, grad, rho)
        ve.append(d.max_value_error)
        ge.append(d.max_gradient_error)
    assert np.polyfit(np.log(rhos), np.log(ve), 1)[0] >= 1.8
    assert np.polyfit(np.log(rhos), np.log(ge), 1)[0] >= 0.8
