import numpy as np
import pytest

from ermconc import (Ball, Box, ConfigurationError, Dataset, DomainViolationError, FiniteFamily, Penalty,
                     PopulationOracle, SolverSettings, UnsupportedScenarioError, optimality_residual, prox,
                     solve_erm, solve_regularized_ls)
from ermconc.acceptance import gaussian_location_family
from ermconc.convex import minimize_composite, prox_with_domain
from ermconc.core import ParametricFamily


def test_prox_closed_forms():
    v = np.array([1.0, -2.0])
    np.testing.assert_allclose(prox(Penalty.zero(), v, 0.7), v)
    # squared: v / (1 + 2 step lam^2)
    np.testing.assert_allclose(prox(Penalty.squared(1.0), v, 0.5), v / 2.0)
    box = Penalty.indicator(Box([0.0, 0.0], [0.5, 0.5]))
    np.testing.assert_allclose(prox(box, v, 3.0), [0.5, 0.0])
    with pytest.raises(DomainViolationError):
        prox(Penalty.squared(1.0), v, 0.0)


def test_power_prox_stationarity():
    lam, q, step = 0.8, 1.5, 0.3
    pen = Penalty.power(lam, q)
    v = np.array([2.0, -1.0, 0.5])
    p = prox(pen, v, step)
    r = np.linalg.norm(p)
    grad = lam**2 * q * r ** (q - 2) * p
    np.testing.assert_allclose((p - v) / step + grad, 0.0, atol=1e-8)


def test_prox_with_domain_ridge_in_ball():
    pen = Penalty.squared(1.0)
    dom = Ball(0.5)
    p = prox_with_domain(pen, dom, np.array([3.0, 4.0]), 0.5)
    # shrink to (1.5, 2) then project to radius 0.5
    np.testing.assert_allclose(p, [0.3, 0.4], atol=1e-9)


def test_regularized_ls_oracles():
    Y = np.array([2.0, 4.0])
    n = Y.size
    res = solve_regularized_ls(Y, Penalty.ridge_n(1.0, n))
    np.testing.assert_allclose(res.minimizer, [1.0, 2.0], atol=1e-8)
    res = solve_regularized_ls(Y, Penalty.indicator(Box([0.0, -1.0], [1.0, 0.0])))
    np.testing.assert_allclose(res.minimizer, [1.0, 0.0], atol=1e-10)
    res = solve_regularized_ls(Y, Penalty.zero())
    np.testing.assert_allclose(res.minimizer, Y)
    assert optimality_residual(Y, res.minimizer, Penalty.zero()) < 1e-12
    assert optimality_residual(Y, np.zeros(2), Penalty.zero()) == pytest.approx(np.sqrt(20.0))


def test_batch_rows_match_single_solves():
    rng = np.random.default_rng(0)
    Y = rng.standard_normal((4, 6))
    pen = Penalty.ridge_n(0.3, 6)
    batch = solve_regularized_ls(Y, pen, SolverSettings("fixed", 2.0 / 6)).minimizer
    for row, b in zip(Y, batch):
        np.testing.assert_allclose(solve_regularized_ls(row, pen).minimizer, b, atol=1e-8)


def test_backtracking_is_monotone():
    A = np.diag([1.0, 10.0])
    b = np.array([1.0, 1.0])
    res = minimize_composite(lambda x: 0.5 * x @ A @ x - b @ x, lambda x: A @ x - b, Penalty.squared(0.5),
                             np.zeros(2))
    h = np.array(res.info["history"])
    assert np.all(np.diff(h) <= 1e-12)
    np.testing.assert_allclose(res.minimizer, np.linalg.solve(A + 0.5 * np.eye(2), b), atol=1e-7)


def test_settings_validation():
    with pytest.raises(ConfigurationError):
        SolverSettings("fixed")
    with pytest.raises(ConfigurationError):
        SolverSettings(tolerance=-1.0)


def test_solve_erm_finite_family_exhaustive():
    table = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.2, 0.2, 0.2]])
    fam = FiniteFamily.from_table(table, g0_index=2)
    data = Dataset(np.array([0.0, 0.0, 1.0, 2.0]), "scalar")
    res = solve_erm(fam, Penalty.zero(), data, PopulationOracle.discrete([0, 1, 2], [1 / 3] * 3))
    emp = table[:, [0, 0, 1, 2]].mean(axis=1)
    assert res.info["index"] == int(np.argmin(emp))


def test_solve_erm_linear_projection():
    theta0 = np.zeros(2)
    fam = gaussian_location_family(theta0, Ball(1.0))
    X = np.tile([3.0, 4.0], (5, 1))
    res = solve_erm(fam, Penalty.zero(), Dataset(X, "vector"))
    np.testing.assert_allclose(res.minimizer, [0.6, 0.8], atol=1e-8)


def test_nonconvex_parametric_family_rejected():
    fam = ParametricFamily(lambda th, x: np.cos(th[0] * x), 1, g0=np.zeros(1), convex_objective=False)
    with pytest.raises(UnsupportedScenarioError):
        solve_erm(fam, Penalty.zero(), Dataset(np.ones(3), "scalar"),
                  PopulationOracle.discrete([1.0], [1.0]))
