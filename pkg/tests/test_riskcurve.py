import math

import numpy as np
import pytest

from ermconc import (Ball, ConfigurationError, Dataset, DomainViolationError, Ellipsoid, FiniteFamily,
                     LinearFamily, Penalty, PopulationOracle, UnsupportedScenarioError, Whole)
from ermconc.acceptance import gaussian_location_family, random_finite_instance
from ermconc.riskcurve import (InnerMaximizer, RiskCurve, SGrid, argmin_curve, concavity_check, empirical_curve,
                               hat_E, kappa_gamma, shifted_ordering_check, verify_minimum_lemma)


def _data(theta0, n, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(theta0 + rng.standard_normal((n, theta0.size)), "vector")


def test_unconstrained_curve_is_linear_in_s():
    theta0 = np.array([0.2, -0.1, 0.4])
    fam = gaussian_location_family(theta0)
    data = _data(theta0, 40)
    v = fam.process_vector(data)
    for s in (0.1, 0.5, 2.0):
        assert hat_E(fam, Penalty.zero(), data, None, s) == pytest.approx(s * np.linalg.norm(v), rel=1e-12)


def test_quadratic_mode_matches_lagrange_path():
    theta0 = np.array([0.5, -0.3])
    fam = gaussian_location_family(theta0)
    pen = Penalty.squared(0.7, np.array([1.0, 2.0]))
    inner = InnerMaximizer(fam, pen)
    assert inner.mode == "quadratic"
    rng = np.random.default_rng(3)
    V = rng.standard_normal((6, 2))
    S = math.sqrt(inner.tau_min2) + np.linspace(0.01, 1.0, 6)
    a, _ = inner.values(V, S)
    inner.mode = "lagrange"
    b, _ = inner.values(V, S)
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_ellipsoid_dual_matches_lagrange_path():
    d = 6
    fam = gaussian_location_family(np.zeros(d), Ellipsoid(np.arange(1.0, d + 1) ** 2, 0.8))
    inner = InnerMaximizer(fam, Penalty.zero())
    assert inner.mode == "ellipsoid"
    rng = np.random.default_rng(4)
    V = rng.standard_normal((5, d))
    S = np.array([0.05, 0.2, 0.5, 1.0, 3.0])
    a, _ = inner.values(V, S)
    inner.mode = "lagrange"
    b, _ = inner.values(V, S)
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_power_mode_matches_lagrange_path():
    d = 8
    fam = gaussian_location_family(np.zeros(d))
    pen = Penalty.power(0.4, 1.5, np.arange(1.0, d + 1))
    inner = InnerMaximizer(fam, pen)
    assert inner.mode == "power"
    V = np.random.default_rng(5).standard_normal((4, d))
    S = np.array([0.1, 0.4, 1.0, 2.5])
    a, _ = inner.values(V, S)
    inner.mode = "lagrange"
    b, _ = inner.values(V, S)
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_radius_below_tau_min_raises():
    theta0 = np.array([1.0, 1.0])
    fam = gaussian_location_family(theta0)
    pen = Penalty.squared(1.0)
    with pytest.raises(DomainViolationError):
        hat_E(fam, pen, _data(theta0, 10), None, 0.5)


def test_minimum_lemma_finite_exact():
    for i in range(10):
        fam, pen, oracle, data = random_finite_instance(np.random.default_rng(i), 30)
        res = verify_minimum_lemma(fam, pen, data, oracle)
        assert res.gap == 0.0


def test_minimum_lemma_ball():
    theta0 = np.array([0.3, 0.1])
    fam = gaussian_location_family(theta0, Ball(0.6))
    res = verify_minimum_lemma(fam, Penalty.zero(), _data(theta0, 20, 9), None,
                               SGrid(1e-3, 1.5, "uniform", step=1e-3))
    assert res.gap <= 1e-3 + 1e-6


def test_argmin_ties_prefer_smallest():
    s = np.array([0.0, 1.0, 2.0])
    res = argmin_curve(s, np.array([0.0, 0.0, 4.0]))  # objective s^2 - E = (0, 1, 0)
    assert res.s == 0.0 and res.ties == [0.0, 2.0]


def test_concavity_check_detects_convex_kink():
    s = np.linspace(0, 1, 11)
    assert concavity_check(s, np.minimum(s, 0.5)).passed
    bad = concavity_check(s, np.maximum(s, 0.5))
    assert not bad.passed and bad.counterexample is not None


def test_shifted_ordering_examples():
    holds, lhs, rhs = shifted_ordering_check(np.array([1.0, 2.0]), 1.5, 0.5)
    assert holds.all() and np.all(lhs >= rhs)
    with pytest.raises(DomainViolationError):
        shifted_ordering_check(0.1, 1.0, 0.5)


def test_kappa_gamma_pure_case():
    fam = gaussian_location_family(np.zeros(3))
    kappa, gamma = kappa_gamma(fam, Penalty.zero(), None, 0.0, np.linspace(0.1, 1.0, 10))
    assert gamma == pytest.approx(1.0)
    _, gamma = kappa_gamma(fam, Penalty.squared(1.0), None, 0.0, np.linspace(0.1, 1.0, 10))
    assert gamma == pytest.approx(1 / math.sqrt(2.0))
    with pytest.raises(UnsupportedScenarioError):
        kappa_gamma(fam, Penalty.power(1.0, 1.5), None, 0.0, [0.5])


def test_curve_csv_schema_and_grid_checks():
    fam = gaussian_location_family(np.zeros(2))
    curve = empirical_curve(fam, Penalty.zero(), _data(np.zeros(2), 5), None, SGrid(0.1, 0.3, "uniform", step=0.1))
    lines = curve.to_csv().splitlines()
    assert lines[0] == "s,value,se,flag" and len(lines) == 4
    with pytest.raises(ConfigurationError):
        SGrid(1.0, 0.5)
    with pytest.raises(DomainViolationError):
        SGrid(0.1, 1.0, tau_min=0.5)
