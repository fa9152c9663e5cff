import numpy as np
import pytest

from ermconc import (Box, ConfigurationError, Dataset, FiniteFamily, LinearFamily, Penalty, PopulationOracle,
                     excess_risk, tau_min)
from ermconc.acceptance import gaussian_location_family


def test_penalty_values():
    g = np.array([1.0, 2.0, 2.0, 0.0])
    assert Penalty.zero()(g) == 0.0
    assert Penalty.ridge_n(0.5, 4)(g) == pytest.approx(0.5 * np.mean(g**2), abs=1e-15)
    assert Penalty.squared(2.0)(g) == pytest.approx(4.0 * 9.0)
    assert Penalty.power(2.0, 1.5)(g) == pytest.approx(4.0 * 3.0**1.5)
    box = Penalty.indicator(Box(np.zeros(4), np.ones(4)))
    assert box(np.full(4, 0.5)) == 0.0
    assert np.isinf(box(g))


def test_penalty_validation():
    with pytest.raises(ConfigurationError):
        Penalty("cubic")
    with pytest.raises(ConfigurationError):
        Penalty.power(1.0, 2.5)
    with pytest.raises(ConfigurationError):
        Penalty.squared(-1.0)
    with pytest.raises(ConfigurationError):
        Penalty("indicator")


def test_pure_linear_family_excess():
    theta0 = np.array([0.3, -0.4])
    fam = gaussian_location_family(theta0)
    assert fam.is_pure
    th = np.array([1.0, 1.0])
    assert fam.population_excess(th) == pytest.approx(np.sum((th - theta0) ** 2))
    oracle = PopulationOracle.closed_form()
    assert excess_risk(fam, th, Penalty.squared(0.5), oracle) == pytest.approx(
        np.sum((th - theta0) ** 2) + 0.25 * np.sum(th**2))


def test_tau_min_ridge_closed_form():
    theta0 = np.array([1.0, 0.0])
    fam = gaussian_location_family(theta0)
    lam = 1.0
    t2, g = tau_min(fam, Penalty.squared(lam), PopulationOracle.closed_form())
    # min ||t - t0||^2 + lam^2 ||t||^2 at t = t0 / (1 + lam^2)
    assert t2 == pytest.approx(0.5, abs=1e-8)
    np.testing.assert_allclose(g, [0.5, 0.0], atol=1e-6)


def test_finite_family_table_and_oracle():
    table = np.array([[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]])
    fam = FiniteFamily.from_table(table, g0_index=2)
    oracle = PopulationOracle.discrete([0, 1], [0.5, 0.5])
    assert oracle.risk(fam, fam.params[0]) == pytest.approx(0.5)
    assert oracle.variance(fam, fam.params[0]) == pytest.approx(0.25)
    t2, _ = tau_min(fam, Penalty.zero(), oracle)
    assert t2 == 0.0
    with pytest.raises(ConfigurationError):
        PopulationOracle.discrete([0, 1], [0.5, 0.6])


def test_dataset_pairs():
    ds = Dataset((np.ones((3, 2)), np.arange(3.0)), "pair")
    assert ds.n == 3
    np.testing.assert_allclose(ds.responses, [0.0, 1.0, 2.0])


def test_linear_family_dimension_check():
    with pytest.raises(ConfigurationError):
        LinearFamily(lambda x: x, np.zeros(2), np.eye(3), np.eye(2), np.zeros(2))
