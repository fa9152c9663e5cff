import math

import numpy as np
import pytest

from ermconc import ConfigurationError, Dataset, DomainViolationError, Penalty
from ermconc.expfam import (BERNOULLI, GAUSSIAN, POISSON, BaseMeasure, ExpFamily, fit_density_mle,
                            fit_expfam_regression, log_partition, regression_curvature_constant,
                            small_norm_expansion, taylor_ratio, two_point_family)


def test_two_point_log_partition_is_log_cosh():
    fam = two_point_family()
    for a in (0.1, 1.0, 1.9):
        assert fam.log_partition(np.array([a])) == pytest.approx(math.log(math.cosh(a)), abs=1e-14)


def test_taylor_ratio_series_oracle():
    tab = taylor_ratio(two_point_family(), np.array([1.0]), [0.01])
    assert tab.ratio[0] == pytest.approx(0.5 - 1e-4 / 12 + 1e-8 / 45, abs=1e-12)


def test_taylor_table_stability_on_quadrature_family():
    base = BaseMeasure.interval(lambda x: np.ones_like(x), 0.0, 1.0, nodes=32, normalize=True)
    tab = taylor_ratio(base, lambda x: x**2 - 1 / 3, 10.0 ** -np.arange(1.0, 4.5, 0.5))
    assert tab.stable()
    with pytest.raises(DomainViolationError):
        taylor_ratio(base, lambda x: x, [0.0])


def test_quadrature_refinement_is_converged():
    dens = lambda x: np.exp(-x**2 / 2) / math.sqrt(2 * math.pi)
    a = BaseMeasure.interval(dens, -4.0, 4.0, nodes=64)
    b = BaseMeasure.interval(dens, -4.0, 4.0, nodes=512)
    g = lambda x: np.sin(x)
    assert log_partition(a, g) == pytest.approx(log_partition(b, g), abs=1e-12)


def test_small_norm_expansion_rate():
    base = BaseMeasure.finite([0.0, 1.0, 2.0], [0.2, 0.5, 0.3])
    g = lambda x: x - 1.1
    tab = small_norm_expansion(base, g, [1e-1, 1e-2, 1e-3])
    assert tab.slope() == pytest.approx(1.0, abs=0.05)


def test_density_mle_two_point():
    x = np.array([1.0, 1.0, 1.0, -1.0])
    res = fit_density_mle(two_point_family(), Dataset(x, "scalar"), Penalty.zero())
    assert res.minimizer[0] == pytest.approx(math.atanh(0.5), abs=1e-7)


def test_regression_closed_forms():
    Y = np.array([0.3, -1.0, 2.0])
    res = fit_expfam_regression(None, Y, GAUSSIAN)
    np.testing.assert_allclose(res.minimizer, Y, atol=1e-7)
    res = fit_expfam_regression(None, np.ones(4), POISSON)
    np.testing.assert_allclose(res.minimizer, 0.0, atol=1e-7)
    res = fit_expfam_regression(None, np.array([0.25, 0.75]), BERNOULLI)
    np.testing.assert_allclose(res.minimizer, [math.log(1 / 3), math.log(3)], atol=1e-6)
    with pytest.raises(ConfigurationError):
        fit_expfam_regression(np.zeros(2), Y, GAUSSIAN)


def test_gaussian_curvature_constant_is_half():
    g = np.array([0.5, -0.2])
    assert regression_curvature_constant(GAUSSIAN, g, np.zeros(2)) == pytest.approx(0.5)
    with pytest.raises(DomainViolationError):
        regression_curvature_constant(GAUSSIAN, g, g)


def test_centering():
    base = BaseMeasure.finite([0.0, 1.0], [0.25, 0.75])
    fam = ExpFamily(base, lambda x: np.asarray(x)[:, None], 1)
    assert abs(fam.centering_residual(np.array([2.0]))) < 1e-14
