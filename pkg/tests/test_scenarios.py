import math

import numpy as np
import pytest

from ermconc import ConfigurationError, Dataset, DomainViolationError, Penalty, PopulationOracle, solve_erm
from ermconc.scenarios import (ScenarioSpec, certify_envelope, linearized_family, rate_fit, run_linearized_ls,
                               run_projection_case, sample_linear_model, trig_features, trig_means)


def test_rate_fit_exact_power_law():
    n = np.array([250, 500, 1000, 2000, 4000, 8000])
    fit = rate_fit(n, n ** -0.25)
    assert fit.slope == pytest.approx(-0.25, abs=1e-12)
    assert fit.ci_low <= fit.slope <= fit.ci_high


def test_rate_fit_preconditions():
    with pytest.raises(DomainViolationError):
        rate_fit([100, 200, 400, 800], [1, 1, 1, 1])  # 0.9 decades
    with pytest.raises(DomainViolationError):
        rate_fit([100, 1000, 10000], [1, 1, 1])


def test_spec_validation_and_targets():
    with pytest.raises(ConfigurationError):
        ScenarioSpec("projection-case1", n_list=(100, 100, 200))
    with pytest.raises(ConfigurationError):
        ScenarioSpec("projection-case1", alpha=1.5)
    with pytest.raises(ConfigurationError):
        ScenarioSpec("projection-case3", q=2.5)
    with pytest.raises(ConfigurationError):
        ScenarioSpec("projection-case9")
    assert ScenarioSpec("projection-case1", alpha=1.0).target_slope() == -0.25
    assert ScenarioSpec("projection-case2", alpha=0.5).target_slope() == pytest.approx(-1 / 3)
    assert ScenarioSpec("projection-case3", q=1.5, alpha=0.5).target_slope() == pytest.approx(-0.36)


def test_trig_basis_is_orthonormal():
    K = 5
    x = (np.arange(4096) + 0.5) / 4096
    F = trig_features(x, K)
    np.testing.assert_allclose(F.T @ F / x.size, np.eye(2 * K), atol=1e-12)
    np.testing.assert_allclose(trig_means(x[:300], K, chunk=64), F[:300].mean(axis=0), atol=1e-12)


def test_single_frequency_sieve_matches_direct_computation():
    spec = ScenarioSpec("projection-case1", n_list=(60,), replicates=4, basis_size=1, radius=100.0, seed=7)
    res = run_projection_case(spec)
    r = res.per_n[0]
    for i in range(4):
        rng = np.random.Generator(np.random.PCG64([7, 60, i]))
        x = rng.random(60)
        assert r.tau_hat[i] == pytest.approx(np.linalg.norm(trig_means(x, 1)), rel=1e-10)
    assert r.lemma_gap < 1e-6


def test_case1_deviation_shrinks_and_lemma_holds():
    spec = ScenarioSpec("projection-case1", n_list=(250, 500, 1000, 2000), replicates=60, alpha=1.0)
    res = run_projection_case(spec)
    assert res.deviation_decreasing()
    assert max(r.lemma_gap for r in res.per_n) < 1e-6
    assert res.rate is None  # fewer than 1.5 decades


def test_case2_rate():
    spec = ScenarioSpec("projection-case2", replicates=100, alpha=0.5)
    res = run_projection_case(spec)
    assert res.rate.relative_error <= 0.15


def test_case2_boundary_regime():
    alpha, a, k0 = 0.5, 0.5, 20
    spec = ScenarioSpec("projection-case2", n_list=(4000, 8000), replicates=100, alpha=alpha,
                        theta0_amplitude=a, theta0_frequency=k0)
    for n in spec.n_list:
        I2 = a**2 * k0 ** (1 / alpha)
        assert I2 * n * spec.lam(n) ** (2 * (1 + alpha)) >= 100 - 1e-9
    res = run_projection_case(spec)
    for r in res.per_n:
        assert r.tau_min > 0
        assert r.boundary_fraction > 0.9


@pytest.mark.slow
def test_case3_rate():
    spec = ScenarioSpec("projection-case3", q=1.5, alpha=0.5, replicates=100)
    res = run_projection_case(spec)
    assert res.rate.relative_error <= 0.15
    assert max(r.lemma_gap for r in res.per_n) < 1e-5


def test_worker_count_does_not_change_results():
    spec = ScenarioSpec("projection-case2", n_list=(100, 200), replicates=10)
    a = run_projection_case(spec, workers=1)
    b = run_projection_case(spec, workers=2)
    for ra, rb in zip(a.per_n, b.per_n):
        np.testing.assert_array_equal(ra.s_hat, rb.s_hat)
        assert ra.s0 == rb.s0


def test_linearized_closed_form():
    b0 = np.array([0.3, -0.2, 0.0, 0.1, 0.0])
    fam = linearized_family(5, b0, 1.0)
    X, Y = sample_linear_model(np.random.default_rng(0), 300, b0, 1.0)
    res = solve_erm(fam, Penalty.zero(), Dataset((X, Y), "pair"), PopulationOracle.closed_form())
    np.testing.assert_allclose(res.minimizer, X.T @ Y / 300, atol=1e-10)


def test_linearized_correlated_design_closed_form():
    S = np.array([[1.0, 0.5], [0.5, 2.0]])
    b0 = np.array([0.2, 0.1])
    fam = linearized_family(2, b0, 0.5, Sigma0=S)
    from ermconc.scenarios import design_factor
    X, Y = sample_linear_model(np.random.default_rng(1), 200, b0, 0.5, design_factor(S))
    res = solve_erm(fam, Penalty.zero(), Dataset((X, Y), "pair"), PopulationOracle.closed_form())
    np.testing.assert_allclose(res.minimizer, np.linalg.solve(S, X.T @ Y / 200), atol=1e-10)


def test_linearized_noiseless_convergence():
    spec = ScenarioSpec("linearized-ls", n_list=(100, 1000, 10_000), replicates=3, sigma=0.0, p=5)
    res = run_linearized_ls(spec)
    b = np.asarray(res.beta_hat_first[-1])
    assert np.max(np.abs(b - np.array([0.3, -0.2, 0, 0, 0]))) <= 1e-2
    assert res.tau_hat_median[-1] < res.tau_hat_median[0]


def test_linearized_l1_ball_and_envelope():
    spec = ScenarioSpec("linearized-ls", n_list=(100, 1000), replicates=3, l1_radius=1.0)
    res = run_linearized_ls(spec)
    assert res.holder_ok and res.envelope_check
    assert res.c_F >= 1 and res.C_F >= 1


def test_linearized_rejects_indefinite_covariance():
    spec = ScenarioSpec("linearized-ls", n_list=(50,), p=2, sigma0=((1.0, 2.0), (2.0, 1.0)))
    with pytest.raises(ConfigurationError):
        run_linearized_ls(spec)


def test_envelope_certificate_scales_with_noise():
    c1, C1, ok1 = certify_envelope(1.0, 0.5, 1.0, draws=100_000)
    c2, C2, ok2 = certify_envelope(1.0, 0.5, 2.0, draws=100_000)
    assert ok1 and ok2 and c2 > c1 and C2 > C1
