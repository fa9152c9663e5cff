"""Property-based checks of the core invariants."""

import math

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ermconc import Ball, Box, Ellipsoid, Penalty, Simplex, prox, solve_regularized_ls
from ermconc.acceptance import gaussian_location_family
from ermconc.margin import MarginFunction, klein_rio_interval, margin_helper_check
from ermconc.riskcurve import InnerMaximizer, concavity_check, shifted_ordering_check
from ermconc.scenarios import rate_fit
from ermconc.sets import project_simplex

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vec4 = arrays(np.float64, 4, elements=finite)

DOMAINS = [Box(-np.ones(4), np.ones(4)), Ball(1.5), Ball(1.0, norm="l1"), Simplex(4),
           Ellipsoid(np.array([1.0, 2.0, 5.0, 10.0]), 1.0)]
PENALTIES = [Penalty.zero(), Penalty.squared(0.7), Penalty.power(0.9, 1.3, np.array([1.0, 2.0, 3.0, 4.0])),
             Penalty.indicator(Box(-np.ones(4), np.ones(4)))]


@given(vec4, vec4, st.sampled_from(range(len(DOMAINS))))
@settings(max_examples=200, deadline=None)
def test_projection_idempotent_and_nonexpansive(x, y, k):
    D = DOMAINS[k]
    px, py = D.project(x), D.project(y)
    assert D.contains(px, 1e-7)
    np.testing.assert_allclose(D.project(px), px, atol=1e-7)
    assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-7


@given(vec4, vec4, st.sampled_from(range(len(PENALTIES))), st.floats(0.01, 5.0))
@settings(max_examples=200, deadline=None)
def test_prox_nonexpansive(x, y, k, step):
    pen = PENALTIES[k]
    assert np.linalg.norm(prox(pen, x, step) - prox(pen, y, step)) <= np.linalg.norm(x - y) + 1e-7


@given(arrays(np.float64, 6, elements=finite), st.floats(0.0, 5.0))
@settings(max_examples=100, deadline=None)
def test_ridge_solution_closed_form(Y, lam):
    res = solve_regularized_ls(Y, Penalty.ridge_n(lam, 6))
    np.testing.assert_allclose(res.minimizer, Y / (1 + lam), atol=1e-7)


@given(arrays(np.float64, 5, elements=finite), st.floats(0.1, 10.0))
@settings(max_examples=100, deadline=None)
def test_simplex_projection_sums(x, total):
    p = project_simplex(x, total)
    assert abs(p.sum() - total) < 1e-9 and np.all(p >= -1e-12)


@given(st.floats(0.0, 20.0), st.floats(0.0, 20.0), st.floats(0.05, 3.0))
def test_fenchel_young_quadratic(u, v, c):
    G = MarginFunction.quadratic(c)
    assert G(u) + G.conjugate(v) >= u * v - 1e-9 * (1 + u * v)


@given(st.floats(0.0, 10.0), st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_shifted_ordering_always_holds(t2, a, b):
    holds, _, _ = shifted_ordering_check(math.sqrt(t2 + a), math.sqrt(t2 + b), t2)
    assert bool(np.all(holds))


@given(st.floats(-1.0, -0.01), st.floats(0.1, 10.0))
def test_rate_fit_recovers_exponent(b, c):
    n = np.array([100, 300, 1000, 3000, 10000])
    assert abs(rate_fit(n, c * n**b).slope - b) < 1e-10


@given(st.floats(0.01, 5.0), st.floats(0.0, 2.0), st.floats(0.0, 3.0), st.floats(0.1, 5.0),
       st.integers(1, 10_000))
def test_klein_rio_interval_contains_mean_and_widens(K, sigma2, E, t, n):
    lo, hi = klein_rio_interval(K, sigma2, E, t, n)
    lo2, hi2 = klein_rio_interval(K, sigma2, E, 2 * t, n)
    assert lo <= E <= hi and lo2 <= lo and hi2 >= hi


@given(st.floats(0.01, 10.0), st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.1, 3.0))
def test_margin_helper_hypothesis_implies_conclusion(a, b, c, cc):
    hyp, concl = margin_helper_check(MarginFunction.quadratic(cc), a, b, c)
    assert concl or not hyp


@given(st.integers(0, 10_000), st.floats(0.0, 2.0))
@settings(max_examples=50, deadline=None)
def test_quadratic_mode_curves_are_concave(seed, lam):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 5))
    fam = gaussian_location_family(rng.standard_normal(d))
    inner = InnerMaximizer(fam, Penalty.squared(lam, rng.uniform(0.2, 2.0, d)))
    s = math.sqrt(inner.tau_min2) + np.linspace(0.0, 2.0, 33)
    vals, _ = inner.curve(rng.standard_normal(d), s)
    assert concavity_check(s, vals, tol=1e-9).passed
    assert np.all(np.diff(vals) >= -1e-12)
