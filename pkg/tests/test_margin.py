import math

import numpy as np
import pytest

from ermconc import ConditionViolationError, DomainViolationError
from ermconc.margin import (Complexity, MarginFunction, approx_concave_gap, check_margin, curvature_interval,
                            default_c0, delta_bound, delta_bound_shifted, envelope_interval, fenchel_conjugate,
                            klein_rio_interval, margin_helper_check, phi_and_r0, quadratic_margin_constant)


def test_quadratic_conjugate_closed_form():
    G = MarginFunction.quadratic(1.0)
    assert G.conjugate(2.0) == pytest.approx(2.0)
    num = fenchel_conjugate(lambda u: u**2 / 2, 2.0)
    assert num == pytest.approx(2.0, abs=1e-12)


def test_r0_for_linear_complexity():
    for n in (4, 100, 2500):
        _, r0, Phi_star = phi_and_r0(Complexity.power(1.0, 1.0), math.sqrt(n), 1.0, 1.0)
        assert r0**2 == pytest.approx(8.0 / n, abs=1e-12)
        assert Phi_star(2.0) == pytest.approx(1.0)


def test_nonstrictly_convex_phi_rejected():
    # J(s) = s^2 gives Phi(u) = u, which is not strictly convex
    with pytest.raises(ConditionViolationError):
        phi_and_r0(Complexity.power(1.0, 2.0), 10.0, 1.0, 1.0)


def test_quadratic_margin_constant_values():
    assert quadratic_margin_constant(2.0, 5.0) == 1.0
    expected = math.sqrt(2 * 0.5 / 1.5 * 2.0 ** (-2 * 0.5 / 1.5))
    assert quadratic_margin_constant(1.5, 1.0) == pytest.approx(expected, abs=1e-15)
    assert quadratic_margin_constant(1.5, 1.0) == pytest.approx(0.648054, abs=1e-6)
    with pytest.raises(DomainViolationError):
        quadratic_margin_constant(1.0, 1.0)


def test_approx_concave_gap():
    gap, ok = approx_concave_gap(0.01, 1.0, 1.0)
    assert gap == pytest.approx(2 * math.sqrt(0.1 * 1.2))
    assert ok
    assert not approx_concave_gap(0.25, 1.0, 1.0)[1]


def test_klein_rio_interval_formula():
    lo, hi = klein_rio_interval(1.0, 0.25, 0.1, 2.0, 100)
    dev = math.sqrt(8 * 0.1 + 0.5) * math.sqrt(0.02)
    assert lo == pytest.approx(0.1 - dev - 0.02)
    assert hi == pytest.approx(0.1 + dev + 2 * 0.02 / 3)


def test_curvature_interval_variants():
    lit = curvature_interval(1.0, 0.5, 0.2, 1.0, 0.05, 1.0, 400)
    coh = curvature_interval(1.0, 0.5, 0.2, 1.0, 0.05, 1.0, 400, coherent=True)
    assert coh[0] < lit[0] and coh[1] == lit[1]
    with pytest.raises(ConditionViolationError):
        curvature_interval(1.0, 0.01, 0.0, 1.0, 1.0, 1.0, 400)


def test_envelope_interval_variants():
    lo, hi = envelope_interval(1.0, 1.0, 0.1, 0.2, 1.0, 100)
    lo_v, hi_v = envelope_interval(1.0, 1.0, 0.1, 0.2, 1.0, 100, verbatim=True)
    assert lo == lo_v and lo < 0.2 < hi and hi_v < hi
    with pytest.raises(DomainViolationError):
        envelope_interval(0.5, 1.0, 0.1, 0.2, 1.0, 100)


def test_delta_bound_monotone_and_shift_reduction():
    G = MarginFunction.quadratic(1.0)
    d = [delta_bound(t, 500, 1.0, 0.2, 0.1, G, 1.0, 1.0) for t in (0.5, 1.0, 2.0, 4.0)]
    assert np.all(np.diff(d) > 0)
    assert delta_bound_shifted(1.0, 500, 1.0, 0.0, 0.2, 0.1, G, 1.0, 1.0, 1.0) == d[1]
    with pytest.raises(ConditionViolationError):
        delta_bound_shifted(1.0, 500, 1.0, 0.0, 0.2, 0.1, G, 1.0, 1.0, math.inf)
    assert default_c0(1.0, 1.0) == 12.0


def test_tabulated_margin_matches_quadratic():
    u = np.linspace(0, 10, 2001)
    Gt = MarginFunction.tabulated(u, u**2 / 2)
    Gq = MarginFunction.quadratic(1.0)
    a = delta_bound(1.0, 200, 1.0, 0.2, 0.1, Gt, 1.0, 1.0)
    b = delta_bound(1.0, 200, 1.0, 0.2, 0.1, Gq, 1.0, 1.0)
    assert a == pytest.approx(b, rel=1e-4)


def test_check_margin_pass_and_fail():
    s = np.linspace(0, 2, 41)
    s0 = 0.5
    E = s  # s^2 - s has minimum at 0.5 and curvature exactly (s - s0)^2
    G = MarginFunction.quadratic(1 / math.sqrt(2))
    assert check_margin(s, s0, G, values=E).passed
    cert = check_margin(s, s0, MarginFunction.quadratic(0.5), values=E)
    assert not cert.passed and cert.counterexample is not None


def test_margin_helper():
    G = MarginFunction.quadratic(1.0)
    assert margin_helper_check(G, 3.0, 0.5, 0.1) == (True, True)
    hyp, _ = margin_helper_check(G, 0.1, 1.0, 0.1)
    assert not hyp
