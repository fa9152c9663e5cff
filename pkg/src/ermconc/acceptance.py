"""The acceptance suite, shared by ``ermconc accept`` and the test-suite.

Each ``criterion_k`` returns a :class:`CriterionResult` whose ``details``
and artifacts are deterministic functions of the seed (run times are kept
out of the written files).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, FiniteFamily, LinearFamily, Penalty, PopulationOracle
from .expfam import BaseMeasure, ExpFamily, taylor_ratio, two_point_family
from .gaussian import DEFAULT_T_GRID, NormalSequenceSpec, lipschitz_check, tail_report
from .io import Artifact, csv_table, dumps_json
from .margin import (
    Complexity,
    MarginFunction,
    check_margin,
    delta_bound,
    delta_bound_shifted,
    fenchel_conjugate,
    klein_rio_interval,
    phi_and_r0,
    quadratic_margin_constant,
)
from .numerics import golden_min
from .riskcurve import (
    CurveSampling,
    InnerMaximizer,
    SGrid,
    argmin_curve,
    concavity_check,
    empirical_curve,
    make_inner,
    mean_E_curve,
    shifted_curve,
    shifted_ordering_check,
    varsigma_curve,
    verify_minimum_lemma,
)
from .scenarios import ScenarioSpec, run_projection_case
from .sets import Ball, Box, Whole

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_all", "direct_penalties"]


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict
    artifacts: list = field(default_factory=list)
    runtime: float = 0.0

    def line(self):
        return f"criterion {self.number:2d} {'PASS' if self.passed else 'FAIL'}  {self.title}"

    def summary_artifact(self):
        body = {"criterion": self.number, "title": self.title, "passed": self.passed,
                "details": self.details}
        return Artifact(f"criterion{self.number:02d}.json", dumps_json(body), f"criterion-{self.number}")


def _rng(seed, *keys):
    return np.random.Generator(np.random.PCG64([seed, *keys]))


def _sine_signal(n):
    return np.sin(2.0 * np.pi * np.arange(1, n + 1) / n)


def direct_penalties(n):
    """The four penalties of the direct concentration check."""
    return {
        "zero": Penalty.zero(),
        "ridge-0.1": Penalty.ridge_n(0.1, n),
        "ridge-1": Penalty.ridge_n(1.0, n),
        "box": Penalty.indicator(Box(np.full(n, -0.5), np.full(n, 0.5))),
    }


# --------------------------------------------------------------------------
# 1-2: normal sequence model
# --------------------------------------------------------------------------


def criterion_1(seed=0, replicates=100_000, n=200):
    start = time.perf_counter()
    arts, per = [], {}
    flagged = 0
    for name, pen in direct_penalties(n).items():
        spec = NormalSequenceSpec(n, 1.0, _sine_signal(n), pen, replicates, seed)
        rep = tail_report(spec, DEFAULT_T_GRID)
        flagged += len(rep.flagged)
        per[name] = {"m0": rep.m0, "m0_se": rep.m0_se, "flagged_t": [r.t for r in rep.flagged],
                     "max_excess": max(r.freq - r.bound for r in rep.rows)}
        arts.append(Artifact(f"direct-{name}.csv", rep.to_csv(), "normal-sequence"))
    runtime = time.perf_counter() - start
    passed = flagged == 0 and runtime <= 120.0
    return CriterionResult(1, "tail dominance in the normal sequence model", passed,
                           {"penalties": per, "flagged_rows": flagged, "runtime_limit_s": 120},
                           arts, runtime)


def criterion_2(seed=0, pairs=1000, n=200):
    per = {}
    ok = True
    for name, pen in direct_penalties(n).items():
        spec = NormalSequenceSpec(n, 1.0, _sine_signal(n), pen, 2, seed)
        mx, ratios, bad = lipschitz_check(spec, pairs)
        per[name] = {"max_ratio": mx, "min_ratio": float(ratios.min()), "quarantined": bad}
        ok &= mx <= 1.0 + 1e-6 and bad == 0
        if name == "ridge-1":
            ok &= bool(np.all(np.abs(ratios - 0.5) <= 1e-9))
    return CriterionResult(2, "nonexpansiveness of the penalized projection", bool(ok), per)


# --------------------------------------------------------------------------
# 3-5: risk curves
# --------------------------------------------------------------------------


def random_finite_instance(rng, n, support=8):
    """Random finite family on a discrete sample space with a squared penalty."""
    m = int(rng.integers(5, 21))
    probs = rng.dirichlet(np.ones(support))
    table = rng.uniform(-1.0, 1.0, size=(m, support))
    params = rng.standard_normal((m, 2))
    g0 = int(np.argmin(table @ probs))
    fam = FiniteFamily.from_table(table, params, g0_index=g0)
    oracle = PopulationOracle.discrete(np.arange(support), probs)
    data = Dataset(rng.choice(support, size=n, p=probs).astype(float), "scalar")
    return fam, Penalty.squared(0.3), oracle, data


def gaussian_location_family(theta0, domain=None):
    """``X ~ N(theta0, I)``, ``f_theta(x) = -2 x.theta + ||theta||^2`` (excess ``||theta - theta0||^2``)."""
    theta0 = np.asarray(theta0, dtype=float)
    d = theta0.size
    return LinearFamily(lambda x: -2.0 * np.atleast_2d(x), -2.0 * theta0, 2.0 * np.eye(d),
                        4.0 * np.eye(d), theta0, domain=domain)


def criterion_3(seed=0):
    finite_gaps = []
    for i in range(100):
        rng = _rng(seed, 3, 0, i)
        fam, pen, oracle, data = random_finite_instance(rng, (20, 100)[i % 2])
        finite_gaps.append(verify_minimum_lemma(fam, pen, data, oracle).gap)
    ball_gaps = []
    for i in range(20):
        rng = _rng(seed, 3, 1, i)
        d = int(rng.integers(2, 6))
        R = float(rng.uniform(0.5, 1.5))
        theta0 = rng.standard_normal(d)
        theta0 *= rng.uniform(0.0, 0.9) * R / np.linalg.norm(theta0)
        fam = gaussian_location_family(theta0, Ball(R, center=np.zeros(d)))
        n = (20, 100)[i % 2]
        data = Dataset(theta0 + rng.standard_normal((n, d)), "vector")
        grid = SGrid(1e-3, 2.0 * R, "uniform", step=1e-3)
        res = verify_minimum_lemma(fam, Penalty.zero(), data, None, grid)
        ball_gaps.append(res.gap)
    ok = max(finite_gaps) == 0.0 and max(ball_gaps) <= 1e-3 + 1e-6
    return CriterionResult(3, "ERM excess risk equals the empirical argmin", bool(ok),
                           {"finite_max_gap": max(finite_gaps), "ball_max_gap": max(ball_gaps)})


def _linear_instance(rng, i):
    d = int(rng.integers(2, 7))
    n = int(rng.integers(20, 200))
    theta0 = rng.standard_normal(d) * 0.5
    if i % 5 == 4:
        # scalar covariance with a ball constraint (Lagrangian path)
        cov = 4.0 * np.eye(d)
        domain = Ball(float(np.linalg.norm(theta0)) + 1.0, center=np.zeros(d))
        pen = Penalty.squared(float(rng.uniform(0.1, 1.0)))
    else:
        L = rng.standard_normal((d, d))
        cov = L @ L.T + 0.1 * np.eye(d)
        domain = None
        pen = Penalty.squared(float(rng.uniform(0.0, 1.0)), rng.uniform(0.5, 2.0, d))
    fam = LinearFamily(lambda x: np.atleast_2d(x), -2.0 * theta0, 2.0 * np.eye(d), cov, theta0,
                       domain=domain)
    X = rng.multivariate_normal(-2.0 * theta0, cov, size=n)
    return fam, pen, Dataset(X, "vector")


def criterion_4(seed=0):
    worst = 0.0
    fails = 0
    for i in range(50):
        rng = _rng(seed, 4, i)
        fam, pen, data = _linear_instance(rng, i)
        c = float(rng.uniform(0.5, 2.0))
        inner = InnerMaximizer(fam, pen, "varsigma", c)
        lo = math.sqrt(max(inner.tau_min2, 0.0)) + 1e-3
        grid = SGrid(lo, lo + 2.0, "uniform", step=2.0 / 64)
        verdict = concavity_check(varsigma_curve(fam, pen, data, None, c, grid), tol=1e-8)
        worst = max(worst, verdict.violation)
        fails += not verdict.passed
    # negative control: a finite (nonconvex) class gives a step-shaped curve
    rng = _rng(seed, 4, 999)
    table = np.array([[0.0, 0.0, 0.0], [1.0, -1.0, 0.5], [-1.0, 2.0, -0.5], [2.0, -2.0, 1.5]])
    fam = FiniteFamily.from_table(table, g0_index=0)
    oracle = PopulationOracle.discrete(np.arange(3), [0.4, 0.4, 0.2])
    data = Dataset(rng.choice(3, size=50, p=[0.4, 0.4, 0.2]).astype(float), "scalar")
    grid = SGrid(0.0, 4.0, "uniform", step=1.0 / 64)
    neg = concavity_check(varsigma_curve(fam, Penalty.zero(), data, oracle, 1.0, grid), tol=1e-8)
    ok = fails == 0 and not neg.passed
    return CriterionResult(4, "midpoint concavity of the variance-constrained curve", bool(ok),
                           {"failures": fails, "max_violation": worst,
                            "negative_control_rejected": not neg.passed,
                            "negative_control_violation": neg.violation})


def criterion_5(seed=0, replicates=200):
    d, n, R = 5, 50, 0.5
    fam = gaussian_location_family(np.zeros(d), Ball(R, center=np.zeros(d)))
    pen = Penalty.zero()
    sampling = CurveSampling(lambda rng, m: rng.standard_normal((m, d)), n, replicates, seed)
    grid = SGrid(0.01, 1.0, "uniform", step=0.01)
    curve = mean_E_curve(fam, pen, sampling, grid)
    inner = make_inner(fam, pen)
    V = np.array([fam.process_vector(sampling.dataset(i)) for i in range(replicates)])

    def mean_obj(z):
        return np.array([zz * zz - inner.values(V, np.full(replicates, zz))[0].mean() for zz in z])

    k = argmin_curve(curve).index
    pts = grid.points
    x, _ = golden_min(mean_obj, np.array([pts[max(k - 1, 0)]]), np.array([pts[min(k + 1, pts.size - 1)]]),
                      iters=100, tol=1e-12)
    s0 = float(x[0])
    at_s0 = inner.values(V, np.full(replicates, s0))[0]
    G = MarginFunction.quadratic(1.0 / math.sqrt(2.0))
    cert = check_margin(curve, s0, G, s0_value=float(at_s0.mean()),
                        s0_se=float(at_s0.std(ddof=1) / math.sqrt(replicates)), n_se=3.0)
    consts = {str(M): quadratic_margin_constant(2.0, M) for M in (0.1, 1.0, 10.0)}
    ok = cert.passed and all(v == 1.0 for v in consts.values())
    art = Artifact("margin-curve.csv", curve.to_csv(), "gaussian-location")
    return CriterionResult(5, "quadratic margin of the mean risk curve", bool(ok),
                           {"s0": s0, "worst_slack": cert.worst_slack, "checked": cert.checked,
                            "constants": consts}, [art])


# --------------------------------------------------------------------------
# 6-8: conjugates, deviation intervals, exponential families
# --------------------------------------------------------------------------


def criterion_6(seed=0):
    rng = _rng(seed, 6)
    v = np.linspace(0.05, 5.0, 100)
    c = 0.7
    G = MarginFunction.quadratic(c)
    numeric_G = fenchel_conjugate(lambda u: u**2 / (2 * c**2), v, (0.0, 1e3))
    err_G = float(np.max(np.abs(numeric_G - c**2 * v**2 / 2)))
    J = Complexity.power(1.0, 0.5)
    Phi, _, Phi_star = phi_and_r0(J, 10.0, 1.0, 1.0)
    numeric_P = fenchel_conjugate(Phi, v, (0.0, 1e3))
    err_P = float(np.max(np.abs(numeric_P - Phi_star(v))))
    u = rng.uniform(0.0, 10.0, 1000)
    w = rng.uniform(0.01, 10.0, 1000)
    fy_G = int(np.count_nonzero(G(u) + G.conjugate(w) < u * w - 1e-12))
    fy_P = int(np.count_nonzero(Phi(u) + Phi_star(w) < u * w - 1e-9 * (1 + u * w)))
    r0_err = 0.0
    for n in (10, 100, 1000, 10_000):
        _, r0, _ = phi_and_r0(Complexity.power(1.0, 1.0), math.sqrt(n), 1.0, 1.0)
        r0_err = max(r0_err, abs(r0**2 - 8.0 / n))
    ok = err_G <= 1e-7 and err_P <= 1e-7 and fy_G == 0 and fy_P == 0 and r0_err <= 1e-12
    return CriterionResult(6, "conjugates, Fenchel-Young and r0", bool(ok),
                           {"quadratic_err": err_G, "power_err": err_P, "young_violations": fy_G + fy_P,
                            "r0_sq_err": r0_err})


def criterion_7(seed=0, n=500, replicates=10_000):
    rng = _rng(seed, 7, 0)
    support = 6
    probs = rng.dirichlet(np.full(support, 2.0))
    table = rng.uniform(-0.5, 0.5, size=(12, support))
    g0 = int(np.argmin(table @ probs))
    fam = FiniteFamily.from_table(table, g0_index=g0)
    oracle = PopulationOracle.discrete(np.arange(support), probs)
    inner = make_inner(fam, Penalty.zero(), oracle)
    radii = np.sort(inner.radius)
    s = float(radii[len(radii) // 2])
    feas = inner.radius <= s + 1e-12
    D = table[g0] - table  # f0 - f_k on the sample space
    centered = D - (D @ probs)[:, None]
    K = float(np.max(np.abs(centered[feas])))
    sigma2 = float(np.max((centered[feas] ** 2) @ probs))

    def draw(gen):
        counts = gen.multinomial(n, probs, size=replicates)
        proc = counts @ centered.T / n
        return np.where(feas[None, :], proc, -np.inf).max(axis=1)

    E_s = float(draw(_rng(seed, 7, 1)).mean())
    En = draw(_rng(seed, 7, 2))
    rows = []
    ok = True
    for t in (1.0, 2.0, 3.0):
        lo, hi = klein_rio_interval(K, sigma2, E_s, t, n)
        freq = float(np.mean((En < lo) | (En > hi)))
        bound = min(2 * math.exp(-t), 1.0)
        se = math.sqrt(bound * (1 - bound) / replicates)
        ok &= freq <= bound + 3 * se
        rows.append((t, lo, hi, freq, bound, se))
    art = Artifact("klein-rio.csv", csv_table(["t", "lower", "upper", "freq", "bound", "se"], rows),
                   "finite-family")
    return CriterionResult(7, "coverage of the two-sided deviation interval", bool(ok),
                           {"s": s, "E_s": E_s, "K": K, "sigma2": sigma2,
                            "freq": [r[3] for r in rows]}, [art])


def criterion_8():
    t_grid = 10.0 ** -np.arange(1.0, 4.01, 0.5)
    two = taylor_ratio(two_point_family(), np.array([1.0]), t_grid)
    base = BaseMeasure.interval(lambda x: np.ones_like(x), 0.0, 1.0, nodes=32, normalize=True)
    quad = taylor_ratio(base, lambda x: x**2 - 1.0 / 3.0, t_grid)
    t = 0.01
    series = 0.5 - t**2 / 12 + t**4 / 45
    val = float(taylor_ratio(two_point_family(), np.array([1.0]), [t]).ratio[0])
    ok = two.stable() and quad.stable() and abs(val - 0.4999917) <= 1e-6 and abs(val - series) <= 1e-6
    rows = [(tt, a, b, c_, d_) for tt, a, b, c_, d_ in zip(t_grid, two.ratio, two.kappa, quad.ratio, quad.kappa)]
    art = Artifact("taylor.csv", csv_table(["t", "ratio_two_point", "kappa_two_point", "ratio_quadrature",
                                            "kappa_quadrature"], rows), "expfam-density")
    return CriterionResult(8, "second-order expansion of the log-partition", bool(ok),
                           {"two_point_stable": two.stable(), "quadrature_stable": quad.stable(),
                            "ratio_t001": val, "series_t001": series}, [art])


# --------------------------------------------------------------------------
# 9-10: rates and the shifted curve
# --------------------------------------------------------------------------


def criterion_9(seed=0, workers=1, replicates=200):
    start = time.perf_counter()
    spec = ScenarioSpec("projection-case1", (250, 500, 1000, 2000, 4000, 8000), seed, replicates,
                        alpha=1.0)
    res = run_projection_case(spec, workers)
    runtime = time.perf_counter() - start
    rate = res.rate
    rows = [(r.n, r.K, r.s0, r.s0_se, float(np.median(r.s_hat)), float(np.median(r.tau_hat)),
             r.median_deviation, r.lemma_gap) for r in res.per_n]
    arts = [Artifact("rate-case1.csv", csv_table(["n", "K", "s0", "s0_se", "median_s_hat", "median_tau_hat",
                                                  "median_deviation", "lemma_gap"], rows),
                     "projection-case1"),
            Artifact("rate-case1.json", dumps_json(rate.to_dict()), "projection-case1")]
    ok = rate.relative_error <= 0.15 and runtime <= 600.0
    return CriterionResult(9, "rate of the concentration point (no penalty, alpha = 1)", bool(ok),
                           {"slope": rate.fit.slope, "target": rate.target_slope,
                            "relative_error": rate.relative_error,
                            "deviation_decreasing": res.deviation_decreasing(),
                            "runtime_limit_s": 600}, arts, runtime)


def criterion_10(seed=0):
    rng = _rng(seed, 10)
    d, n = 4, 60
    theta0 = rng.standard_normal(d) * 0.5
    fam = gaussian_location_family(theta0)
    pen = Penalty.squared(0.8)
    data = Dataset(theta0 + rng.standard_normal((n, d)), "vector")
    inner = make_inner(fam, pen)
    tau_star2 = inner.tau_min2 + 0.05
    st = np.linspace(0.0, 1.5, 151)
    F = shifted_curve(fam, pen, data, None, tau_star2, SGrid.from_points(st))
    direct = empirical_curve(fam, pen, data, None,
                             SGrid.from_points(np.sqrt(tau_star2 + st**2), math.sqrt(inner.tau_min2)))
    ident_err = float(np.max(np.abs(F.values - direct.values)))
    t2 = rng.uniform(0.0, 1.0, 10_000)
    s = np.sqrt(t2 + rng.uniform(0.0, 2.0, 10_000))
    s0 = np.sqrt(t2 + rng.uniform(0.0, 2.0, 10_000))
    holds, _, _ = shifted_ordering_check(s, s0, t2)
    violations = int(np.count_nonzero(~holds))
    G = MarginFunction.quadratic(0.9)
    eval_err = 0.0
    for _ in range(200):
        t, m = float(rng.uniform(0.1, 5.0)), int(rng.integers(10, 10_000))
        tau_max, s0_, r0 = float(rng.uniform(0.5, 3.0)), float(rng.uniform(0.0, 1.0)), float(rng.uniform(0.0, 1.0))
        C, K = float(rng.uniform(0.5, 3.0)), float(rng.uniform(0.5, 3.0))
        a = delta_bound(t, m, tau_max, s0_, r0, G, C, K)
        b = delta_bound_shifted(t, m, tau_max, 0.0, s0_, r0, G, C, K, 1.0)
        eval_err = max(eval_err, abs(a - b))
    ok = ident_err <= 1e-12 and violations == 0 and eval_err <= 1e-12
    return CriterionResult(10, "shifted curve identity and ordering", bool(ok),
                           {"identity_err": ident_err, "ordering_violations": violations,
                            "evaluator_err": eval_err})


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10}


def run_criterion(k, seed=0, workers=1) -> CriterionResult:
    fn = CRITERIA[k]
    start = time.perf_counter()
    if k == 8:
        res = fn()
    elif k == 9:
        res = fn(seed, workers)
    else:
        res = fn(seed)
    if not res.runtime:
        res.runtime = time.perf_counter() - start
    return res


def run_all(seed=0, workers=1, numbers=None, progress=None):
    """Run criteria 1-10 (criterion 11 compares two complete runs)."""
    out = []
    for k in numbers or sorted(CRITERIA):
        res = run_criterion(k, seed, workers)
        if progress is not None:
            progress(res)
        out.append(res)
    return out
