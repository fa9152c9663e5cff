"""Worked examples: projection density estimation on a trigonometric sieve,
linearized least squares, and log-log rate fits of the concentration point.

Projection density estimation uses the loss ``f_theta(x) = -2 phi(x).theta
+ ||theta||^2`` with ``phi`` the orthonormal trigonometric basis of
``L2[0, 1]``; its excess risk is exactly ``||theta - theta0||^2``.  The
sieve keeps ``K = ceil(basis_scale * sqrt(n))`` frequencies.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .convex import SolverSettings, prox_with_domain, solve_erm
from .core import Dataset, LinearFamily, Penalty, PopulationOracle, excess_risk
from .errors import ConfigurationError, DomainViolationError, UnsupportedScenarioError
from .numerics import golden_min
from .riskcurve import InnerMaximizer, RiskCurve, SGrid, argmin_curve
from .sets import Ball, Ellipsoid, Whole

__all__ = [
    "SCENARIO_IDS",
    "ScenarioSpec",
    "RateFit",
    "RateReport",
    "trig_features",
    "trig_means",
    "TrigProjectionModel",
    "run_projection_case",
    "ProjectionCaseResult",
    "run_linearized_ls",
    "LinearizedLSResult",
    "linearized_family",
    "design_factor",
    "sample_linear_model",
    "certify_envelope",
    "rate_fit",
]

SCENARIO_IDS = (
    "projection-case1",
    "projection-case2",
    "projection-case3",
    "linearized-ls",
    "expfam-density",
    "expfam-regression",
    "normal-sequence",
)


@dataclass(frozen=True)
class ScenarioSpec:
    """Declarative description of one scenario run.

    ``lam_scale * n ** lam_exponent`` is the penalty level; when
    ``lam_exponent`` is None a case-specific default is used.
    ``basis_size`` (fixed) overrides the ``ceil(basis_scale * sqrt(n))`` rule.
    """

    scenario: str
    n_list: tuple = (250, 500, 1000, 2000, 4000, 8000)
    seed: int = 0
    replicates: int = 200
    alpha: float = 0.5
    q: float = 2.0
    lam_scale: float = 1.0
    lam_exponent: float | None = None
    basis_scale: float = 4.0
    basis_size: int | None = None
    radius: float = 1.0
    theta0_amplitude: float = 0.0
    theta0_frequency: int = 1
    tau_max: float = 2.0
    grid_ratio: float = 1.05
    p: int = 5
    sigma: float = 1.0
    beta0: tuple | None = None
    sigma0: tuple | None = None
    l1_radius: float | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIO_IDS:
            raise ConfigurationError(f"unknown scenario id {self.scenario!r}")
        n_list = tuple(int(n) for n in self.n_list)
        object.__setattr__(self, "n_list", n_list)
        if any(b <= a for a, b in zip(n_list, n_list[1:])) or (n_list and n_list[0] < 1):
            raise ConfigurationError("n_list must be strictly increasing positive integers")
        # alpha = 1 is the boundary value (constant complexity majorant), admitted for Case 1
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigurationError("alpha must lie in (0, 1]")
        if self.scenario == "projection-case3" and not (1.0 < self.q <= 2.0):
            raise ConfigurationError("case 3 needs q in (1, 2]")
        if self.replicates < 2:
            raise ConfigurationError("at least 2 replicates are required")

    # --- schedules ------------------------------------------------------
    def lam(self, n):
        if self.lam_exponent is not None:
            return self.lam_scale * n**self.lam_exponent
        if self.scenario == "projection-case2":
            return self.lam_scale * n ** (-1.0 / (2.0 * (1.0 + self.alpha)))
        if self.scenario == "projection-case3":
            return self.lam_scale * n ** (-0.3)
        return 0.0

    def basis(self, n):
        if self.basis_size is not None:
            return int(self.basis_size)
        return int(math.ceil(self.basis_scale * math.sqrt(n)))

    def target_slope(self):
        """Exponent of ``n`` in the predicted order of ``s0``."""
        a = self.alpha
        if self.scenario == "projection-case1":
            return -1.0 / (2.0 * (1.0 + a))
        e = self.lam_exponent
        if e is None:
            e = -1.0 / (2.0 * (1.0 + a)) if self.scenario == "projection-case2" else -0.3
        if self.scenario == "projection-case2":
            return -(0.5 + a * e)
        if self.scenario == "projection-case3":
            q = self.q
            return -(q / (q - (2.0 - q) * a)) * (0.5 + (2.0 * a / q) * e)
        raise UnsupportedScenarioError(f"no rate prediction for {self.scenario}")

    def to_dict(self):
        return asdict(self)


# --------------------------------------------------------------------------
# trigonometric sieve
# --------------------------------------------------------------------------


def trig_features(x, K):
    """``phi(x)`` as an ``(len(x), 2K)`` array: ``sqrt2 cos(2 pi k x)`` then ``sqrt2 sin``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = np.exp(2j * np.pi * x)
    P = np.cumprod(np.broadcast_to(z[:, None], (x.size, K)), axis=1)
    return math.sqrt(2.0) * np.concatenate([P.real, P.imag], axis=1)


def trig_means(x, K, chunk=2048):
    """``P_n phi`` without materializing the full feature matrix."""
    x = np.asarray(x, dtype=float)
    acc = np.zeros(K, dtype=complex)
    for i in range(0, x.size, chunk):
        z = np.exp(2j * np.pi * x[i:i + chunk])
        acc += np.cumprod(np.broadcast_to(z[:, None], (z.size, K)), axis=1).sum(axis=0)
    m = acc / x.size
    return math.sqrt(2.0) * np.concatenate([m.real, m.imag])


class TrigProjectionModel:
    """Density ``1 + theta0 . phi`` on ``[0, 1]`` with the sieve of size ``K``.

    Frequency ``k`` carries weight ``k ** (1 / alpha)`` in the smoothness
    functional ``I^2(theta) = sum_k w_k theta_k^2``.
    """

    def __init__(self, spec: ScenarioSpec, n: int):
        self.spec = spec
        self.n = n
        self.K = spec.basis(n)
        ks = np.arange(1, self.K + 1, dtype=float)
        self.weights = np.concatenate([ks, ks]) ** (1.0 / spec.alpha)
        d = 2 * self.K
        theta0 = np.zeros(d)
        if spec.theta0_amplitude:
            k0 = spec.theta0_frequency
            if k0 > self.K:
                raise ConfigurationError("theta0 frequency exceeds the sieve size")
            if spec.theta0_amplitude * math.sqrt(2.0) > 1.0:
                raise ConfigurationError("theta0 amplitude makes the density negative")
            theta0[k0 - 1] = spec.theta0_amplitude
        self.theta0 = theta0
        self.lam = spec.lam(n)
        case = spec.scenario
        root_w = np.sqrt(self.weights)
        if case == "projection-case1":
            self.penalty = Penalty.zero()
            domain = Ellipsoid(self.weights, spec.radius)
            if not domain.contains(theta0):
                raise ConfigurationError("theta0 must lie in the ellipsoid")
        elif case == "projection-case2":
            self.penalty = Penalty.squared(self.lam, root_w)
            domain = Whole(d)
        elif case == "projection-case3":
            self.penalty = Penalty.power(self.lam, spec.q, root_w)
            domain = Whole(d)
        else:
            raise UnsupportedScenarioError(f"{case} is not a projection case")
        self.domain = domain
        cov = 4.0 * np.eye(d) if not np.any(theta0) else 4.0 * self._feature_cov()
        self.family = LinearFamily(lambda obs: -2.0 * trig_features(obs, self.K), -2.0 * theta0,
                                   2.0 * np.eye(d), cov, theta0, domain=domain)
        self.inner = InnerMaximizer(self.family, self.penalty)

    def _feature_cov(self):
        x, w = np.polynomial.legendre.leggauss(8 * self.K + 64)
        x = 0.5 * (x + 1.0)
        w = 0.5 * w * (1.0 + trig_features(x, self.K) @ self.theta0)
        F = trig_features(x, self.K)
        mean = w @ F
        return (F * w[:, None]).T @ F - np.outer(mean, mean)

    def sample(self, rng, n):
        """Rejection sampling from ``1 + theta0 . phi``."""
        if not np.any(self.theta0):
            return rng.random(n)
        bound = 1.0 + math.sqrt(2.0) * np.abs(self.theta0).sum()
        out = np.empty(0)
        while out.size < n:
            x = rng.random(2 * n)
            u = rng.random(2 * n) * bound
            dens = 1.0 + trig_features(x, self.K) @ self.theta0
            out = np.concatenate([out, x[u <= dens]])
        return out[:n]

    def process_vector(self, x):
        return 2.0 * (trig_means(x, self.K) - self.theta0)

    def erm(self, V):
        """Row-wise ERM from process vectors: ``prox(theta0 + v / 2)`` at step 1/2."""
        return prox_with_domain(self.penalty, self.domain, self.theta0 + V / 2.0, 0.5)

    def tau2(self, theta):
        delta = theta - self.theta0
        return np.sum(delta**2, axis=-1) + self.penalty(theta)


@dataclass
class ProjectionNResult:
    n: int
    K: int
    lam: float
    tau_min: float
    s0: float
    s0_se: float
    s_hat: np.ndarray
    tau_hat: np.ndarray
    lemma_gap: float
    median_deviation: float
    boundary_fraction: float
    curve: RiskCurve
    flags: int = 0

    def summary(self):
        return {"n": self.n, "K": self.K, "lam": self.lam, "tau_min": self.tau_min, "s0": self.s0,
                "s0_se": self.s0_se, "median_s_hat": float(np.median(self.s_hat)),
                "median_tau_hat": float(np.median(self.tau_hat)), "lemma_gap": self.lemma_gap,
                "median_deviation": self.median_deviation,
                "boundary_fraction": self.boundary_fraction, "flags": self.flags}


@dataclass
class RateFit:
    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    se: float


@dataclass
class RateReport:
    n_values: list
    s0: list
    s0_se: list
    fit: RateFit
    target_slope: float

    @property
    def relative_error(self):
        return abs(self.fit.slope - self.target_slope) / abs(self.target_slope)

    def to_dict(self):
        return {"n_values": list(map(int, self.n_values)), "s0": list(map(float, self.s0)),
                "s0_se": list(map(float, self.s0_se)), "fit": asdict(self.fit),
                "target_slope": self.target_slope, "relative_error": self.relative_error}


@dataclass
class ProjectionCaseResult:
    spec: ScenarioSpec
    per_n: list
    rate: RateReport | None

    @property
    def deviation_medians(self):
        return [r.median_deviation for r in self.per_n]

    def deviation_decreasing(self, inversions_allowed=1):
        d = np.asarray(self.deviation_medians)
        return int(np.count_nonzero(np.diff(d) > 0)) <= inversions_allowed

    def to_dict(self):
        return {"scenario": self.spec.scenario, "per_n": [r.summary() for r in self.per_n],
                "rate": None if self.rate is None else self.rate.to_dict()}


def _s0_from_rows(inner, V, lo, hi):
    """Golden-section argmin of ``s^2 - mean_r E_n^{(r)}(s)`` on ``[lo, hi]``."""
    R = V.shape[0]

    def obj(z):
        return np.array([zz * zz - inner.values(V, np.full(R, zz))[0].mean() for zz in z])

    x, _ = golden_min(obj, np.array([lo]), np.array([hi]), iters=80, tol=1e-9)
    return float(x[0])


def _project_n(args):
    spec, n = args
    model = TrigProjectionModel(spec, n)
    inner = model.inner
    R = spec.replicates
    V = np.empty((R, 2 * model.K))
    for r in range(R):
        rng = np.random.Generator(np.random.PCG64([spec.seed, n, r]))
        V[r] = model.process_vector(model.sample(rng, n))
    tau_min = math.sqrt(max(inner.tau_min2, 0.0))
    grid = SGrid.default(tau_min, max(spec.tau_max, tau_min * 1.5))
    if spec.grid_ratio != grid.ratio:
        grid = SGrid(grid.start, grid.end, "geometric", spec.grid_ratio, tau_min=tau_min)
    table, flags = inner.batch_curve(V, grid.points)
    mean = table.mean(axis=0)
    se = table.std(axis=0, ddof=1) / math.sqrt(R)
    curve = RiskCurve(grid, mean, "population-mean", se=se, flags=flags.any(axis=0), replicates=R,
                      seed=spec.seed, meta={"n": n, "K": model.K, "lam": model.lam})
    pts = grid.points
    k = argmin_curve(curve).index
    lo, hi = pts[max(k - 1, 0)], pts[min(k + 1, pts.size - 1)]
    s0 = _s0_from_rows(inner, V, lo, hi)
    # batch spread of the concentration point (4 disjoint replicate groups)
    groups = np.array_split(np.arange(R), 4)
    part = []
    for g in groups:
        tg = table[g].mean(axis=0)
        kg = int(np.argmin(pts**2 - tg))
        part.append(_s0_from_rows(inner, V[g], pts[max(kg - 1, 0)], pts[min(kg + 1, pts.size - 1)]))
    s0_se = float(np.std(part, ddof=1) / 2.0)
    # per-replicate empirical argmin, refined inside the bracketing grid cell
    obj = pts[None, :] ** 2 - table
    kr = np.argmin(obj, axis=1)
    lo_r = pts[np.maximum(kr - 1, 0)]
    hi_r = pts[np.minimum(kr + 1, pts.size - 1)]
    s_hat, _ = golden_min(lambda z: z**2 - inner.values(V, z)[0], lo_r, hi_r, iters=80, tol=1e-10)
    s_hat = np.maximum(s_hat, tau_min)
    theta_hat = model.erm(V)
    tau_hat = np.sqrt(np.maximum(model.tau2(theta_hat), 0.0))
    first_step = pts[1] - pts[0] if pts.size > 1 else 0.0
    return ProjectionNResult(
        n=n, K=model.K, lam=model.lam, tau_min=tau_min, s0=s0, s0_se=s0_se, s_hat=s_hat,
        tau_hat=tau_hat, lemma_gap=float(np.max(np.abs(tau_hat - s_hat))),
        median_deviation=float(np.median(np.abs(tau_hat - s0) / s0)),
        boundary_fraction=float(np.mean(s_hat - tau_min <= first_step + 1e-12)),
        curve=curve, flags=int(np.count_nonzero(flags)),
    )


def run_projection_case(spec: ScenarioSpec, workers: int = 1) -> ProjectionCaseResult:
    """Per ``n``: mean risk curve, ``s0``, per-replicate ``s_hat`` and ``tau(f_hat)``.

    Replicate ``r`` at sample size ``n`` draws from ``PCG64([seed, n, r])``,
    so results do not depend on ``workers``.
    """
    if not spec.scenario.startswith("projection-case"):
        raise UnsupportedScenarioError(f"{spec.scenario} is not a projection case")
    tasks = [(spec, n) for n in spec.n_list]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            per_n = list(pool.map(_project_n, tasks))
    else:
        per_n = [_project_n(t) for t in tasks]
    rate = None
    if len(spec.n_list) >= 4 and math.log10(spec.n_list[-1] / spec.n_list[0]) >= 1.5:
        fit = rate_fit([r.n for r in per_n], [r.s0 for r in per_n])
        rate = RateReport([r.n for r in per_n], [r.s0 for r in per_n], [r.s0_se for r in per_n],
                          fit, spec.target_slope())
    return ProjectionCaseResult(spec, per_n, rate)


# --------------------------------------------------------------------------
# linearized least squares
# --------------------------------------------------------------------------


def _uniform_design_cov(beta0, sigma):
    """``Cov(Y X)`` for iid uniform(-sqrt3, sqrt3) covariates and ``Y = X.beta0 + sigma eps``."""
    b = np.asarray(beta0, dtype=float)
    p = b.size
    E4 = 9.0 / 5.0
    M = 2.0 * np.outer(b, b)
    np.fill_diagonal(M, np.sum(b**2) - b**2 + E4 * b**2)
    second = M + sigma**2 * np.eye(p)
    return second - np.outer(b, b)


@dataclass
class LinearizedLSResult:
    n_values: list
    tau_hat_median: list
    tau_hat: list
    beta_hat_first: list
    c_F: float | None
    C_F: float | None
    envelope_check: bool | None
    holder_ok: bool

    def to_dict(self):
        return {"n_values": self.n_values, "tau_hat_median": self.tau_hat_median,
                "c_F": self.c_F, "C_F": self.C_F, "envelope_check": self.envelope_check,
                "holder_ok": self.holder_ok}


def design_factor(Sigma0):
    """Symmetric square root ``L`` of a positive semidefinite ``Sigma0``."""
    S = np.asarray(Sigma0, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or not np.allclose(S, S.T, atol=1e-12):
        raise ConfigurationError("Sigma0 must be a symmetric square matrix")
    vals, vecs = np.linalg.eigh(S)
    if vals.min() < -1e-12 * max(1.0, abs(vals).max()):
        raise ConfigurationError("Sigma0 must be positive semidefinite")
    return (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.T


def linearized_family(p, beta0, sigma, domain=None, Sigma0=None):
    """Loss ``f_beta(x, y) = -y x.beta + beta' Sigma0 beta / 2``.

    Covariates are ``X = L Z`` with ``Z`` iid uniform on ``[-sqrt3, sqrt3]``
    and ``L = Sigma0^(1/2)``, so ``E X X' = Sigma0``.
    """
    beta0 = np.asarray(beta0, dtype=float)
    Sigma0 = np.eye(p) if Sigma0 is None else np.asarray(Sigma0, dtype=float)
    L = design_factor(Sigma0)
    if Sigma0.shape != (p, p):
        raise ConfigurationError("Sigma0 must be p x p")

    def feature(obs):
        obs = np.asarray(obs, dtype=float)
        return -obs[:, -1:] * obs[:, :-1]

    cov = L @ _uniform_design_cov(L.T @ beta0, sigma) @ L.T
    return LinearFamily(feature, -Sigma0 @ beta0, Sigma0, cov, beta0, domain=domain)


def sample_linear_model(rng, n, beta0, sigma, L=None):
    beta0 = np.asarray(beta0, dtype=float)
    X = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=(n, beta0.size))
    if L is not None:
        X = X @ L.T
    Y = X @ beta0 + sigma * rng.standard_normal(n)
    return X, Y


def certify_envelope(K_X, K_0, sigma=1.0, draws=1_000_000, seed=0, margin=1.05):
    """Constants with ``P F^2 1{F > t} <= c_F^2 exp(-t^2 / C_F^2)`` for
    ``F = K_X (sigma |eps| + K_0)``, ``eps`` standard normal.

    The constants are derived from the exact tail integral on a fine grid
    (inflated by ``margin``) and then checked on ``draws`` simulated
    envelope values.  Returns ``(c_F, C_F, check_passed)``.
    """
    # E[F^2 1{F > t}] by quadrature over eps >= 0 (|eps| is half-normal)
    e = np.linspace(0.0, 12.0, 240_001)
    dens = 2.0 * stats.norm.pdf(e)
    F = K_X * (sigma * e + K_0)
    F2d = F**2 * dens
    de = e[1] - e[0]
    tail = np.cumsum((F2d[::-1][1:] + F2d[::-1][:-1]) * 0.5 * de)[::-1]
    tail = np.append(tail, 0.0)
    mass = tail[0]
    c_F = max(1.0, margin * math.sqrt(mass))
    ts = np.linspace(0.0, float(F[-1]) * 0.9, 4000)
    m_t = np.interp(ts, F, tail)
    ok = (m_t > 0) & (ts > 0)
    ratio = ts[ok] / np.sqrt(np.log(c_F**2 / m_t[ok]))
    C_F = max(1.0, margin * float(np.max(ratio)))
    rng = np.random.default_rng(seed)
    Fs = K_X * (sigma * np.abs(rng.standard_normal(draws)) + K_0)
    Fs.sort()
    F2 = Fs**2
    suffix = np.cumsum(F2[::-1])[::-1] / draws
    grid = np.quantile(Fs, np.linspace(0.0, 0.999, 200))
    idx = np.searchsorted(Fs, grid, side="right")
    emp = np.where(idx < draws, suffix[np.minimum(idx, draws - 1)], 0.0)
    check = bool(np.all(emp <= c_F**2 * np.exp(-grid**2 / C_F**2)))
    return c_F, C_F, check


def run_linearized_ls(spec: ScenarioSpec, settings: SolverSettings | None = None) -> LinearizedLSResult:
    """Linearized least squares with a known design covariance.

    Uses ``beta0`` (default ``0.3 e_1 - 0.2 e_2``), a squared ridge penalty
    ``lam^2 ||beta||^2`` with ``lam = spec.lam(n)`` and optionally an l1 ball
    ``||beta - beta0||_1 <= l1_radius`` as parameter domain.  ``spec.sigma0``
    sets the (known) design covariance, identity by default.
    """
    p = spec.p
    beta0 = np.zeros(p)
    if spec.beta0 is not None:
        beta0 = np.asarray(spec.beta0, dtype=float)
    else:
        beta0[0] = 0.3
        if p > 1:
            beta0[1] = -0.2
    if beta0.size != p:
        raise ConfigurationError("beta0 must have length p")
    domain = None
    if spec.l1_radius is not None:
        domain = Ball(spec.l1_radius, center=beta0, norm="l1")
    Sigma0 = None if spec.sigma0 is None else np.asarray(spec.sigma0, dtype=float)
    family = linearized_family(p, beta0, spec.sigma, domain, Sigma0)
    L = design_factor(family.B)
    oracle = PopulationOracle.closed_form()
    settings = settings or SolverSettings(tolerance=1e-12, max_iterations=50_000)
    tau_all, med, first = [], [], []
    holder_ok = True
    for n in spec.n_list:
        lam = spec.lam(n)
        pen = Penalty.squared(lam) if lam > 0 else Penalty.zero()
        taus = []
        for r in range(spec.replicates):
            rng = np.random.Generator(np.random.PCG64([spec.seed, n, r]))
            X, Y = sample_linear_model(rng, n, beta0, spec.sigma, L)
            res = solve_erm(family, pen, Dataset((X, Y), "pair"), oracle, settings)
            b = res.minimizer
            taus.append(math.sqrt(max(excess_risk(family, b, pen, oracle), 0.0)))
            if domain is not None:
                lhs = np.abs(X @ (b - beta0))
                holder_ok &= bool(np.all(lhs <= np.abs(X).max(axis=1) * spec.l1_radius + 1e-9))
            if r == 0:
                first.append(b.tolist())
        tau_all.append(taus)
        med.append(float(np.median(taus)))
    c_F = C_F = check = None
    if domain is not None:
        # |X'delta| = |Z' L delta| <= sqrt3 ||L delta||_1 <= sqrt3 max_col ||L_j||_1 ||delta||_1
        K_X = math.sqrt(3.0) * spec.l1_radius * float(np.abs(L).sum(axis=0).max())
        K_0 = math.sqrt(3.0) * float(np.abs(L @ beta0).sum())
        c_F, C_F, check = certify_envelope(K_X, K_0, spec.sigma, seed=spec.seed)
    return LinearizedLSResult(list(spec.n_list), med, tau_all, first, c_F, C_F, check, holder_ok)


# --------------------------------------------------------------------------
# rate fits
# --------------------------------------------------------------------------


def rate_fit(n_values, s0_values) -> RateFit:
    """Least-squares slope of ``log s0`` on ``log n`` with a jackknife interval.

    Needs at least 4 values of ``n`` spanning at least 1.5 decades.
    """
    n = np.asarray(n_values, dtype=float)
    s = np.asarray(s0_values, dtype=float)
    if n.size < 4 or n.size != s.size:
        raise DomainViolationError("rate fit needs at least 4 (n, s0) pairs")
    if math.log10(n.max() / n.min()) < 1.5 - 1e-12:
        raise DomainViolationError("n values must span at least 1.5 decades")
    if np.any(s <= 0):
        raise DomainViolationError("s0 values must be positive")
    x, y = np.log(n), np.log(s)
    slope, intercept = np.polyfit(x, y, 1)
    m = n.size
    loo = np.array([np.polyfit(np.delete(x, i), np.delete(y, i), 1)[0] for i in range(m)])
    se = math.sqrt((m - 1) / m * np.sum((loo - loo.mean()) ** 2))
    tq = stats.t.ppf(0.975, m - 1)
    return RateFit(float(slope), float(intercept), float(slope - tq * se), float(slope + tq * se),
                   float(se))
