"""Exponential families: log-partition, its small-norm expansion and the
penalized maximum-likelihood estimators for densities and fixed-design
regression."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit, logsumexp, roots_legendre

from .convex import SolverSettings, SolveResult, minimize_composite
from .core import Dataset, Penalty
from .errors import ConfigurationError, DomainViolationError
from .sets import Box, Domain, Whole

__all__ = [
    "BaseMeasure",
    "ExpFamily",
    "log_partition",
    "taylor_ratio",
    "TaylorTable",
    "small_norm_expansion",
    "fit_density_mle",
    "fit_expfam_regression",
    "RegressionFamily",
    "GAUSSIAN",
    "POISSON",
    "BERNOULLI",
    "regression_curvature_constant",
    "two_point_family",
]

QUAD_TOL = 1e-10
MAX_NODES = 1024


@dataclass(frozen=True)
class BaseMeasure:
    """A measure ``nu`` represented by nodes and weights.

    ``finite``: exact support points and masses.  ``interval``: a density on
    ``[a, b]`` integrated by Gauss-Legendre with ``nodes`` points.
    """

    kind: str
    nodes: np.ndarray
    weights: np.ndarray
    density: Callable | None = None
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or not np.isfinite(w.sum()) or w.sum() <= 0:
            raise ConfigurationError("base measure weights must be >= 0 with finite positive mass")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))

    @classmethod
    def finite(cls, support, weights):
        return cls("finite", np.asarray(support, dtype=float), np.asarray(weights, dtype=float))

    @classmethod
    def interval(cls, density, a, b, nodes=64, normalize=False):
        """Density on ``[a, b]``; ``normalize=True`` rescales it to a probability."""
        if normalize:
            _, w0 = cls._rule(density, a, b, MAX_NODES)
            mass = float(w0.sum())
            raw = density

            def density(x):
                return np.asarray(raw(x), dtype=float) / mass

        x, w = cls._rule(density, a, b, nodes)
        if np.any(w < 0):
            raise ConfigurationError("density must be nonnegative")
        return cls("interval", x, w, density, float(a), float(b))

    @staticmethod
    def _rule(density, a, b, nodes):
        x, w = roots_legendre(nodes)
        xs = 0.5 * (b - a) * x + 0.5 * (a + b)
        return xs, 0.5 * (b - a) * w * np.asarray(density(xs), dtype=float)

    def refined(self, nodes):
        if self.kind != "interval":
            return self
        x, w = self._rule(self.density, self.a, self.b, nodes)
        return BaseMeasure("interval", x, w, self.density, self.a, self.b)

    @property
    def mass(self):
        return float(self.weights.sum())

    def integrate(self, values):
        return float(np.dot(self.weights, values))


def _log_integral_exp(values, weights):
    """``log sum_i w_i exp(v_i)``, accurate when ``v`` is small."""
    values = np.asarray(values, dtype=float)
    if np.max(np.abs(values)) < 50:
        inner = (weights.sum() - 1.0) + np.dot(weights, np.expm1(values))
        if inner > -1.0:
            return float(np.log1p(inner))
    with np.errstate(divide="ignore"):
        out = logsumexp(values, b=weights)
    if not np.isfinite(out):
        raise DomainViolationError("log-partition integral diverges")
    return float(out)


class ExpFamily:
    """``g_theta = basis(x) . theta`` (centered under ``nu`` when requested).

    ``basis(x)`` returns an array of shape ``(len(x), p)``.  Centering
    subtracts the mean of each basis function under ``centering_measure``
    (default: the base measure), so ``int g dnu = 0`` up to round-off.
    """

    def __init__(self, base: BaseMeasure, basis: Callable, dim: int, domain: Domain | None = None,
                 centered: bool = True, centering_measure: BaseMeasure | None = None):
        self.base = base
        self._basis = basis
        self.dim = int(dim)
        self.domain = domain if domain is not None else Whole(dim)
        self.centered = centered
        cm = centering_measure or base
        if centered:
            B = self._raw(cm.nodes)
            self.shift = cm.weights @ B / cm.mass
        else:
            self.shift = np.zeros(self.dim)
        self._B = self.basis(base.nodes)

    def _raw(self, x):
        out = np.asarray(self._basis(np.asarray(x, dtype=float)), dtype=float)
        return out.reshape(len(np.atleast_1d(x)), self.dim)

    def basis(self, x):
        return self._raw(x) - self.shift

    def g_values(self, theta, x=None):
        B = self._B if x is None else self.basis(x)
        return B @ np.asarray(theta, dtype=float)

    def centering_residual(self, theta):
        return abs(self.base.integrate(self.g_values(theta)))

    def log_partition(self, theta):
        return _log_integral_exp(self.g_values(theta), self.base.weights)

    def mean_basis(self, theta):
        """``E_theta[basis]``, the gradient of ``theta -> d(g_theta)``."""
        g = self.g_values(theta)
        lw = g + np.log(np.where(self.base.weights > 0, self.base.weights, 1.0))
        lw = np.where(self.base.weights > 0, lw, -np.inf)
        p = np.exp(lw - logsumexp(lw))
        return p @ self._B

    def second_moment(self, g_vals):
        """``P g^2`` under the normalized base measure."""
        return self.base.integrate(np.asarray(g_vals) ** 2) / self.base.mass


def log_partition(family_or_base, g):
    """``d(g) = log int exp(g) dnu``.

    ``family_or_base`` is an :class:`ExpFamily` (then ``g`` is a parameter
    vector) or a :class:`BaseMeasure` (then ``g`` is a vectorized callable;
    interval measures are refined by doubling until two successive values
    agree to ``1e-10`` or ``1024`` nodes are reached).
    """
    if isinstance(family_or_base, ExpFamily):
        return family_or_base.log_partition(g)
    base = family_or_base
    if base.kind == "finite":
        return _log_integral_exp(g(base.nodes), base.weights)
    prev = _log_integral_exp(g(base.nodes), base.weights)
    nodes = base.nodes.size
    while nodes < MAX_NODES:
        nodes *= 2
        b2 = base.refined(nodes)
        cur = _log_integral_exp(g(b2.nodes), b2.weights)
        if abs(cur - prev) <= QUAD_TOL:
            return cur
        prev = cur
    return prev


@dataclass
class TaylorTable:
    t: np.ndarray
    ratio: np.ndarray
    kappa: np.ndarray
    Pg2: float

    def stable(self, factor=2.0, split=1e-2):
        """``max kappa`` over the small-``t`` rows is within ``factor`` of the top decade."""
        top = self.kappa[self.t > split]
        low = self.kappa[self.t <= split]
        if top.size == 0 or low.size == 0:
            raise ConfigurationError("t grid must cover both sides of the split")
        return bool(np.max(low) <= factor * np.max(top))


def _values_and_weights(family, g):
    if isinstance(family, ExpFamily):
        if callable(g):
            vals = np.asarray(g(family.base.nodes), dtype=float)
        else:
            vals = family.g_values(g)
        return vals, family.base.weights
    if isinstance(family, BaseMeasure):
        return np.asarray(g(family.nodes), dtype=float), family.weights
    raise ConfigurationError("expected an ExpFamily or a BaseMeasure")


def taylor_ratio(family, g, t_grid) -> TaylorTable:
    """``d(t g) / (t^2 P g^2)`` for each ``t``; tends to 1/2 with error ``O(t)``."""
    vals, w = _values_and_weights(family, g)
    t = np.asarray(t_grid, dtype=float)
    if np.any(t <= 0) or np.any(t > 1):
        raise DomainViolationError("t values must lie in (0, 1]")
    Pg2 = float(np.dot(w, vals**2) / w.sum())
    if Pg2 <= 0:
        raise DomainViolationError("P g^2 must be positive")
    ratio = np.array([_log_integral_exp(tt * vals, w) / (tt**2 * Pg2) for tt in t])
    return TaylorTable(t, ratio, np.abs(ratio - 0.5) / t, Pg2)


@dataclass
class ExpansionTable:
    eta: np.ndarray
    ratio: np.ndarray

    def slope(self):
        """Log-log slope of ``|ratio - 1|`` against ``eta``."""
        err = np.abs(self.ratio - 1.0)
        return float(np.polyfit(np.log(self.eta), np.log(err), 1)[0])


def small_norm_expansion(family, g, eta_grid) -> ExpansionTable:
    """``d(g) / (P g^2 / 2)`` with ``g`` rescaled so that ``sup |g| = eta``."""
    vals, w = _values_and_weights(family, g)
    sup = float(np.max(np.abs(vals[w > 0])))
    if sup == 0:
        raise DomainViolationError("g vanishes on the support")
    eta = np.asarray(eta_grid, dtype=float)
    ratios = []
    for e in eta:
        gv = vals * (e / sup)
        Pg2 = float(np.dot(w, gv**2) / w.sum())
        ratios.append(_log_integral_exp(gv, w) / (Pg2 / 2.0))
    return ExpansionTable(eta, np.array(ratios))


def fit_density_mle(family: ExpFamily, dataset: Dataset, penalty: Penalty,
                    settings: SolverSettings | None = None) -> SolveResult:
    """``argmin_theta -P_n g_theta + d(g_theta) + pen(theta)`` over the family domain."""
    settings = settings or SolverSettings(tolerance=1e-10)
    xbar = family.basis(dataset.observations).mean(axis=0)

    def f(theta):
        return float(-xbar @ theta + family.log_partition(theta))

    def grad(theta):
        return -xbar + family.mean_basis(theta)

    x0 = family.domain.project(np.zeros(family.dim))
    res = minimize_composite(f, grad, penalty, x0, settings, domain=family.domain)
    res.info["score_residual"] = float(np.linalg.norm(grad(res.minimizer)))
    return res


@dataclass(frozen=True)
class RegressionFamily:
    """Scalar log-partition ``d(xi)`` with derivative and natural domain ``(lo, hi)``."""

    name: str
    d: Callable
    d_prime: Callable
    lo: float = -np.inf
    hi: float = np.inf


GAUSSIAN = RegressionFamily("gaussian", lambda x: 0.5 * np.asarray(x) ** 2, lambda x: np.asarray(x, float))
POISSON = RegressionFamily("poisson", np.exp, np.exp)
BERNOULLI = RegressionFamily("bernoulli", lambda x: np.logaddexp(0.0, x), expit)


def fit_expfam_regression(X, Y, family: RegressionFamily, domain: Domain | None = None,
                          penalty: Penalty | None = None, settings: SolverSettings | None = None,
                          design=None) -> SolveResult:
    """``argmin_g -Y.g / n + sum_i d(g_i) / n + pen(g)`` over ``g in domain``.

    ``g`` is the vector of values at the design points ``X`` (so ``domain``
    lives in ``R^n``); pass ``design`` (an ``(n, p)`` matrix) to optimize
    over coefficients ``beta`` with ``g = design @ beta`` instead.  Values
    leaving the natural domain of ``d`` are clipped and flagged.
    """
    Y = np.asarray(Y, dtype=float)
    n = Y.size
    if X is not None and len(np.atleast_1d(X)) != n:
        raise ConfigurationError("design points and responses differ in length")
    penalty = penalty or Penalty.zero()
    settings = settings or SolverSettings(tolerance=1e-10)
    M = np.eye(n) if design is None else np.asarray(design, dtype=float)
    p = M.shape[1]
    dom = domain if domain is not None else Whole(p)
    clipped = {"count": 0}

    def clip(xi):
        out = np.clip(xi, family.lo, family.hi)
        if np.any(out != xi):
            clipped["count"] += 1
        return out

    def f(beta):
        xi = clip(M @ beta)
        return float((-Y @ xi + np.sum(family.d(xi))) / n)

    def grad(beta):
        xi = clip(M @ beta)
        return M.T @ (-Y + family.d_prime(xi)) / n

    x0 = dom.project(np.zeros(p))
    res = minimize_composite(f, grad, penalty, x0, settings, domain=dom)
    res.info["xi_clipped"] = clipped["count"] > 0
    return res


def regression_curvature_constant(family: RegressionFamily, g, g0):
    """Empirical ``c^2``: Bregman divergence of ``d`` over ``n ||g - g0||_n^2``."""
    g = np.asarray(g, dtype=float)
    g0 = np.asarray(g0, dtype=float)
    diff = g - g0
    denom = np.sum(diff**2)
    if denom == 0:
        raise DomainViolationError("g must differ from g0")
    breg = np.sum(family.d(g) - family.d(g0) - family.d_prime(g0) * diff)
    return float(breg / denom)


def two_point_family(bound=2.0):
    """``nu`` uniform on ``{-1, +1}``, ``g_a(x) = a x`` with ``a in [-bound, bound]``."""
    base = BaseMeasure.finite([-1.0, 1.0], [0.5, 0.5])
    return ExpFamily(base, lambda x: np.asarray(x, float)[:, None], 1,
                     Box([-bound], [bound]), centered=True)
