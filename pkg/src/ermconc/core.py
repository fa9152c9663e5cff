"""Basic objects: datasets, loss families, penalties and population functionals.

Notation follows the usual ERM set-up: ``P_n f`` is the empirical mean of a
loss ``f`` over the sample, ``P f`` its population mean, ``f0 = f_{g0}`` the
population minimizer and ``tau2(f) = P(f - f0) + pen(f)`` the penalized
excess risk.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import roots_legendre

from .errors import ConfigurationError, DomainViolationError, UnsupportedScenarioError
from .sets import Domain, FiniteSet, Whole

__all__ = [
    "Dataset",
    "Penalty",
    "PopulationOracle",
    "FunctionFamily",
    "FiniteFamily",
    "LinearFamily",
    "ParametricFamily",
    "empirical_mean",
    "excess_risk",
    "tau_min",
    "population_values",
]

SAMPLE_KINDS = ("scalar", "vector", "pair")


# --------------------------------------------------------------------------
# data
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """A sample ``X_1, ..., X_n``.

    ``observations`` is an array whose first axis indexes the sample.  For
    covariate-response data use ``kind="pair"`` and pass ``(X, Y)``; it is
    stored as one array with the response in the last column.
    """

    observations: np.ndarray
    kind: str = "scalar"

    def __post_init__(self):
        if self.kind not in SAMPLE_KINDS:
            raise ConfigurationError(f"unknown sample-space kind {self.kind!r}")
        obs = self.observations
        if self.kind == "pair" and isinstance(obs, tuple):
            x, y = obs
            x = np.asarray(x, dtype=float)
            x = x[:, None] if x.ndim == 1 else x
            obs = np.column_stack([x, np.asarray(y, dtype=float)])
        obs = np.asarray(obs, dtype=float)
        if obs.ndim == 0 or obs.shape[0] < 1:
            raise ConfigurationError("a dataset needs n >= 1 observations")
        if self.kind == "scalar" and obs.ndim != 1:
            raise ConfigurationError("scalar datasets must be one-dimensional")
        if self.kind in ("vector", "pair") and obs.ndim != 2:
            raise ConfigurationError(f"{self.kind} datasets must be two-dimensional")
        object.__setattr__(self, "observations", obs)

    @property
    def n(self) -> int:
        return self.observations.shape[0]

    @property
    def covariates(self):
        if self.kind != "pair":
            raise ConfigurationError("only pair datasets have covariates")
        return self.observations[:, :-1]

    @property
    def responses(self):
        if self.kind != "pair":
            raise ConfigurationError("only pair datasets have responses")
        return self.observations[:, -1]

    def concat(self, other: "Dataset") -> "Dataset":
        if other.kind != self.kind:
            raise ConfigurationError("cannot concatenate datasets of different kinds")
        return Dataset(np.concatenate([self.observations, other.observations]), self.kind)


# --------------------------------------------------------------------------
# penalties
# --------------------------------------------------------------------------

PENALTY_KINDS = ("zero", "indicator", "squared", "power")


@dataclass(frozen=True)
class Penalty:
    """Nonnegative convex penalty ``pen(g)``.

    kinds
        ``zero``       pen = 0
        ``indicator``  0 on ``domain``, +inf outside
        ``squared``    lam**2 * I(g)**2
        ``power``      lam**2 * I(g)**q, q in (1, 2]

    The seminorm is ``I(g) = ||norm_weights * g||_2``; zero weights make it a
    proper seminorm.  ``norm_weights=None`` means all ones.
    """

    kind: str = "zero"
    weight: float = 0.0
    q: float = 2.0
    norm_weights: np.ndarray | None = None
    domain: Domain | None = None

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS:
            raise ConfigurationError(f"unknown penalty kind {self.kind!r}")
        if self.weight < 0 or not np.isfinite(self.weight):
            raise ConfigurationError("penalty weight must be finite and >= 0")
        if self.kind == "indicator" and self.domain is None:
            raise ConfigurationError("indicator penalty needs a domain")
        if self.kind == "power" and not (1.0 < self.q <= 2.0):
            raise ConfigurationError(f"power penalty needs q in (1, 2], got {self.q}")
        if self.norm_weights is not None:
            object.__setattr__(self, "norm_weights", np.asarray(self.norm_weights, dtype=float))

    # convenience constructors -------------------------------------------
    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def indicator(cls, domain):
        return cls("indicator", domain=domain)

    @classmethod
    def squared(cls, lam, norm_weights=None):
        return cls("squared", weight=float(lam), norm_weights=norm_weights)

    @classmethod
    def power(cls, lam, q, norm_weights=None):
        return cls("power", weight=float(lam), q=float(q), norm_weights=norm_weights)

    @classmethod
    def ridge_n(cls, lam, n):
        """``pen(g) = lam * ||g||_n**2`` with ``||g||_n**2 = g.g / n``."""
        return cls.squared(np.sqrt(lam), norm_weights=np.full(n, 1.0 / np.sqrt(n)))

    # evaluation ----------------------------------------------------------
    def seminorm(self, g):
        g = np.asarray(g, dtype=float)
        w = 1.0 if self.norm_weights is None else self.norm_weights
        return np.linalg.norm(w * g, axis=-1)

    def __call__(self, g):
        g = np.asarray(g, dtype=float)
        if self.kind == "zero":
            return np.zeros(g.shape[:-1]) if g.ndim > 1 else 0.0
        if self.kind == "indicator":
            inside = np.linalg.norm(self.domain.project(g) - g, axis=-1) <= 1e-9
            out = np.where(inside, 0.0, np.inf)
            return out if g.ndim > 1 else float(out)
        exponent = 2.0 if self.kind == "squared" else self.q
        out = self.weight**2 * self.seminorm(g) ** exponent
        return out if g.ndim > 1 else float(out)

    def gradient(self, g):
        """Gradient of the smooth kinds (``zero``, ``squared``, ``power``)."""
        g = np.asarray(g, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(g)
        if self.kind == "indicator":
            raise UnsupportedScenarioError("indicator penalty has no gradient")
        w2 = 1.0 if self.norm_weights is None else self.norm_weights**2
        if self.kind == "squared":
            return 2 * self.weight**2 * w2 * g
        r = self.seminorm(g)
        r = np.where(r > 0, r, 1.0)
        return self.q * self.weight**2 * (r[..., None] if g.ndim > 1 else r) ** (self.q - 2) * w2 * g

    @property
    def root_convex(self) -> bool:
        """Whether ``sqrt(pen)`` is convex (the concavity hypothesis)."""
        return self.kind in ("zero", "indicator", "squared")


# --------------------------------------------------------------------------
# population oracle
# --------------------------------------------------------------------------

ORACLE_MODES = ("closed-form", "quadrature", "monte-carlo")


@dataclass(frozen=True)
class PopulationOracle:
    """Evaluates ``P f`` and ``sigma^2(f)``.

    ``closed-form`` delegates to the family's analytic population methods;
    ``quadrature`` and ``monte-carlo`` integrate against ``weights`` at
    ``nodes`` (a finite support is exact quadrature).
    """

    mode: str = "closed-form"
    nodes: np.ndarray | None = None
    weights: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in ORACLE_MODES:
            raise ConfigurationError(f"unknown oracle mode {self.mode!r}")
        if self.mode != "closed-form":
            if self.nodes is None or self.weights is None:
                raise ConfigurationError(f"{self.mode} oracle needs nodes and weights")
            if self.mode == "monte-carlo" and self.seed is None:
                raise ConfigurationError("monte-carlo oracle must record its seed")

    @classmethod
    def closed_form(cls):
        return cls("closed-form")

    @classmethod
    def discrete(cls, support, probs):
        probs = np.asarray(probs, dtype=float)
        if np.any(probs < 0) or not np.isclose(probs.sum(), 1.0):
            raise ConfigurationError("discrete probabilities must be >= 0 and sum to 1")
        return cls("quadrature", np.asarray(support, dtype=float), probs)

    @classmethod
    def gauss_legendre(cls, density, a, b, nodes=64):
        x, w = roots_legendre(nodes)
        xs = 0.5 * (b - a) * x + 0.5 * (a + b)
        ws = 0.5 * (b - a) * w * np.asarray(density(xs), dtype=float)
        return cls("quadrature", xs, ws)

    @classmethod
    def monte_carlo(cls, sampler, seed, draws=100_000):
        rng = np.random.default_rng(seed)
        pts = np.asarray(sampler(rng, draws), dtype=float)
        return cls("monte-carlo", pts, np.full(draws, 1.0 / draws), seed)

    def expect(self, h: Callable) -> float:
        if self.mode == "closed-form":
            raise UnsupportedScenarioError("closed-form oracle cannot integrate arbitrary functions")
        return float(np.dot(self.weights, np.asarray(h(self.nodes), dtype=float)))

    def risk(self, family, g) -> float:
        if self.mode == "closed-form":
            return family.population_risk(g)
        return self.expect(lambda x: family.evaluate(g, x))

    def variance(self, family, g) -> float:
        """``sigma^2(f_g - f0)``: variance of the loss difference under P."""
        if self.mode == "closed-form":
            return family.population_variance(g)
        g0 = family.require_g0()
        diff = np.asarray(family.evaluate(g, self.nodes), dtype=float) - family.evaluate(g0, self.nodes)
        mean = np.dot(self.weights, diff)
        return float(max(np.dot(self.weights, diff**2) - mean**2, 0.0))


# --------------------------------------------------------------------------
# loss families
# --------------------------------------------------------------------------


class FunctionFamily:
    """A loss class ``{f_g : g in domain}``.

    Subclasses implement ``evaluate(g, x)`` returning ``f_g`` at the sample
    points ``x`` (first axis indexes points).
    """

    domain: Domain
    g0: np.ndarray | None
    linear_process: bool = False
    sup_bound: float | None = None
    convex_objective: bool = True

    def evaluate(self, g, x):
        raise NotImplementedError

    def require_g0(self):
        if self.g0 is None:
            raise ConfigurationError("population minimizer g0 is not registered with the family")
        return self.g0

    def check_domain(self, g):
        if not self.domain.contains(g):
            raise DomainViolationError(f"parameter {np.asarray(g)} lies outside the parameter domain")

    def population_risk(self, g):
        raise UnsupportedScenarioError(f"{type(self).__name__} has no closed-form population risk")

    def population_variance(self, g):
        raise UnsupportedScenarioError(f"{type(self).__name__} has no closed-form variance")


class FiniteFamily(FunctionFamily):
    """Finitely many losses indexed by parameter vectors ``params[k]``.

    Either pass ``evaluate(theta, x)`` or build from a table of values on a
    finite sample space with :meth:`from_table`.
    """

    def __init__(self, params, evaluate, g0_index=0, sup_bound=None, linear_process=False):
        self.params = np.atleast_2d(np.asarray(params, dtype=float))
        if self.params.shape[0] == 1 and np.ndim(params) == 1:
            self.params = np.asarray(params, dtype=float)[:, None]
        self.domain = FiniteSet(self.params)
        self._evaluate = evaluate
        self.g0_index = int(g0_index)
        self.g0 = self.params[self.g0_index]
        self.sup_bound = sup_bound
        self.linear_process = linear_process
        self.table = None

    @classmethod
    def from_table(cls, table, params=None, g0_index=0):
        """Family on the sample space ``{0, ..., m-1}``; ``table[k, x] = f_k(x)``."""
        table = np.asarray(table, dtype=float)
        if params is None:
            params = np.arange(table.shape[0], dtype=float)[:, None]
        params = np.asarray(params, dtype=float)
        if params.ndim == 1:
            params = params[:, None]
        lookup = {tuple(p): k for k, p in enumerate(params)}

        def evaluate(theta, x):
            return table[lookup[tuple(np.asarray(theta, dtype=float))], np.asarray(x, dtype=int)]

        fam = cls(params, evaluate, g0_index)
        fam.table = table
        fam.sup_bound = float(np.max(np.abs(table - table[g0_index])))
        return fam

    def __len__(self):
        return self.params.shape[0]

    def index_of(self, g):
        d = np.linalg.norm(self.params - np.asarray(g, dtype=float), axis=1)
        k = int(np.argmin(d))
        if d[k] > 1e-12:
            raise DomainViolationError("parameter is not a member of the finite family")
        return k

    def evaluate(self, g, x):
        return self._evaluate(self.params[self.index_of(g)], x)

    def values(self, x):
        """Matrix ``F[k, i] = f_k(x_i)``."""
        if self.table is not None:
            return self.table[:, np.asarray(x, dtype=int)]
        return np.stack([np.asarray(self._evaluate(p, x), dtype=float) for p in self.params])


class LinearFamily(FunctionFamily):
    """Losses ``f_theta(x) = psi(x) . theta + theta' B theta / 2 + const``.

    The empirical process ``theta -> (P_n - P) f_theta`` is linear, and all
    population quantities are closed form given ``mean_feature = P psi`` and
    ``feature_cov = Cov(psi(X))``.  When ``P psi = -B theta0`` the excess risk
    is ``(theta - theta0)' B (theta - theta0) / 2``; ``B = 2 I`` is the pure case.
    """

    linear_process = True

    def __init__(self, feature, mean_feature, B, feature_cov, theta0, domain=None, const=0.0,
                 sup_bound=None):
        self.feature = feature
        self.mean_feature = np.asarray(mean_feature, dtype=float)
        d = self.mean_feature.size
        B = np.asarray(B, dtype=float)
        self.B = np.diag(B) if B.ndim == 1 else B
        cov = np.asarray(feature_cov, dtype=float)
        self.feature_cov = np.diag(cov) if cov.ndim == 1 else cov
        self.g0 = np.asarray(theta0, dtype=float)
        self.domain = domain if domain is not None else Whole(d)
        self.const = float(const)
        self.sup_bound = sup_bound
        if self.B.shape != (d, d) or self.feature_cov.shape != (d, d) or self.g0.shape != (d,):
            raise ConfigurationError("LinearFamily dimensions are inconsistent")

    @property
    def dim(self):
        return self.mean_feature.size

    @property
    def excess_hessian(self):
        """``H`` with ``P(f_theta - f0) = delta' H delta`` when theta0 is interior."""
        return self.B / 2.0

    @property
    def is_pure(self):
        return np.allclose(self.excess_hessian, np.eye(self.dim)) and np.allclose(
            self.mean_feature, -self.B @ self.g0)

    def _det(self, g):
        g = np.asarray(g, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", g, self.B, g) + self.const

    def evaluate(self, g, x):
        return self.feature(x) @ np.asarray(g, dtype=float) + self._det(g)

    def empirical_feature_mean(self, dataset):
        return np.asarray(self.feature(dataset.observations), dtype=float).mean(axis=0)

    def process_vector(self, dataset):
        """``v`` with ``(P_n - P)(f0 - f_theta) = v . (theta - theta0)``."""
        return -(self.empirical_feature_mean(dataset) - self.mean_feature)

    def population_risk(self, g):
        return float(self.mean_feature @ np.asarray(g, dtype=float) + self._det(g))

    def population_excess(self, g):
        g = np.asarray(g, dtype=float)
        slope = self.mean_feature + 0.5 * (g + self.g0) @ self.B
        return np.einsum("...i,...i->...", slope, g - self.g0)

    def population_variance(self, g):
        delta = np.asarray(g, dtype=float) - self.g0
        return float(delta @ self.feature_cov @ delta)


class ParametricFamily(FunctionFamily):
    """General smooth parametrized losses; population quantities via an oracle.

    ``evaluate(theta, x)`` must accept a parameter vector and an array of
    points.  ``gradient(theta, x)`` (optional) returns ``(len(x), dim)``.
    """

    def __init__(self, evaluate, dim, domain=None, g0=None, gradient=None, linear_process=False,
                 convex_objective=True, sup_bound=None):
        self._evaluate = evaluate
        self._gradient = gradient
        self.dim = int(dim)
        self.domain = domain if domain is not None else Whole(dim)
        self.g0 = None if g0 is None else np.asarray(g0, dtype=float)
        self.linear_process = linear_process
        self.convex_objective = convex_objective
        self.sup_bound = sup_bound

    def evaluate(self, g, x):
        return np.asarray(self._evaluate(np.asarray(g, dtype=float), x), dtype=float)

    def empirical_gradient(self, g, x, h=1e-6):
        if self._gradient is not None:
            return np.asarray(self._gradient(np.asarray(g, dtype=float), x), dtype=float).mean(axis=0)
        g = np.asarray(g, dtype=float)
        out = np.empty(self.dim)
        for j in range(self.dim):
            e = np.zeros(self.dim)
            e[j] = h
            out[j] = (self.evaluate(g + e, x).mean() - self.evaluate(g - e, x).mean()) / (2 * h)
        return out


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------


def empirical_mean(family: FunctionFamily, g, dataset: Dataset) -> float:
    """``P_n f_g = (1/n) sum_i f_g(X_i)``."""
    family.check_domain(g)
    return float(np.mean(family.evaluate(g, dataset.observations)))


def excess_risk(family: FunctionFamily, g, penalty: Penalty, oracle: PopulationOracle) -> float:
    """``tau^2(f_g) = P(f_g - f0) + pen(g)``."""
    g0 = family.require_g0()
    if isinstance(family, LinearFamily) and oracle.mode == "closed-form":
        base = float(family.population_excess(g))
    else:
        base = oracle.risk(family, g) - oracle.risk(family, g0)
    return base + float(penalty(g))


def population_values(family: FiniteFamily, penalty: Penalty, oracle: PopulationOracle):
    """Per-member ``P f_k``, ``tau^2(f_k)`` and ``sigma^2(f_k - f0)`` of a finite family."""
    if oracle.mode == "closed-form":
        risks = np.array([family.population_risk(p) for p in family.params])
        var = np.array([family.population_variance(p) for p in family.params])
    else:
        F = family.values(oracle.nodes)
        risks = F @ oracle.weights
        D = F - F[family.g0_index]
        m = D @ oracle.weights
        var = np.maximum((D**2) @ oracle.weights - m**2, 0.0)
    pens = np.array([penalty(p) for p in family.params], dtype=float)
    tau2 = risks - risks[family.g0_index] + pens
    return risks, tau2, var


def tau_min(family: FunctionFamily, penalty: Penalty, oracle: PopulationOracle, settings=None):
    """``min_f tau^2(f)`` and the achieving parameter, as ``(tau2_min, g)``."""
    from .convex import SolverSettings, minimize_composite

    family.require_g0()
    if isinstance(family, FiniteFamily):
        _, tau2, _ = population_values(family, penalty, oracle)
        k = int(np.argmin(tau2))
        return float(tau2[k]), family.params[k].copy()
    settings = settings or SolverSettings()
    if isinstance(family, LinearFamily) and oracle.mode == "closed-form":
        L = float(np.linalg.eigvalsh(family.B).max())

        def f(g):
            return float(family.population_excess(g))

        def grad(g):
            return family.mean_feature + family.B @ g

        res = minimize_composite(f, grad, penalty, family.g0.copy(), settings, domain=family.domain,
                                 lipschitz=L if L > 0 else None)
    else:
        r0 = oracle.risk(family, family.g0)

        def f(g):
            return oracle.risk(family, g) - r0

        def grad(g, h=1e-6):
            out = np.empty_like(g)
            for j in range(g.size):
                e = np.zeros_like(g)
                e[j] = h
                out[j] = (f(g + e) - f(g - e)) / (2 * h)
            return out

        res = minimize_composite(f, grad, penalty, family.g0.copy(), settings, domain=family.domain)
    if not res.converged:
        from .errors import SolverFailureError

        raise SolverFailureError("tau_min solve did not converge", residual=res.residual)
    return float(res.objective), res.minimizer
