"""Projections, proximal operators and a proximal-gradient solver."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, FiniteFamily, LinearFamily, ParametricFamily, Penalty, PopulationOracle
from .errors import ConfigurationError, DomainViolationError, UnsupportedScenarioError
from .sets import Domain, Whole

__all__ = [
    "SolverSettings",
    "SolveResult",
    "project",
    "prox",
    "prox_with_domain",
    "minimize_composite",
    "solve_regularized_ls",
    "solve_erm",
    "optimality_residual",
]


@dataclass(frozen=True)
class SolverSettings:
    step_rule: str = "backtracking"
    lipschitz: float | None = None
    max_iterations: int = 10_000
    tolerance: float = 1e-9
    backtrack: float = 0.5
    initial_step: float = 1.0

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ConfigurationError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be >= 1")
        if self.step_rule not in ("fixed", "backtracking"):
            raise ConfigurationError(f"unknown step rule {self.step_rule!r}")
        if self.step_rule == "fixed" and not (self.lipschitz and self.lipschitz > 0):
            raise ConfigurationError("fixed step rule needs a positive Lipschitz constant")
        if not 0 < self.backtrack < 1:
            raise ConfigurationError("backtracking factor must lie in (0, 1)")


@dataclass
class SolveResult:
    minimizer: np.ndarray
    objective: float | np.ndarray
    residual: float | np.ndarray
    iterations: int
    converged: bool | np.ndarray
    info: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# projections and proximal maps
# --------------------------------------------------------------------------


def project(domain: Domain, point):
    """Euclidean projection onto a convex primitive."""
    if domain is None:
        raise ConfigurationError("empty set descriptor")
    return domain.project(point)


def _power_prox(v, step, lam, q, w):
    """Prox of ``lam^2 ||w*u||^q`` by bisection on ``r = ||w*u||``.

    Stationarity gives ``u_i = v_i / (1 + c r^(q-2) w_i^2)`` with
    ``c = step * lam^2 * q``; the consistent ``r`` is the unique root of
    ``r - ||w * u(r)||`` on ``(0, ||w v||]``.
    """
    v = np.asarray(v, dtype=float)
    flat = v.reshape(-1, v.shape[-1])
    w2 = np.broadcast_to(w**2, flat.shape[-1:])
    c = step * lam**2 * q
    top = np.linalg.norm(np.sqrt(w2) * flat, axis=1)
    out = flat.copy()
    live = top > 0
    if c == 0 or not live.any():
        return out.reshape(v.shape)
    fl = flat[live]
    lo = np.zeros(fl.shape[0])
    hi = top[live].copy()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        u = fl / (1.0 + c * mid[:, None] ** (q - 2) * w2)
        h = mid - np.linalg.norm(np.sqrt(w2) * u, axis=1)
        lo = np.where(h < 0, mid, lo)
        hi = np.where(h < 0, hi, mid)
        if np.all(hi - lo <= 1e-12 * np.maximum(hi, 1e-300)):
            break
    r = 0.5 * (lo + hi)
    out[live] = fl / (1.0 + c * r[:, None] ** (q - 2) * w2)
    return out.reshape(v.shape)


def prox(penalty: Penalty, v, step: float):
    """``argmin_u ||u - v||^2 / (2 step) + pen(u)`` (row-wise for 2-d ``v``)."""
    if not step > 0:
        raise DomainViolationError(f"prox step must be > 0, got {step}")
    v = np.asarray(v, dtype=float)
    if penalty.kind == "zero":
        return v.copy()
    if penalty.kind == "indicator":
        return penalty.domain.project(v)
    w = np.ones(v.shape[-1]) if penalty.norm_weights is None else penalty.norm_weights
    if penalty.kind == "squared" or penalty.q == 2.0:
        return v / (1.0 + 2.0 * step * penalty.weight**2 * w**2)
    return _power_prox(v, step, penalty.weight, penalty.q, w)


def prox_with_domain(penalty: Penalty, domain: Domain | None, v, step: float, tol=1e-13,
                     max_iter=5000):
    """Prox of ``pen + indicator(domain)``.

    Exact shortcuts when one of the two terms is trivial; otherwise the
    proximal Dykstra iteration, which converges to the prox of the sum.
    """
    if domain is None or isinstance(domain, Whole):
        return prox(penalty, v, step)
    if penalty.kind == "zero":
        return domain.project(v)
    x = np.asarray(v, dtype=float).copy()
    p = np.zeros_like(x)
    qv = np.zeros_like(x)
    for _ in range(max_iter):
        y = prox(penalty, x + p, step)
        p = x + p - y
        x_new = domain.project(y + qv)
        qv = y + qv - x_new
        if np.max(np.abs(x_new - x)) <= tol:
            x = x_new
            break
        x = x_new
    return x


# --------------------------------------------------------------------------
# proximal gradient
# --------------------------------------------------------------------------


def minimize_composite(f, grad, penalty: Penalty, x0, settings: SolverSettings | None = None,
                       domain: Domain | None = None, lipschitz: float | None = None):
    """Minimize ``f(x) + pen(x)`` over ``domain`` by proximal gradient.

    ``x0`` may be a stack ``(N, d)`` of independent problems when the step
    is fixed; ``f`` and ``grad`` must then act row-wise.  Backtracking (the
    default) keeps the objective monotone nonincreasing.

    Returns a :class:`SolveResult` whose residual is the fixed-point gap
    ``||x - T(x)||_2`` of the prox-gradient map ``T``.
    """
    settings = settings or SolverSettings()
    L = lipschitz if lipschitz is not None else settings.lipschitz
    fixed = settings.step_rule == "fixed" or (L is not None and settings.step_rule == "fixed")
    x = np.array(x0, dtype=float, copy=True)
    batch = x.ndim > 1
    if batch and not (L and L > 0):
        raise ConfigurationError("batched solves need a known Lipschitz constant")
    if batch:
        fixed = True
    step = 1.0 / L if (fixed and L) else (1.0 / L if L else settings.initial_step)

    def T(z, eta):
        return prox_with_domain(penalty, domain, z - eta * grad(z), eta)

    def F(z):
        return f(z) + penalty(z)

    history = [] if not batch else None
    fx = None if batch else F(x)
    residual = np.inf
    it = 0
    for it in range(1, settings.max_iterations + 1):
        if fixed:
            x_new = T(x, step)
        else:
            gx = grad(x)
            fval = f(x)
            while True:
                x_new = prox_with_domain(penalty, domain, x - step * gx, step)
                d = x_new - x
                if f(x_new) <= fval + gx @ d + (d @ d) / (2 * step) + 1e-15 * abs(fval):
                    break
                step *= settings.backtrack
                if step < 1e-20:
                    break
        residual = np.linalg.norm(x_new - x, axis=-1)
        x = x_new
        if not batch:
            fx = F(x)
            history.append(fx)
        if np.all(residual <= settings.tolerance):
            break
    converged = residual <= settings.tolerance
    obj = F(x) if batch else fx
    return SolveResult(
        minimizer=x,
        objective=obj,
        residual=residual if batch else float(residual),
        iterations=it,
        converged=converged if batch else bool(converged),
        info={"history": history, "step": step},
    )


# --------------------------------------------------------------------------
# estimators
# --------------------------------------------------------------------------


def solve_regularized_ls(Y, penalty: Penalty, settings: SolverSettings | None = None, start=None):
    """``argmin_g ||Y - g||_n^2 + pen(g)``; rows of a 2-d ``Y`` are solved independently."""
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[-1]
    L = 2.0 / n
    settings = settings or SolverSettings(step_rule="fixed", lipschitz=L)

    def f(g):
        return np.sum((Y - g) ** 2, axis=-1) / n

    def grad(g):
        return 2.0 * (g - Y) / n

    x0 = Y.copy() if start is None else np.broadcast_to(np.asarray(start, dtype=float), Y.shape)
    return minimize_composite(f, grad, penalty, x0, settings, lipschitz=L)


def optimality_residual(Y, g, penalty: Penalty):
    """Fixed-point gap of the prox-gradient map at ``g``; zero iff ``g`` is optimal."""
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[-1]
    # with step 1/L = n/2 the gradient step from any g lands exactly on Y
    return np.linalg.norm(np.asarray(g, dtype=float) - prox(penalty, Y, n / 2.0), axis=-1)


def solve_erm(family, penalty: Penalty, dataset: Dataset, oracle: PopulationOracle | None = None,
              settings: SolverSettings | None = None):
    """Regularized empirical risk minimizer ``argmin_g P_n f_g + pen(g)``."""
    settings = settings or SolverSettings()
    if not family.convex_objective:
        raise UnsupportedScenarioError("family declares a nonconvex ERM objective")
    if isinstance(family, FiniteFamily):
        F = family.values(dataset.observations)
        pens = np.array([penalty(p) for p in family.params], dtype=float)
        obj = F.mean(axis=1) + pens
        k = int(np.argmin(obj))
        return SolveResult(family.params[k].copy(), float(obj[k]), 0.0, len(family), True,
                           info={"index": k, "objectives": obj})
    if isinstance(family, LinearFamily):
        m = family.empirical_feature_mean(dataset)
        B = family.B
        L = float(np.linalg.eigvalsh(B).max())

        def f(g):
            return float(m @ g + 0.5 * g @ B @ g + family.const)

        def grad(g):
            return m + B @ g

        x0 = family.domain.project(family.g0) if family.g0 is not None else np.zeros(family.dim)
        return minimize_composite(f, grad, penalty, x0, settings, domain=family.domain,
                                  lipschitz=L if (L > 0 and settings.step_rule == "fixed") else None)
    if isinstance(family, ParametricFamily):
        x = dataset.observations

        def f(g):
            return float(family.evaluate(g, x).mean())

        def grad(g):
            return family.empirical_gradient(g, x)

        x0 = family.g0 if family.g0 is not None else family.domain.project(np.zeros(family.dim))
        return minimize_composite(f, grad, penalty, np.array(x0, dtype=float), settings,
                                  domain=family.domain)
    raise UnsupportedScenarioError(f"no ERM solver for {type(family).__name__}")
