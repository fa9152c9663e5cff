"""Risk curves ``s -> E_n(s)``, their minimizers and the shifted variant.

``E_n(s)`` is the largest value of the centered empirical process
``(P_n - P)(f0 - f)`` over losses with ``tau(f) <= s``; ``E(s)`` is its
expectation, estimated with common random numbers.  The inner maximization
is dispatched on the structure of the family:

* finite families: exhaustive scan;
* linear families, quadratic constraint on the whole space: closed form;
* linear pure families on a centered ellipsoid without penalty: a 1-d dual;
* other linear families: bisection on the Lagrange multiplier with a
  proximal inner solve;
* general parametric families: multi-start SLSQP with a failure flag.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .convex import SolverSettings, minimize_composite, prox_with_domain
from .core import (
    Dataset,
    FiniteFamily,
    LinearFamily,
    ParametricFamily,
    Penalty,
    PopulationOracle,
    excess_risk,
    population_values,
)
from .errors import ConfigurationError, DomainViolationError, UnsupportedScenarioError
from .numerics import golden_min as _golden_min
from .sets import Ball, Box, Ellipsoid, Whole

__all__ = [
    "SGrid",
    "RiskCurve",
    "CurveSampling",
    "InnerMaximizer",
    "make_inner",
    "hat_E",
    "empirical_curve",
    "mean_E_curve",
    "argmin_curve",
    "refine_argmin",
    "verify_minimum_lemma",
    "varsigma_curve",
    "concavity_check",
    "ConcavityVerdict",
    "shifted_curve",
    "kappa_gamma",
    "shifted_ordering_check",
]

TIE_TOL = 1e-9


# --------------------------------------------------------------------------
# grids and curves
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SGrid:
    """Sorted grid of radii ``s`` between ``start`` and ``end``.

    ``rule="geometric"`` uses ratio ``ratio``; ``rule="uniform"`` uses step
    ``step``.  ``end`` is always included.
    """

    start: float
    end: float
    rule: str = "geometric"
    ratio: float = 1.05
    step: float = 1e-3
    tau_min: float = 0.0
    points: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.start > self.end:
            raise ConfigurationError("grid start must not exceed its end")
        if self.start < self.tau_min - 1e-12:
            raise DomainViolationError("grid starts below tau_min")
        if self.points is None:
            if self.rule == "geometric":
                if self.ratio <= 1 or self.start <= 0:
                    raise ConfigurationError("geometric grid needs ratio > 1 and start > 0")
                k = int(math.floor(math.log(self.end / self.start) / math.log(self.ratio) + 1e-12))
                pts = self.start * self.ratio ** np.arange(k + 1)
            elif self.rule == "uniform":
                if self.step <= 0:
                    raise ConfigurationError("uniform grid needs step > 0")
                k = int(math.floor((self.end - self.start) / self.step + 1e-12))
                pts = self.start + self.step * np.arange(k + 1)
            else:
                raise ConfigurationError(f"unknown grid rule {self.rule!r}")
            if pts[-1] < self.end - 1e-12 * max(1.0, self.end):
                pts = np.append(pts, self.end)
            object.__setattr__(self, "points", pts)
        else:
            pts = np.asarray(self.points, dtype=float)
            if pts.size > 1 and np.any(np.diff(pts) <= 0):
                raise ConfigurationError("grid points must be strictly increasing")
            object.__setattr__(self, "points", pts)

    @classmethod
    def from_points(cls, points, tau_min=0.0):
        pts = np.asarray(points, dtype=float)
        return cls(float(pts[0]), float(pts[-1]), rule="explicit", tau_min=tau_min, points=pts)

    @classmethod
    def default(cls, tau_min, tau_max):
        return cls(max(tau_min, 1e-3), tau_max, "geometric", 1.05, tau_min=tau_min)

    def __len__(self):
        return self.points.size

    @property
    def max_step(self):
        return float(np.max(np.diff(self.points))) if self.points.size > 1 else 0.0

    def describe(self):
        return {"start": self.start, "end": self.end, "rule": self.rule, "ratio": self.ratio,
                "step": self.step, "size": int(self.points.size)}


CURVE_KINDS = ("empirical-single", "population-mean", "varsigma", "shifted")


@dataclass
class RiskCurve:
    grid: SGrid
    values: np.ndarray
    kind: str = "empirical-single"
    se: np.ndarray | None = None
    flags: np.ndarray | None = None
    replicates: int = 1
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.kind not in CURVE_KINDS:
            raise ConfigurationError(f"unknown curve kind {self.kind!r}")
        if self.values.shape != self.grid.points.shape:
            raise ConfigurationError("curve length does not match its grid")
        if self.flags is None:
            self.flags = np.zeros(self.values.size, dtype=bool)

    @property
    def s(self):
        return self.grid.points

    def monotone_violations(self, tol=1e-8):
        return int(np.count_nonzero(np.diff(self.values) < -tol))

    def to_csv(self) -> str:
        se = self.se if self.se is not None else np.zeros_like(self.values)
        lines = ["s,value,se,flag"]
        for s, v, e, f in zip(self.s, self.values, se, self.flags):
            lines.append(f"{float(s)!r},{float(v)!r},{float(e)!r},{int(bool(f))}")
        return "\n".join(lines) + "\n"

    def sidecar(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "replicates": self.replicates,
                "grid": self.grid.describe(), **self.meta}

    def sidecar_json(self) -> str:
        return json.dumps(self.sidecar(), sort_keys=True, indent=2)


# --------------------------------------------------------------------------
# inner maximization
# --------------------------------------------------------------------------


class InnerMaximizer:
    """``max {v . (theta - theta0) : c(theta) <= s^2, theta in domain}`` for
    a linear family, with ``c`` either ``tau^2`` or ``varsigma^2``.

    ``values(V, S)`` evaluates rows ``V[b]`` at radii ``S[b]`` and returns
    ``(values, flags)``.
    """

    def __init__(self, family: LinearFamily, penalty: Penalty, kind: str = "tau", c_const: float = 1.0):
        if not isinstance(family, LinearFamily):
            raise UnsupportedScenarioError("InnerMaximizer needs a linear family")
        self.family = family
        self.penalty = penalty
        self.theta0 = family.require_g0()
        d = family.dim
        if kind == "tau":
            A = family.excess_hessian
            lin = family.mean_feature + family.B @ self.theta0
        elif kind == "varsigma":
            if c_const <= 0:
                raise ConfigurationError("the varsigma constant must be > 0")
            A = c_const**2 * family.feature_cov
            lin = np.zeros(d)
        else:
            raise ConfigurationError(f"unknown constraint kind {kind!r}")
        self.A = np.asarray(A, dtype=float)
        self.lin = lin if np.any(np.abs(lin) > 1e-14) else np.zeros(d)
        self.domain = family.domain
        self.mode = self._choose_mode()

    # ---- helpers -----------------------------------------------------
    def constraint(self, theta):
        delta = np.asarray(theta, dtype=float) - self.theta0
        quad = np.einsum("...i,ij,...j->...", delta, self.A, delta)
        return quad + delta @ self.lin + self.penalty(theta)

    def _scalar_A(self):
        a = self.A[0, 0]
        if a > 0 and np.allclose(self.A, a * np.eye(self.A.shape[0]), rtol=0, atol=1e-14 * a):
            return float(a)
        return None

    def _choose_mode(self):
        whole = isinstance(self.domain, Whole)
        pen = self.penalty
        flat = not np.any(self.lin)
        if whole and flat and pen.kind in ("zero", "squared"):
            W = np.zeros(self.A.shape) if pen.kind == "zero" else np.diag(
                (np.ones(self.A.shape[0]) if pen.norm_weights is None else pen.norm_weights) ** 2)
            Q = self.A + pen.weight**2 * W
            eig = np.linalg.eigvalsh(Q)
            if eig.min() > 1e-12 * max(eig.max(), 1.0):
                lam2W = pen.weight**2 * W
                self.Q = Q
                self.Qinv = np.linalg.inv(Q)
                self.m = -self.Qinv @ lam2W @ self.theta0
                self.kappa = float(self.theta0 @ lam2W @ self.theta0 - self.m @ Q @ self.m)
                return "quadratic"
        if (isinstance(self.domain, Ellipsoid) and pen.kind == "zero" and flat
                and np.allclose(self.theta0, 0) and self._scalar_A() is not None):
            return "ellipsoid"
        if (whole and flat and pen.kind == "power" and 1.0 < pen.q < 2.0 and pen.weight > 0
                and np.allclose(self.theta0, 0) and self._scalar_A() is not None):
            return "power"
        return "lagrange"

    @property
    def tau_min2(self):
        if self.mode == "quadratic":
            return max(self.kappa, 0.0)
        if self.mode in ("ellipsoid", "power"):
            return 0.0
        theta = self._theta_of_mu(np.zeros((1, self.A.shape[0])), np.array([np.inf]))
        return float(self.constraint(theta[0]))

    # ---- closed form --------------------------------------------------
    def _quadratic(self, V, S):
        qv = np.sqrt(np.maximum(np.einsum("bi,ij,bj->b", V, self.Qinv, V), 0.0))
        room = S**2 - self.kappa
        flags = room < -1e-12 * max(1.0, abs(self.kappa))
        val = V @ self.m + np.sqrt(np.maximum(room, 0.0)) * qv
        return val, flags

    def _quadratic_argmax(self, v, s):
        qv = math.sqrt(max(v @ self.Qinv @ v, 0.0))
        room = math.sqrt(max(s * s - self.kappa, 0.0))
        step = self.Qinv @ v / qv if qv > 0 else np.zeros_like(v)
        return self.theta0 + self.m + room * step

    # ---- ellipsoid dual -----------------------------------------------
    def _ellipsoid(self, V, S):
        a = self._scalar_A()
        w = self.domain.weights
        R2 = self.domain.radius**2
        V2 = V**2 / a
        s2 = S**2

        def dual(t):
            rho = t / (1.0 - t)
            Sr = np.sum(V2 / (1.0 + rho[:, None] * w), axis=1)
            return np.sqrt(Sr * (s2 + rho * R2))

        ub = 1.0 - 1e-13
        t, val = _golden_min(dual, np.zeros(len(S)), np.full(len(S), ub))
        # endpoints are admissible values of the dual as well
        val = np.minimum(val, np.minimum(dual(np.zeros(len(S))), dual(np.full(len(S), ub))))
        return val, np.zeros(len(S), dtype=bool)

    # ---- power penalty around zero -----------------------------------
    def _power_point(self, V, logc):
        """Stationary point indexed by ``c = lam^2 q r^(q-2)``, ``r = ||w theta||``.

        Returns ``(s^2, value)`` along the path.
        """
        a = self._scalar_A()
        pen = self.penalty
        lam2, q = pen.weight**2, pen.q
        w2 = np.ones(V.shape[1]) if pen.norm_weights is None else np.asarray(pen.norm_weights) ** 2
        c = np.exp(logc)
        U = V / (2.0 * a + c[:, None] * w2)
        r = np.exp((logc - math.log(lam2 * q)) / (q - 2.0))
        mu = np.sqrt(np.einsum("bi,i,bi->b", U, w2, U)) / r
        mu = np.where(mu > 0, mu, 1.0)
        s2 = a * np.einsum("bi,bi->b", U, U) / mu**2 + lam2 * r**q
        return s2, np.einsum("bi,bi->b", V, U) / mu

    def _power(self, V, S):
        B = V.shape[0]
        s2 = S**2
        lo = np.full(B, -50.0)
        hi = np.full(B, 50.0)
        for _ in range(60):
            big, _ = self._power_point(V, lo)
            widen = big < s2
            if not widen.any():
                break
            lo = np.where(widen, lo - 50.0, lo)
        for _ in range(60):
            small, _ = self._power_point(V, hi)
            widen = small > s2
            if not widen.any():
                break
            hi = np.where(widen, hi + 50.0, hi)
        for _ in range(200):
            if np.all(hi - lo <= 1e-13 * np.maximum(1.0, np.abs(lo) + np.abs(hi))):
                break
            mid = 0.5 * (lo + hi)
            sm, _ = self._power_point(V, mid)
            # s^2 decreases in c
            lo = np.where(sm > s2, mid, lo)
            hi = np.where(sm > s2, hi, mid)
        _, val = self._power_point(V, 0.5 * (lo + hi))
        zero = ~np.any(V != 0, axis=1) | (S <= 0)
        return np.where(zero, 0.0, val), np.zeros(B, dtype=bool)

    # ---- Lagrangian path ----------------------------------------------
    def _theta_of_mu(self, V, mu):
        """Minimizer of ``c(theta) - v . theta / mu`` over the domain (row-wise)."""
        a = self._scalar_A()
        inv = np.where(np.isinf(mu), 0.0, 1.0 / np.where(np.isinf(mu), 1.0, mu))[:, None]
        lin = self.lin - V * inv
        if a is not None:
            Z = self.theta0 - lin / (2 * a)
            return prox_with_domain(self.penalty, self.domain, Z, 1.0 / (2 * a))
        L = 2.0 * float(np.linalg.eigvalsh(self.A).max())
        A, th0 = self.A, self.theta0

        def f(th):
            dl = th - th0
            return np.einsum("bi,ij,bj->b", dl, A, dl) + np.einsum("bi,bi->b", lin, dl)

        def grad(th):
            return 2 * (th - th0) @ A + lin

        x0 = np.broadcast_to(self.domain.project(th0), V.shape).copy()
        res = minimize_composite(f, grad, self.penalty, x0,
                                 SolverSettings("fixed", L, 200_000, 1e-12), self.domain, L)
        return res.minimizer

    def _lagrange(self, V, S):
        B = V.shape[0]
        s2 = S**2
        vn = np.linalg.norm(V, axis=1)
        a = self._scalar_A() or float(np.linalg.eigvalsh(self.A).max())
        mu0 = np.where(vn > 0, vn / (2 * np.maximum(S, 1e-300) * math.sqrt(a)), 1.0)

        def phi(mu):
            th = self._theta_of_mu(V, mu)
            return self.constraint(th) - s2, th

        flags = np.zeros(B, dtype=bool)
        hi = mu0.copy()
        ph, _ = phi(hi)
        for _ in range(80):
            bad = ph > 1e-14 * np.maximum(1.0, s2)
            if not bad.any():
                break
            hi = np.where(bad, hi * 4.0, hi)
            ph, _ = phi(hi)
        flags |= ph > 1e-10 * np.maximum(1.0, s2)
        lo = mu0.copy()
        pl, _ = phi(lo)
        slack_rows = np.zeros(B, dtype=bool)
        for _ in range(80):
            good = pl <= 0
            if not good.any():
                break
            lo = np.where(good, lo / 4.0, lo)
            pl, _ = phi(lo)
        slack_rows = pl <= 0  # constraint inactive even for tiny mu
        hi = np.where(slack_rows, lo, hi)
        lo = np.where(slack_rows, lo, np.minimum(lo, hi))
        for _ in range(200):
            active = ~slack_rows & (np.log(hi) - np.log(lo) > 1e-14)
            if not active.any():
                break
            mid = np.exp(0.5 * (np.log(lo) + np.log(hi)))
            pm, _ = phi(mid)
            big = pm > 0
            lo = np.where(active & big, mid, lo)
            hi = np.where(active & ~big, mid, hi)
        th = self._theta_of_mu(V, hi)
        val = np.einsum("bi,bi->b", V, th - self.theta0)
        zero = vn == 0
        val = np.where(zero, 0.0, val)
        return val, flags

    # ---- public ---------------------------------------------------------
    def values(self, V, S):
        V = np.atleast_2d(np.asarray(V, dtype=float))
        S = np.broadcast_to(np.asarray(S, dtype=float), (V.shape[0],)).copy()
        if self.mode == "quadratic":
            return self._quadratic(V, S)
        if self.mode == "ellipsoid":
            return self._ellipsoid(V, S)
        if self.mode == "power":
            return self._power(V, S)
        return self._lagrange(V, S)

    def curve(self, v, s_points):
        """Values for one process vector over many radii."""
        s_points = np.asarray(s_points, dtype=float)
        V = np.broadcast_to(np.asarray(v, dtype=float), (s_points.size, np.size(v)))
        return self.values(V, s_points)

    def batch_curve(self, V, s_points):
        """``(R, m)`` table of values for ``R`` process vectors and ``m`` radii."""
        V = np.atleast_2d(np.asarray(V, dtype=float))
        s_points = np.asarray(s_points, dtype=float)
        R, m = V.shape[0], s_points.size
        Vr = np.repeat(V, m, axis=0)
        Sr = np.tile(s_points, R)
        vals, flags = self.values(Vr, Sr)
        return vals.reshape(R, m), flags.reshape(R, m)


class _FiniteInner:
    """Exhaustive maximization for finite families."""

    def __init__(self, family: FiniteFamily, penalty, oracle, kind="tau", c_const=1.0):
        self.family = family
        risks, tau2, var = population_values(family, penalty, oracle)
        pens = np.array([penalty(p) for p in family.params], dtype=float)
        self.risks = risks
        if kind == "tau":
            self.c2 = tau2
        elif kind == "varsigma":
            if c_const <= 0:
                raise ConfigurationError("the varsigma constant must be > 0")
            self.c2 = c_const**2 * var + pens
        else:
            raise ConfigurationError(f"unknown constraint kind {kind!r}")
        self.radius = np.sqrt(np.maximum(self.c2, 0.0))
        self.tau_min2 = float(self.c2.min())

    def process(self, dataset):
        """``D[k] = (P_n - P)(f0 - f_k)``."""
        F = self.family.values(dataset.observations)
        emp = F.mean(axis=1)
        k0 = self.family.g0_index
        return (emp[k0] - emp) - (self.risks[k0] - self.risks)

    def curve(self, D, s_points, tol=1e-12):
        s_points = np.asarray(s_points, dtype=float)
        feas = self.radius[None, :] <= s_points[:, None] + tol
        vals = np.where(feas, np.asarray(D)[None, :], -np.inf).max(axis=1)
        return vals, ~np.isfinite(vals)

    def argmax(self, D, s, tol=1e-12):
        feas = self.radius <= s + tol
        return int(np.argmax(np.where(feas, D, -np.inf)))


class _ParametricInner:
    """Multi-start SLSQP for general smooth families; population parts by quadrature."""

    def __init__(self, family: ParametricFamily, penalty, oracle, kind="tau", c_const=1.0, starts=8,
                 seed=0):
        if oracle.mode == "closed-form":
            raise UnsupportedScenarioError("parametric families need a quadrature or Monte Carlo oracle")
        if not isinstance(family.domain, (Whole, Box, Ball)):
            raise UnsupportedScenarioError("multi-start inner solver supports Whole, Box and Ball domains")
        self.family, self.penalty, self.oracle = family, penalty, oracle
        self.kind, self.c = kind, c_const
        self.starts, self.seed = starts, seed
        self.g0 = family.require_g0()
        self.r0 = oracle.risk(family, self.g0)

    def constraint(self, g):
        if self.kind == "tau":
            return self.oracle.risk(self.family, g) - self.r0 + self.penalty(g)
        return self.c**2 * self.oracle.variance(self.family, g) + self.penalty(g)

    def value_at(self, g, x):
        fam = self.family
        emp = fam.evaluate(self.g0, x).mean() - fam.evaluate(g, x).mean()
        return emp - (self.r0 - self.oracle.risk(fam, g))

    def value(self, dataset, s):
        x = dataset.observations
        dom = self.family.domain
        cons = [{"type": "ineq", "fun": lambda g: s * s - self.constraint(g)}]
        bounds = None
        if isinstance(dom, Box):
            bounds = list(zip(dom.lower, dom.upper))
        elif isinstance(dom, Ball):
            c = 0.0 if dom.center is None else dom.center
            cons.append({"type": "ineq", "fun": lambda g: dom.radius**2 - np.sum((g - c) ** 2)})
        rng = np.random.default_rng(self.seed)
        d = self.g0.size
        starts = [self.g0.copy()]
        starts += list(self.g0 + 0.1 * max(s, 1e-3) * rng.standard_normal((self.starts - 1, d)))
        best, ok_any = 0.0 if self.constraint(self.g0) <= s * s + 1e-12 else -np.inf, False
        for g_start in starts:
            res = minimize(lambda g: -self.value_at(g, x), dom.project(g_start), method="SLSQP",
                           bounds=bounds, constraints=cons, options={"ftol": 1e-12, "maxiter": 500})
            g = res.x
            if self.constraint(g) <= s * s + 1e-8 and dom.contains(g, 1e-8):
                ok_any = ok_any or res.success
                best = max(best, self.value_at(g, x))
        return float(best), not ok_any


def make_inner(family, penalty, oracle=None, kind="tau", c_const=1.0):
    """Build the inner maximizer appropriate for ``family``."""
    if isinstance(family, FiniteFamily):
        return _FiniteInner(family, penalty, oracle or PopulationOracle.closed_form(), kind, c_const)
    if isinstance(family, LinearFamily) and (oracle is None or oracle.mode == "closed-form"):
        return InnerMaximizer(family, penalty, kind, c_const)
    if isinstance(family, (ParametricFamily, LinearFamily)):
        return _ParametricInner(family, penalty, oracle, kind, c_const)
    raise UnsupportedScenarioError(f"no inner maximizer for {type(family).__name__}")


def _process(inner, dataset):
    if isinstance(inner, InnerMaximizer):
        return inner.family.process_vector(dataset)
    if isinstance(inner, _FiniteInner):
        return inner.process(dataset)
    return dataset


def _curve_values(inner, proc, s_points):
    s_points = np.atleast_1d(np.asarray(s_points, dtype=float))
    if isinstance(inner, (InnerMaximizer, _FiniteInner)):
        return inner.curve(proc, s_points)
    out = [inner.value(proc, s) for s in s_points]
    return np.array([o[0] for o in out]), np.array([o[1] for o in out])


def _check_radius(inner, s):
    tm = math.sqrt(max(inner.tau_min2, 0.0)) if not isinstance(inner, _ParametricInner) else 0.0
    if np.min(s) < tm - 1e-12:
        raise DomainViolationError(f"s={np.min(s)} is below tau_min={tm}")


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------


def hat_E(family, penalty: Penalty, dataset: Dataset, oracle: PopulationOracle | None, s: float,
          kind: str = "tau", c_const: float = 1.0, return_flag: bool = False):
    """``E_n(s) = max {(P_n - P)(f0 - f) : tau(f) <= s}``."""
    inner = make_inner(family, penalty, oracle, kind, c_const)
    _check_radius(inner, s)
    vals, flags = _curve_values(inner, _process(inner, dataset), [s])
    return (float(vals[0]), bool(flags[0])) if return_flag else float(vals[0])


def empirical_curve(family, penalty, dataset, oracle, grid: SGrid, kind="tau", c_const=1.0):
    """``E_n`` (or its varsigma version) on every grid point for one sample."""
    inner = make_inner(family, penalty, oracle, kind, c_const)
    _check_radius(inner, grid.points[0])
    vals, flags = _curve_values(inner, _process(inner, dataset), grid.points)
    ck = "empirical-single" if kind == "tau" else "varsigma"
    return RiskCurve(grid, vals, ck, flags=flags, meta={"c_const": c_const} if kind != "tau" else {})


@dataclass(frozen=True)
class CurveSampling:
    """How to draw replicate samples: ``sampler(rng, n)`` returns a Dataset
    (or an array, wrapped as a scalar/vector dataset)."""

    sampler: Callable
    n: int
    replicates: int = 200
    seed: int = 0

    def dataset(self, i):
        rng = np.random.Generator(np.random.PCG64([self.seed, i]))
        out = self.sampler(rng, self.n)
        if isinstance(out, Dataset):
            return out
        out = np.asarray(out, dtype=float)
        return Dataset(out, "scalar" if out.ndim == 1 else "vector")


def mean_E_curve(family, penalty, spec: CurveSampling, grid: SGrid, oracle=None, kind="tau",
                 c_const=1.0, keep_replicates=False):
    """Monte Carlo mean of ``E_n(s)`` with standard errors.

    The same replicate samples are used at every grid point (common random
    numbers), so each replicate curve and hence the mean is monotone.
    """
    if spec.replicates < 2:
        raise ConfigurationError("mean curve needs at least 2 replicates")
    inner = make_inner(family, penalty, oracle, kind, c_const)
    _check_radius(inner, grid.points[0])
    procs = [_process(inner, spec.dataset(i)) for i in range(spec.replicates)]
    if isinstance(inner, InnerMaximizer):
        table, flags = inner.batch_curve(np.array(procs), grid.points)
    else:
        rows = [_curve_values(inner, p, grid.points) for p in procs]
        table = np.array([r[0] for r in rows])
        flags = np.array([r[1] for r in rows])
    curve = RiskCurve(grid, table.mean(axis=0), "population-mean",
                      se=table.std(axis=0, ddof=1) / math.sqrt(spec.replicates),
                      flags=flags.any(axis=0), replicates=spec.replicates, seed=spec.seed)
    if keep_replicates:
        curve.meta["replicate_values"] = table
    return curve


@dataclass
class ArgminResult:
    s: float
    value: float
    ties: list
    index: int


def argmin_curve(curve, values=None) -> ArgminResult:
    """Grid minimizer of ``s^2 - curve(s)``; the smallest ``s`` wins ties.

    Accepts a :class:`RiskCurve` or a pair ``(s_points, values)``.
    """
    if isinstance(curve, RiskCurve):
        s, v = curve.s, curve.values
    else:
        s, v = np.asarray(curve, dtype=float), np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ConfigurationError("curve values must be finite")
    obj = s**2 - v
    best = obj.min()
    near = np.flatnonzero(obj <= best + TIE_TOL)
    k = int(near[0])
    return ArgminResult(float(s[k]), float(obj[k]), [float(s[j]) for j in near], k)


def refine_argmin(fun, lo, hi, iters=200):
    """Golden-section refinement of ``argmin s^2 - fun(s)`` on ``[lo, hi]``."""
    x, val = _golden_min(lambda z: z**2 - np.array([fun(zz) for zz in np.atleast_1d(z)]),
                         np.array([lo]), np.array([hi]), iters)
    return float(x[0]), float(val[0])


@dataclass
class MinimumLemmaResult:
    tau_hat: float
    s_hat: float
    gap: float
    grid_step: float


def verify_minimum_lemma(family, penalty, dataset, oracle=None, grid: SGrid | None = None,
                         settings=None) -> MinimumLemmaResult:
    """Compare ``tau(f_hat)`` of the ERM with the empirical argmin ``s_hat``.

    For finite families both sides are exhaustive and the grid is the set of
    member radii, so the two must agree exactly.
    """
    from .convex import solve_erm

    oracle = oracle or PopulationOracle.closed_form()
    inner = make_inner(family, penalty, oracle)
    if isinstance(inner, _FiniteInner):
        D = inner.process(dataset)
        radii = np.unique(inner.radius)
        vals, _ = inner.curve(D, radii)
        res = argmin_curve(radii, vals)
        erm = solve_erm(family, penalty, dataset, oracle)
        tau_hat = float(inner.radius[erm.info["index"]])
        return MinimumLemmaResult(tau_hat, res.s, abs(tau_hat - res.s), 0.0)
    if grid is None:
        raise ConfigurationError("a grid spanning [tau_min, tau_max] is required")
    erm = solve_erm(family, penalty, dataset, oracle, settings)
    tau_hat = math.sqrt(max(excess_risk(family, erm.minimizer, penalty, oracle), 0.0))
    vals, _ = _curve_values(inner, _process(inner, dataset), grid.points)
    res = argmin_curve(grid.points, vals)
    return MinimumLemmaResult(tau_hat, res.s, abs(tau_hat - res.s), grid.max_step)


def varsigma_curve(family, penalty, dataset, oracle, c_const, grid: SGrid) -> RiskCurve:
    """``max {(P_n - P)(f0 - f) : c^2 sigma^2(f - f0) + pen(f) <= s^2}`` on the grid."""
    if not c_const > 0:
        raise ConfigurationError("c_const must be > 0")
    return empirical_curve(family, penalty, dataset, oracle, grid, "varsigma", c_const)


@dataclass
class ConcavityVerdict:
    passed: bool
    counterexample: tuple | None = None
    violation: float = 0.0
    checked: int = 0


def concavity_check(curve, values=None, tol=1e-8) -> ConcavityVerdict:
    """Midpoint concavity over all triples ``(s_i, (s_i+s_k)/2, s_k)`` present in the grid."""
    if isinstance(curve, RiskCurve):
        s, v = curve.s, curve.values
    else:
        s, v = np.asarray(curve, dtype=float), np.asarray(values, dtype=float)
    if s.size < 3:
        raise ConfigurationError("concavity check needs at least 3 points")
    scale = max(1.0, float(np.max(np.abs(s))))
    checked = 0
    worst = (0.0, None)
    for i in range(s.size - 2):
        mids = 0.5 * (s[i] + s[i + 2:])
        j = np.searchsorted(s, mids)
        j = np.clip(j, 0, s.size - 1)
        hit = np.abs(s[j] - mids) <= 1e-9 * scale
        if not hit.any():
            continue
        ks = np.arange(i + 2, s.size)[hit]
        js = j[hit]
        gap = 0.5 * (v[i] + v[ks]) - v[js]
        checked += ks.size
        m = int(np.argmax(gap))
        if gap[m] > worst[0]:
            worst = (float(gap[m]), (float(s[i]), float(s[js[m]]), float(s[ks[m]])))
    if worst[0] > tol:
        return ConcavityVerdict(False, worst[1], worst[0], checked)
    return ConcavityVerdict(True, None, worst[0], checked)


def shifted_curve(family, penalty, dataset, oracle, tau_star2: float, grid_tilde: SGrid) -> RiskCurve:
    """``F(s~) = max {(P_n - P)(f0 - f) : tau^2(f) <= tau*^2 + s~^2}``."""
    inner = make_inner(family, penalty, oracle)
    tm2 = inner.tau_min2 if not isinstance(inner, _ParametricInner) else 0.0
    if tau_star2 < tm2 - 1e-12:
        raise DomainViolationError("tau*^2 must be at least tau_min^2")
    st = grid_tilde.points
    if np.any(st**2 < tau_star2 * 0 + (tm2 - tau_star2) - 1e-12):
        raise DomainViolationError("grid points must satisfy s~^2 >= tau_min^2 - tau*^2")
    radii = np.sqrt(tau_star2 + st**2)
    vals, flags = _curve_values(inner, _process(inner, dataset), radii)
    return RiskCurve(grid_tilde, vals, "shifted", flags=flags, meta={"tau_star2": tau_star2})


def kappa_gamma(family, penalty, oracle, tau_star2, s_grid):
    """``kappa_s = sqrt(max {P(f - f0) : tau^2(f) <= tau*^2 + s^2})`` and ``max_s kappa_s / s``."""
    s = np.asarray(s_grid.points if isinstance(s_grid, SGrid) else s_grid, dtype=float)
    r2 = tau_star2 + s**2
    if isinstance(family, FiniteFamily):
        risks, tau2, _ = population_values(family, penalty, oracle or PopulationOracle.closed_form())
        excess = risks - risks[family.g0_index]
        feas = tau2[None, :] <= r2[:, None] + 1e-12
        kappa2 = np.where(feas, excess[None, :], -np.inf).max(axis=1)
    elif isinstance(family, LinearFamily) and family.is_pure and isinstance(family.domain, Whole):
        if penalty.kind == "zero":
            kappa2 = r2
        elif penalty.kind == "squared" and np.allclose(family.g0, 0):
            w = np.ones(family.dim) if penalty.norm_weights is None else penalty.norm_weights
            kappa2 = r2 / (1.0 + penalty.weight**2 * np.min(w**2))
        else:
            raise UnsupportedScenarioError("kappa_s maximization is nonconvex for this penalty")
    else:
        raise UnsupportedScenarioError("kappa_s is only available for finite and pure families")
    kappa = np.sqrt(np.maximum(kappa2, 0.0))
    with np.errstate(divide="ignore"):
        ratio = np.where(s > 0, kappa / np.where(s > 0, s, 1.0), np.inf)
    return kappa, float(np.max(ratio))


def shifted_ordering_check(s, s0, tau_star2):
    """``|s~ - s_*| >= |s - s0|`` with ``s~ = sqrt(s^2 - tau*^2)``, ``s_* = sqrt(s0^2 - tau*^2)``.

    Vectorized; returns ``(holds, lhs, rhs)``.
    """
    s, s0, t2 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (s, s0, tau_star2)))
    if np.any(s**2 < t2 - 1e-15) or np.any(s0**2 < t2 - 1e-15):
        raise DomainViolationError("need s^2 >= tau*^2 and s0^2 >= tau*^2")
    st = np.sqrt(np.maximum(s**2 - t2, 0.0))
    ss = np.sqrt(np.maximum(s0**2 - t2, 0.0))
    lhs = np.abs(st - ss)
    rhs = np.abs(s - s0)
    return lhs >= rhs - 1e-12 * np.maximum(1.0, rhs), lhs, rhs
