"""Margin functions, convex conjugates and the deviation-bound evaluators.

Everything here is a pure function of its numeric inputs.  Bounds that
involve unnamed constants take them as arguments (``c0`` defaults to
``4 (C + 1) + 2 (K + 1)``).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import ConditionViolationError, ConfigurationError, DomainViolationError
from .numerics import golden_min

__all__ = [
    "MarginFunction",
    "Complexity",
    "CurvatureParams",
    "MarginCertificate",
    "fenchel_conjugate",
    "phi_and_r0",
    "check_margin",
    "quadratic_margin_constant",
    "approx_concave_gap",
    "default_c0",
    "delta_bound",
    "delta_bound_shifted",
    "klein_rio_interval",
    "curvature_interval",
    "envelope_interval",
    "margin_helper_check",
]


# --------------------------------------------------------------------------
# conjugates
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConjugateValue:
    value: float
    argmax: float
    at_boundary: bool


def fenchel_conjugate(fn: Callable, v, search_interval=(0.0, 1e3), return_info=False):
    """``sup_u {v u - fn(u)}`` over ``search_interval`` by golden section.

    ``fn`` must be convex on the interval and vectorized.  When the maximizer
    sits at an end of the interval the boundary flag is raised (the interval
    is then probably too small).
    """
    v_arr = np.atleast_1d(np.asarray(v, dtype=float))
    if np.any(v_arr <= 0):
        raise DomainViolationError("the conjugate is evaluated at v > 0 only")
    a, b = map(float, search_interval)
    if not a < b:
        raise ConfigurationError("search interval must have a < b")
    u, neg = golden_min(lambda z: -(v_arr * z - np.asarray(fn(z), dtype=float)),
                        np.full(v_arr.shape, a), np.full(v_arr.shape, b), iters=400, tol=1e-15)
    # keep the endpoints as candidates so a boundary maximum is exact
    ends = [np.full(v_arr.shape, a), np.full(v_arr.shape, b)]
    vals = [-neg] + [v_arr * e - np.asarray(fn(e), dtype=float) for e in ends]
    cand = [u] + ends
    best = np.argmax(np.vstack(vals), axis=0)
    value = np.choose(best, vals)
    arg = np.choose(best, cand)
    width = b - a
    boundary = (arg - a <= 1e-8 * width) | (b - arg <= 1e-8 * width)
    if np.ndim(v) == 0:
        value, arg, boundary = float(value[0]), float(arg[0]), bool(boundary[0])
    if return_info:
        return ConjugateValue(value, arg, boundary)
    return value


# --------------------------------------------------------------------------
# margin functions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MarginFunction:
    """Strictly convex increasing ``G`` with ``G(0) = 0``.

    ``quadratic`` kind: ``G(u) = u^2 / (2 c^2)`` with ``G*(v) = c^2 v^2 / 2``.
    ``tabulated`` kind: an arbitrary vectorized callable (or a table of
    ``(u, G(u))`` nodes, interpolated linearly and extended linearly).
    """

    kind: str
    c: float | None = None
    fn: Callable | None = field(default=None, compare=False)
    u_max: float = 1e3

    def __post_init__(self):
        if self.kind == "quadratic":
            if not (self.c and self.c > 0):
                raise ConfigurationError("quadratic margin needs c > 0")
        elif self.kind == "tabulated":
            if self.fn is None:
                raise ConfigurationError("tabulated margin needs an evaluator")
            if abs(float(np.asarray(self.fn(np.array([0.0])))[0])) > 1e-12:
                raise ConfigurationError("margin function must vanish at 0")
        else:
            raise ConfigurationError(f"unknown margin kind {self.kind!r}")

    @classmethod
    def quadratic(cls, c):
        return cls("quadratic", c=float(c))

    @classmethod
    def from_callable(cls, fn, u_max=1e3):
        return cls("tabulated", fn=fn, u_max=u_max)

    @classmethod
    def tabulated(cls, u, g):
        u = np.asarray(u, dtype=float)
        g = np.asarray(g, dtype=float)
        if u[0] != 0 or g[0] != 0 or np.any(np.diff(u) <= 0) or np.any(np.diff(g) <= 0):
            raise ConfigurationError("table must start at (0, 0) and be strictly increasing")
        slope = (g[-1] - g[-2]) / (u[-1] - u[-2])

        def fn(x):
            x = np.asarray(x, dtype=float)
            return np.where(x <= u[-1], np.interp(x, u, g), g[-1] + slope * (x - u[-1]))

        return cls("tabulated", fn=fn, u_max=float(u[-1]) * 10)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "quadratic":
            out = u**2 / (2 * self.c**2)
        else:
            out = np.asarray(self.fn(np.atleast_1d(u)), dtype=float).reshape(u.shape)
        return float(out) if out.ndim == 0 else out

    def conjugate(self, v):
        if self.kind == "quadratic":
            v = np.asarray(v, dtype=float)
            out = self.c**2 * v**2 / 2
            return float(out) if out.ndim == 0 else out
        return fenchel_conjugate(self.__call__, v, (0.0, self.u_max))

    def inverse(self, y, tol=1e-14):
        """Smallest ``u >= 0`` with ``G(u) >= y`` (bisection)."""
        if y <= 0:
            return 0.0
        if self.kind == "quadratic":
            return self.c * math.sqrt(2 * y)
        lo, hi = 0.0, 1.0
        while self(hi) < y:
            hi *= 2.0
            if hi > 1e300:
                raise ConditionViolationError("margin function is bounded; cannot invert")
        while hi - lo > tol * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if self(mid) >= y:
                hi = mid
            else:
                lo = mid
        return hi


@dataclass(frozen=True)
class Complexity:
    """Strictly increasing majorant ``J`` with its inverse.

    ``Complexity.power(A, p)`` is ``J(s) = A s^p``; a generic ``J`` is
    inverted numerically on ``[s_lo, s_hi]``.
    """

    J: Callable
    inverse: Callable | None = None
    A: float | None = None
    p: float | None = None
    s_hi: float = 1e6

    @classmethod
    def power(cls, A, p):
        if A <= 0 or p <= 0:
            raise ConfigurationError("power complexity needs A > 0 and p > 0")
        return cls(lambda s: A * np.asarray(s, dtype=float) ** p,
                   lambda u: (np.asarray(u, dtype=float) / A) ** (1.0 / p), float(A), float(p))

    def inv(self, u):
        if self.inverse is not None:
            return self.inverse(u)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        lo = np.zeros_like(u)
        hi = np.full_like(u, self.s_hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            big = np.asarray(self.J(mid)) >= u
            hi = np.where(big, mid, hi)
            lo = np.where(big, lo, mid)
        return hi


@dataclass(frozen=True)
class CurvatureParams:
    K: float
    C: float
    m_n: float | None = None
    J: Complexity | None = None
    c_F: float | None = None
    C_F: float | None = None
    Gamma: float | None = None
    K_s: float | None = None

    def __post_init__(self):
        for name in ("K", "C", "m_n", "c_F", "C_F", "Gamma", "K_s"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ConfigurationError(f"{name} must be strictly positive")

    @property
    def K_interval(self):
        """The sup bound used by interval evaluators (local one when supplied)."""
        return self.K_s if self.K_s is not None else self.K


def phi_and_r0(J: Complexity, m_n, K, C, check_grid=None):
    """``Phi_J(u) = [J^{-1}(u)]^2`` and ``r0 = sqrt(2 C^2 Phi_J^*(4K / (m_n C^2)))``.

    Returns ``(Phi, r0, Phi_star)``.  Strict convexity of ``Phi_J`` is
    checked on a grid; failure raises :class:`ConditionViolationError`.
    """

    def Phi(u):
        return np.asarray(J.inv(u), dtype=float) ** 2

    grid = np.linspace(0.0, 10.0, 401) if check_grid is None else np.asarray(check_grid, dtype=float)
    vals = Phi(grid)
    h = grid[1] - grid[0]
    second = (vals[2:] - 2 * vals[1:-1] + vals[:-2]) / h**2
    scale = max(1.0, float(np.max(np.abs(vals))))
    if np.any(second <= 1e-9 * scale):
        raise ConditionViolationError("Phi_J is not strictly convex on the check grid")
    if J.A is not None and J.p is not None:
        k = 2.0 / J.p

        def Phi_star(v):
            v = np.asarray(v, dtype=float)
            return (k - 1.0) * (J.A * v / k) ** (k / (k - 1.0))
    else:

        def Phi_star(v):
            return fenchel_conjugate(Phi, v, (0.0, float(grid[-1]) * 100))

    arg = 4.0 * K / (m_n * C**2)
    r0 = math.sqrt(2.0 * C**2 * float(Phi_star(arg)))
    return Phi, r0, Phi_star


# --------------------------------------------------------------------------
# margin certificates
# --------------------------------------------------------------------------


@dataclass
class MarginCertificate:
    left_range: tuple
    right_range: tuple
    s0: float
    gap: float
    margin: str
    passed: bool
    counterexample: dict | None = None
    worst_slack: float = 0.0
    checked: int = 0

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, indent=2)


def check_margin(curve, s0, G: MarginFunction, delta_gap=0.0, values=None, se=None, s0_value=None,
                 s0_se=0.0, right_only=False, n_se=3.0, tol=1e-12) -> MarginCertificate:
    """Check ``[s^2 - E(s)] - [s0^2 - E(s0)] >= G(|s - s0|)`` on the curve grid.

    Points with ``s0 < s <= s0 + delta_gap`` are skipped.  A point fails only
    if the inequality is violated by more than ``n_se`` combined standard
    errors (``se(s) + se(s0)``).  ``curve`` is a RiskCurve or an array of
    radii (then pass ``values`` and optionally ``se``).
    """
    if hasattr(curve, "values"):
        s, v = curve.s, curve.values
        se = curve.se if se is None else se
    else:
        s, v = np.asarray(curve, dtype=float), np.asarray(values, dtype=float)
    se = np.zeros_like(v) if se is None else np.asarray(se, dtype=float)
    if s0_value is None:
        s0_value = float(np.interp(s0, s, v))
        s0_se = float(np.interp(s0, s, se))
    lhs = (s**2 - v) - (s0**2 - s0_value)
    rhs = np.asarray(G(np.abs(s - s0)), dtype=float)
    slack = lhs - rhs + n_se * (se + s0_se)
    mask = s > s0 + delta_gap
    if not right_only:
        mask |= s < s0
    mask &= np.abs(s - s0) > 0
    ranges_left = (float(s[0]), float(s0)) if not right_only else (float(s0), float(s0))
    right = (float(s0 + delta_gap), float(s[-1]))
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return MarginCertificate(ranges_left, right, float(s0), float(delta_gap), G.kind, True, None,
                                 0.0, 0)
    worst = idx[np.argmin(slack[idx])]
    passed = bool(slack[worst] >= -tol)
    ce = None
    if not passed:
        ce = {"s": float(s[worst]), "lhs": float(lhs[worst]), "rhs": float(rhs[worst]),
              "allowance": float(n_se * (se[worst] + s0_se))}
    return MarginCertificate(ranges_left, right, float(s0), float(delta_gap), G.kind, passed, ce,
                             float(slack[worst]), int(idx.size))


def quadratic_margin_constant(q, M):
    """``c = sqrt(2 (q-1)/q * (M+1)^(-2(2-q)/q))`` for ``q in (1, 2]``, ``M > 0``."""
    if not (1.0 < q <= 2.0):
        raise DomainViolationError(f"q must lie in (1, 2], got {q}")
    if not M > 0:
        raise DomainViolationError("M must be > 0")
    return math.sqrt(2.0 * (q - 1.0) / q * (M + 1.0) ** (-2.0 * (2.0 - q) / q))


def approx_concave_gap(eps, M, s0):
    """Gap ``2 [sqrt(eps) (2 sqrt(eps) M + 1)]^(1/2) s0`` and admissibility ``sqrt(eps)(1+eps) < 1/2``."""
    if eps < 0:
        raise DomainViolationError("eps must be >= 0")
    r = math.sqrt(eps)
    gap = 2.0 * math.sqrt(r * (2.0 * r * M + 1.0)) * s0
    return gap, bool(r * (1.0 + eps) < 0.5)


# --------------------------------------------------------------------------
# deviation bounds
# --------------------------------------------------------------------------


def default_c0(C, K):
    return 4.0 * (C + 1.0) + 2.0 * (K + 1.0)


def delta_bound(t, n, tau_max, s0, r0, G: MarginFunction, C, K, c0=None):
    """Smallest ``delta`` with
    ``G(delta) >= G*(c0 sqrt(u/n)) + c0 ((s0 + r0) sqrt(u/n) + u/n)``,
    ``u = t + log(1 + sqrt(n tau_max^2))``.
    """
    if n < 1 or t < 0 or tau_max < 0:
        raise DomainViolationError("need n >= 1, t >= 0 and tau_max >= 0")
    c0 = default_c0(C, K) if c0 is None else c0
    u = t + math.log1p(math.sqrt(n * tau_max**2))
    root = math.sqrt(u / n)
    rhs = float(G.conjugate(c0 * root)) + c0 * ((s0 + r0) * root + u / n) if root > 0 else 0.0
    return G.inverse(rhs)


def delta_bound_shifted(t, n, tau_max, tau_star, s_star, r_star, G: MarginFunction, C, K, Gamma,
                        c0=None):
    """Shifted bound: ``tau_max^2 -> tau_max^2 - tau*^2``, ``s0 -> s_*``,
    ``r0 -> r_*`` and curvature ``C -> Gamma C``."""
    if not (np.isfinite(Gamma) and Gamma > 0):
        raise ConditionViolationError("oracle potential Gamma must be finite and positive")
    if tau_star > tau_max:
        raise DomainViolationError("tau_* cannot exceed tau_max")
    eff = math.sqrt(max(tau_max**2 - tau_star**2, 0.0))
    CG = Gamma * C
    c0 = default_c0(CG, K) if c0 is None else c0
    return delta_bound(t, n, eff, s_star, r_star, G, CG, K, c0)


def _check_nonneg(**kw):
    for k, v in kw.items():
        if v < 0:
            raise DomainViolationError(f"{k} must be >= 0")


def klein_rio_interval(K, sigma2, E_s, t, n):
    """Two-sided deviation interval for ``E_n(s)`` around ``E(s)``."""
    _check_nonneg(K=K, sigma2=sigma2, E_s=E_s, t=t)
    if n < 1:
        raise DomainViolationError("n must be >= 1")
    dev = math.sqrt(8 * K * E_s + 2 * sigma2) * math.sqrt(t / n)
    return E_s - dev - K * t / n, E_s + dev + 2 * K * t / (3 * n)


def curvature_interval(C, s, r0, K, E_s, t, n, coherent=False, check_chain=True):
    """Interval with the variance term replaced by ``2 C s + r0``.

    The default lower end follows the printed form (``+ r0 sqrt(t/n)``);
    ``coherent=True`` subtracts that term instead, which is what the
    deviation argument yields.  The chain ``8 K E(s) <= 2 C^2 s^2 + r0^2``
    is verified first.
    """
    _check_nonneg(C=C, s=s, r0=r0, K=K, E_s=E_s, t=t)
    if check_chain and 8 * K * E_s > 2 * C**2 * s**2 + r0**2 + 1e-12:
        raise ConditionViolationError("8 K E(s) exceeds 2 C^2 s^2 + r0^2; inputs are inconsistent")
    rt = math.sqrt(t / n)
    sign = -1.0 if coherent else 1.0
    lower = E_s - 2 * C * s * rt + sign * r0 * rt - K * t / n
    upper = E_s + 2 * C * s * rt + r0 * rt + 2 * K * t / (3 * n)
    return lower, upper


def envelope_interval(c_F, C_F, sigma2, E_s, t, n, verbatim=False):
    """Interval for classes with a sub-Gaussian envelope, truncated at ``C_F sqrt(log n)``.

    ``verbatim=True`` reproduces the printed upper end, whose deviation
    terms carry minus signs; the default adds them.
    """
    if c_F < 1 or C_F < 1:
        raise DomainViolationError("envelope constants must be >= 1")
    if n < 3:
        raise DomainViolationError("n must be >= 3 for the truncation level")
    _check_nonneg(sigma2=sigma2, E_s=E_s, t=t)
    t0 = C_F * math.sqrt(math.log(n))
    rt = math.sqrt(t / n)
    bias = c_F * (4 * c_F + t) / n
    lower = (E_s - math.sqrt(8 * t0 * (E_s + 2 * c_F * (c_F + t) / n) + 2 * sigma2) * rt
             - t0 * t / n - bias)
    dev = math.sqrt(8 * t0 * (E_s + 2 * c_F**2 / n) + 2 * sigma2) * rt
    if verbatim:
        upper = E_s - dev - 2 * t0 * t / (3 * n) - bias
    else:
        upper = E_s + dev + 2 * t0 * t / (3 * n) + bias
    return lower, upper


def margin_helper_check(G: MarginFunction, a, b, c, tol=1e-12):
    """If ``G(a) >= G*(2b) + 2c`` then ``G(a) - a b - c >= 0``.

    Returns ``(hypothesis_holds, conclusion_holds)``.
    """
    if a <= 0 or b < 0 or c < 0:
        raise DomainViolationError("need a > 0 and b, c >= 0")
    Ga = float(G(a))
    hyp = Ga >= float(G.conjugate(2 * b)) + 2 * c if b > 0 else Ga >= 2 * c
    concl = Ga - a * b - c >= -tol
    return bool(hyp), bool(concl)
