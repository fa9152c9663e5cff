"""Convex parameter domains with closed-form (or 1-d root-find) projections.

Every domain acts on the last axis of its argument, so a stack of points of
shape ``(N, d)`` is projected row by row.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "Domain",
    "Whole",
    "Box",
    "Ball",
    "Simplex",
    "Ellipsoid",
    "FiniteSet",
    "project_l1_ball",
    "project_simplex",
]

_MEMBER_TOL = 1e-9


def project_simplex(v, total=1.0):
    """Euclidean projection of the rows of ``v`` onto ``{x >= 0, sum x = total}``."""
    v = np.asarray(v, dtype=float)
    flat = v.reshape(-1, v.shape[-1])
    d = flat.shape[1]
    u = -np.sort(-flat, axis=1)
    css = np.cumsum(u, axis=1) - total
    ind = np.arange(1, d + 1)
    cond = u - css / ind > 0
    rho = d - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(flat.shape[0]), rho] / (rho + 1)
    out = np.maximum(flat - theta[:, None], 0.0)
    return out.reshape(v.shape)


def project_l1_ball(v, radius=1.0):
    """Projection onto the l1 ball (Duchi et al. sort-based algorithm)."""
    v = np.asarray(v, dtype=float)
    flat = v.reshape(-1, v.shape[-1])
    out = flat.copy()
    inside = np.abs(flat).sum(axis=1) <= radius
    if not inside.all():
        rows = ~inside
        w = project_simplex(np.abs(flat[rows]), radius)
        out[rows] = np.sign(flat[rows]) * w
    return out.reshape(v.shape)


class Domain:
    """Base class: a closed convex subset of R^d."""

    dim: int | None = None
    bounded = False

    def contains(self, x, tol=_MEMBER_TOL):
        x = np.asarray(x, dtype=float)
        return bool(np.all(np.linalg.norm(self.project(x) - x, axis=-1) <= tol))

    def project(self, x):
        raise NotImplementedError

    def sample(self, rng, size):
        """Random points of the domain (used for multi-start and property checks)."""
        raise NotImplementedError


@dataclass(frozen=True)
class Whole(Domain):
    dim: int | None = None

    def contains(self, x, tol=_MEMBER_TOL):
        return bool(np.all(np.isfinite(x)))

    def project(self, x):
        return np.array(x, dtype=float, copy=True)

    def sample(self, rng, size):
        if self.dim is None:
            raise ConfigurationError("Whole() needs a dimension to be sampled")
        return rng.standard_normal((size, self.dim))


@dataclass(frozen=True)
class Box(Domain):
    lower: np.ndarray
    upper: np.ndarray
    bounded = True

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        lo, hi = np.broadcast_arrays(lo, hi)
        if lo.size == 0 or np.any(lo > hi):
            raise ConfigurationError(f"empty box: lower={lo}, upper={hi}")
        object.__setattr__(self, "lower", lo.copy())
        object.__setattr__(self, "upper", hi.copy())

    @property
    def dim(self):
        return self.lower.size

    def project(self, x):
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def sample(self, rng, size):
        lo = np.where(np.isfinite(self.lower), self.lower, -1.0)
        hi = np.where(np.isfinite(self.upper), self.upper, 1.0)
        return lo + (hi - lo) * rng.random((size, self.lower.size))


@dataclass(frozen=True)
class Ball(Domain):
    """``{x : ||x - center||_p <= radius}`` for p in {1, 2}."""

    radius: float
    center: np.ndarray | None = None
    norm: str = "l2"
    dim: int | None = None
    bounded = True

    def __post_init__(self):
        if not np.isfinite(self.radius) or self.radius < 0:
            raise ConfigurationError(f"ball radius must be finite and >= 0, got {self.radius}")
        if self.norm not in ("l1", "l2"):
            raise ConfigurationError(f"unsupported ball norm {self.norm!r}")
        if self.center is not None:
            c = np.atleast_1d(np.asarray(self.center, dtype=float))
            object.__setattr__(self, "center", c)
            object.__setattr__(self, "dim", c.size)

    def _c(self):
        return 0.0 if self.center is None else self.center

    def project(self, x):
        x = np.asarray(x, dtype=float)
        y = x - self._c()
        if self.norm == "l1":
            return project_l1_ball(y, self.radius) + self._c()
        nrm = np.linalg.norm(y, axis=-1, keepdims=True)
        scale = np.where(nrm > self.radius, self.radius / np.where(nrm > 0, nrm, 1.0), 1.0)
        return y * scale + self._c()

    def sample(self, rng, size):
        if self.dim is None:
            raise ConfigurationError("Ball without center needs dim to be sampled")
        z = rng.standard_normal((size, self.dim))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        r = self.radius * rng.random((size, 1)) ** (1.0 / self.dim)
        return z * r + self._c()


@dataclass(frozen=True)
class Simplex(Domain):
    dim_: int
    total: float = 1.0
    bounded = True

    def __post_init__(self):
        if self.dim_ < 1 or self.total < 0:
            raise ConfigurationError("simplex needs dim >= 1 and total >= 0")

    @property
    def dim(self):
        return self.dim_

    def project(self, x):
        return project_simplex(x, self.total)

    def sample(self, rng, size):
        return self.total * rng.dirichlet(np.ones(self.dim_), size)


@dataclass(frozen=True)
class Ellipsoid(Domain):
    """``{x : sum_i weights_i * x_i**2 <= radius**2}`` (centered at the origin).

    The projection has no closed form; it is found by bisection on the scalar
    multiplier of the constraint, which is monotone.
    """

    weights: np.ndarray
    radius: float = 1.0
    bounded = False

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if w.size == 0 or np.any(w < 0) or not np.any(w > 0) or self.radius < 0:
            raise ConfigurationError("ellipsoid needs nonnegative weights (some > 0) and radius >= 0")
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return self.weights.size

    def value(self, x):
        return np.sum(self.weights * np.asarray(x, dtype=float) ** 2, axis=-1)

    def project(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        out = flat.copy()
        w, r2 = self.weights, self.radius**2
        outside = self.value(flat) > r2
        if np.any(outside):
            xo = flat[outside]
            lo = np.zeros(xo.shape[0])
            hi = np.ones(xo.shape[0])
            # grow the bracket until the constraint is satisfied
            for _ in range(200):
                val = np.sum(w * (xo / (1 + hi[:, None] * w)) ** 2, axis=1)
                if np.all(val <= r2):
                    break
                hi = np.where(val > r2, hi * 4.0, hi)
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                val = np.sum(w * (xo / (1 + mid[:, None] * w)) ** 2, axis=1)
                big = val > r2
                lo = np.where(big, mid, lo)
                hi = np.where(big, hi, mid)
                if np.all(hi - lo <= 1e-15 * np.maximum(hi, 1.0)):
                    break
            out[outside] = xo / (1 + hi[:, None] * w)
        return out.reshape(x.shape)

    def sample(self, rng, size):
        z = rng.standard_normal((size, self.dim))
        z /= np.sqrt(self.value(z))[:, None]
        return z * self.radius * rng.random((size, 1)) ** (1.0 / self.dim)


@dataclass(frozen=True)
class FiniteSet(Domain):
    """A finite list of parameter vectors (the index set of a finite family)."""

    points: np.ndarray = field(default_factory=lambda: np.empty((0, 1)))
    bounded = True

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        if p.shape[0] == 0:
            raise ConfigurationError("finite set must contain at least one point")
        object.__setattr__(self, "points", p)

    @property
    def dim(self):
        return self.points.shape[1]

    def project(self, x):
        # nearest listed point; not a convex projection, kept for interface parity
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        d2 = ((flat[:, None, :] - self.points[None]) ** 2).sum(-1)
        return self.points[np.argmin(d2, axis=1)].reshape(x.shape)

    def sample(self, rng, size):
        return self.points[rng.integers(0, len(self.points), size)]
