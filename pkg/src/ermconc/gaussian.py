"""Normal sequence model ``Y = g0 + sigma * eps`` and Monte Carlo checks of the
concentration of ``||g_hat - g_ref||_n`` around its mean."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .convex import SolverSettings, solve_regularized_ls
from .core import Penalty
from .errors import ConfigurationError

__all__ = [
    "NormalSequenceSpec",
    "TailRow",
    "ConcentrationReport",
    "replicate_noise",
    "simulate_errors",
    "estimate_m0",
    "tail_report",
    "lipschitz_check",
    "DEFAULT_T_GRID",
]

DEFAULT_T_GRID = (0.25, 0.5, 1.0, 2.0, 3.0, 4.0)
_CHUNK = 8192


def norm_n(v):
    v = np.asarray(v, dtype=float)
    return np.sqrt(np.mean(v**2, axis=-1))


@dataclass(frozen=True)
class NormalSequenceSpec:
    """Configuration of one normal-sequence Monte Carlo experiment.

    ``g_ref`` is either ``"g0"``, ``"gstar"`` (the noiseless penalized
    solution) or an explicit vector.
    """

    n: int
    sigma: float
    g0: np.ndarray
    penalty: Penalty
    replicates: int = 100_000
    seed: int = 0
    g_ref: object = "g0"

    def __post_init__(self):
        g0 = np.asarray(self.g0, dtype=float)
        if g0.ndim == 0:
            g0 = np.full(self.n, float(g0))
        object.__setattr__(self, "g0", g0)
        if self.n < 1 or g0.shape != (self.n,):
            raise ConfigurationError("g0 must be a vector of length n >= 1")
        if not self.sigma >= 0:
            raise ConfigurationError("sigma must be >= 0")
        if self.replicates < 2:
            raise ConfigurationError("at least 2 replicates are required")

    def reference(self, settings=None):
        if isinstance(self.g_ref, str):
            if self.g_ref == "g0":
                return self.g0
            if self.g_ref == "gstar":
                return solve_regularized_ls(self.g0, self.penalty, settings).minimizer
            raise ConfigurationError(f"unknown reference {self.g_ref!r}")
        ref = np.asarray(self.g_ref, dtype=float)
        if ref.shape != (self.n,):
            raise ConfigurationError("explicit g_ref must have length n")
        return ref


def replicate_noise(seed, start, stop, n, stream=0):
    """Standard normal draws for replicates ``start..stop-1``.

    Every replicate has its own generator keyed by ``(seed, stream, index)``
    so any subset can be regenerated independently of chunking or workers.
    """
    out = np.empty((stop - start, n))
    for row, i in enumerate(range(start, stop)):
        out[row] = np.random.Generator(np.random.PCG64([seed, stream, i])).standard_normal(n)
    return out


def _batch_settings(n):
    return SolverSettings(step_rule="fixed", lipschitz=2.0 / n)


def _solve_rows(Y, penalty, settings):
    res = solve_regularized_ls(Y, penalty, settings)
    conv = np.atleast_1d(res.converged)
    return res.minimizer, conv


def simulate_errors(spec: NormalSequenceSpec, settings: SolverSettings | None = None,
                    stream: int = 0, return_quarantined: bool = False):
    """``||g_hat - g_ref||_n`` for each replicate (non-converged solves dropped)."""
    settings = settings or _batch_settings(spec.n)
    ref = spec.reference(settings)
    vals = []
    bad = 0
    for start in range(0, spec.replicates, _CHUNK):
        stop = min(start + _CHUNK, spec.replicates)
        eps = replicate_noise(spec.seed, start, stop, spec.n, stream)
        ghat, conv = _solve_rows(spec.g0 + spec.sigma * eps, spec.penalty, settings)
        v = norm_n(ghat - ref)
        bad += int(np.count_nonzero(~conv))
        vals.append(v[conv])
    values = np.concatenate(vals)
    return (values, bad) if return_quarantined else values


def estimate_m0(values):
    """Sample mean and its standard error."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ConfigurationError("need at least 2 values")
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


@dataclass(frozen=True)
class TailRow:
    t: float
    bound: float
    freq: float
    se: float
    slack: float
    flagged: bool


@dataclass
class ConcentrationReport:
    m0: float
    m0_se: float
    rows: list[TailRow]
    quarantined: int
    replicates: int
    warning: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def flagged(self):
        return [r for r in self.rows if r.flagged]

    def to_csv(self) -> str:
        lines = ["t,bound,freq,se,flagged"]
        for r in self.rows:
            lines.append(f"{r.t!r},{r.bound!r},{r.freq!r},{r.se!r},{int(r.flagged)}")
        return "\n".join(lines) + "\n"

    def to_dict(self):
        d = asdict(self)
        d["rows"] = [asdict(r) for r in self.rows]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def tail_report(spec: NormalSequenceSpec, t_grid=DEFAULT_T_GRID, settings=None) -> ConcentrationReport:
    """Empirical tails of ``| ||g_hat - g_ref||_n - m0 |`` against ``exp(-t)``.

    The first half of the replicates estimates ``m0``; the second half gives
    the tail frequencies.  A row is flagged when the frequency exceeds
    ``exp(-t) + 3 (se + slack)``, where ``se`` is the binomial standard error
    at ``p = exp(-t)`` and ``slack`` is the change in frequency caused by
    moving ``m0`` by one standard error.
    """
    values, bad = simulate_errors(spec, settings, return_quarantined=True)
    half = values.size // 2
    if half < 2:
        raise ConfigurationError("too few converged replicates for a tail report")
    m0, m0_se = estimate_m0(values[:half])
    tail = values[half:]
    N = tail.size
    rows = []
    for t in sorted(float(x) for x in t_grid):
        r = spec.sigma * math.sqrt(2 * t / spec.n)
        bound = math.exp(-t)
        freq = float(np.mean(np.abs(tail - m0) >= r))
        se = math.sqrt(bound * (1 - bound) / N)
        lo = np.mean(np.abs(tail - m0) >= r - m0_se)
        hi = np.mean(np.abs(tail - m0) >= r + m0_se)
        slack = float(lo - hi) / 2
        flagged = freq > bound + 3 * (se + slack)
        rows.append(TailRow(t, bound, freq, se, slack, bool(flagged)))
    warning = None
    if spec.replicates < 1000:
        warning = f"only {spec.replicates} replicates; tail frequencies are unreliable"
        warnings.warn(warning, RuntimeWarning, stacklevel=2)
    meta = {"n": spec.n, "sigma": spec.sigma, "seed": spec.seed, "penalty": spec.penalty.kind}
    return ConcentrationReport(m0, m0_se, rows, bad, spec.replicates, warning, meta)


def lipschitz_check(spec: NormalSequenceSpec, pair_count: int, settings=None):
    """Max of ``||g(eps) - g(eps')||_n / ||sigma (eps - eps')||_n`` over paired draws.

    Returns ``(max_ratio, ratios, quarantined)``.
    """
    if pair_count < 1:
        raise ConfigurationError("pair_count must be >= 1")
    settings = settings or _batch_settings(spec.n)
    sigma = spec.sigma if spec.sigma > 0 else 1.0
    ratios = []
    bad = 0
    for start in range(0, pair_count, _CHUNK):
        stop = min(start + _CHUNK, pair_count)
        e1 = replicate_noise(spec.seed, start, stop, spec.n, stream=1)
        e2 = replicate_noise(spec.seed, start, stop, spec.n, stream=2)
        g1, c1 = _solve_rows(spec.g0 + sigma * e1, spec.penalty, settings)
        g2, c2 = _solve_rows(spec.g0 + sigma * e2, spec.penalty, settings)
        ok = c1 & c2
        bad += int(np.count_nonzero(~ok))
        ratios.append((norm_n(g1 - g2) / norm_n(sigma * (e1 - e2)))[ok])
    ratios = np.concatenate(ratios)
    return float(ratios.max()), ratios, bad
