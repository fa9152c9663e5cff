"""Regularized empirical risk minimization: estimators, risk curves and
Monte Carlo checks of their concentration."""

from .core import (
    Dataset,
    FiniteFamily,
    LinearFamily,
    ParametricFamily,
    Penalty,
    PopulationOracle,
    empirical_mean,
    excess_risk,
    tau_min,
)
from .convex import (
    SolverSettings,
    SolveResult,
    optimality_residual,
    project,
    prox,
    solve_erm,
    solve_regularized_ls,
)
from .errors import (
    ConditionViolationError,
    ConfigurationError,
    DomainViolationError,
    ErmConcError,
    SolverFailureError,
    UnsupportedScenarioError,
)
from .sets import Ball, Box, Ellipsoid, FiniteSet, Simplex, Whole

__version__ = "0.1.0"
