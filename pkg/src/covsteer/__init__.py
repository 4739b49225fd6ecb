"""Optimal covariance steering of linear stochastic systems with a Frobenius terminal cost."""

__version__ = "0.1.0"

from .estimator import CovarianceSteering
from .exceptions import CovsteerError, InvalidProblem, LftSingular, MaxIterExceeded
from .model import (
    LtvSystem,
    SolverConfig,
    SteeringProblem,
    load_problem,
    make_clohessy_wiltshire,
    make_double_integrator,
    validate,
)
from .sim import simulate
from .traj import SteeringSolution

__all__ = [
    "CovarianceSteering",
    "CovsteerError",
    "InvalidProblem",
    "LftSingular",
    "LtvSystem",
    "MaxIterExceeded",
    "SolverConfig",
    "SteeringProblem",
    "SteeringSolution",
    "load_problem",
    "make_clohessy_wiltshire",
    "make_double_integrator",
    "simulate",
    "validate",
]
