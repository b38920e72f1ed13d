"""Numerical laboratory for the Parisi formula of mixed p-spin models."""

from .model import DomainError, MixtureSpec, theta, xi, xi_prime, xi_second
from .optimizer import OptimizerOptions, Optimum, optimize_at_k, optimize_full
from .parisi import QuadratureGrid, RSBParams, evaluate_parisi, evaluate_X0, variance_increments
from .stats import Estimate

__all__ = [
    "DomainError", "Estimate", "MixtureSpec", "OptimizerOptions", "Optimum", "QuadratureGrid", "RSBParams",
    "evaluate_X0", "evaluate_parisi", "optimize_at_k", "optimize_full", "theta", "variance_increments", "xi",
    "xi_prime", "xi_second",
]
__version__ = "0.1.0"
