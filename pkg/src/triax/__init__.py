"""Heavy-tail analysis of upper-triangular stochastic recurrence equations."""

from triax.distributions import Constant, GarchEntry, LogNormal, Pareto, Uniform, parse_distribution
from triax.errors import TriaxError
from triax.garch import GarchSpec, simulate_garch, to_sre
from triax.model import (
    ModelSpec,
    build_depgraph,
    lyapunov_mc,
    lyapunov_sufficient,
    solve_alpha,
    tail_profile,
    tilde_alpha,
    validate,
)
from triax.modelfile import load_model, parse_model
from triax.simulate import PathConfig, decompose, stationary_sample, u_sequence

__all__ = [
    "Constant",
    "GarchEntry",
    "LogNormal",
    "Pareto",
    "Uniform",
    "parse_distribution",
    "TriaxError",
    "GarchSpec",
    "simulate_garch",
    "to_sre",
    "ModelSpec",
    "build_depgraph",
    "lyapunov_mc",
    "lyapunov_sufficient",
    "solve_alpha",
    "tail_profile",
    "tilde_alpha",
    "validate",
    "load_model",
    "parse_model",
    "PathConfig",
    "decompose",
    "stationary_sample",
    "u_sequence",
]
