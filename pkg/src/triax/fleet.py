"""Reference models shared by the tests and the acceptance suite."""

from __future__ import annotations

from triax.distributions import Constant, LogNormal, Uniform
from triax.garch import GarchSpec, to_sre
from triax.model import ModelSpec


def lognormal_1d(mu: float = -1.0, sigma: float = 1.0, b: float = 1.0) -> ModelSpec:
    """``W = A W + b`` with lognormal ``A``; tail index ``-2 mu / sigma^2``."""
    return ModelSpec.from_entries({(0, 0): LogNormal(mu, sigma)}, [Constant(b)])


def bivariate() -> ModelSpec:
    """Indices ``(4, 2)``: coordinate 1 inherits the heavier tail of coordinate 2."""
    return ModelSpec.from_entries(
        {(0, 0): LogNormal(-0.5, 0.5), (0, 1): Constant(1.0), (1, 1): LogNormal(-1.0, 1.0)},
        [Constant(1.0), Constant(1.0)],
    )


EXAMPLE5_EDGES = ((0, 1), (0, 4), (1, 3), (2, 4))


def example5(alpha=(5.0, 3.0, 2.0, 1.0, 4.0)) -> ModelSpec:
    """Five coordinates, off-diagonal pattern (1,2), (1,5), (2,4), (3,5) in 1-based terms.

    Diagonal laws are ``lognormal(-a/2, 1)`` so that coordinate ``i`` has
    marginal index ``alpha[i]``.
    """
    entries = {(i, i): LogNormal(-a / 2.0, 1.0) for i, a in enumerate(alpha)}
    for e in EXAMPLE5_EDGES:
        entries[e] = Uniform(0.0, 1.0)
    return ModelSpec.from_entries(entries, [Constant(1.0)] * len(alpha))


def full_triangular_3d() -> ModelSpec:
    """Every entry on or above the diagonal is positive; indices ``(3, 2.5, 2)``."""
    entries = {(i, i): LogNormal(mu, 1.0) for i, mu in enumerate((-1.5, -1.25, -1.0))}
    for e in ((0, 1), (0, 2), (1, 2)):
        entries[e] = Uniform(0.0, 0.5)
    return ModelSpec.from_entries(entries, [Constant(1.0), Uniform(0.5, 1.5), LogNormal(0.0, 0.5)])


def garch_2d(common_shock: bool = True) -> GarchSpec:
    return GarchSpec(
        alpha0=[0.2, 0.2],
        alpha=[[0.1, 0.05], [0.0, 0.3]],
        beta=[[0.5, 0.0], [0.0, 0.4]],
        common_shock=common_shock,
    )


def fleet() -> dict[str, ModelSpec]:
    return {
        "lognormal_1d": lognormal_1d(),
        "bivariate": bivariate(),
        "example5": example5(),
        "full_triangular_3d": full_triangular_3d(),
        "garch_2d": to_sre(garch_2d()),
    }
