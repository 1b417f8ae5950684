"""CCC-GARCH(1,1) with triangular parameter matrices.

Squared volatilities follow ``W_t = alpha0 + alpha X_{t-1}^2 + beta W_{t-1}``
with returns ``X_t = diag(Z_t) W_t^{1/2}``. Since ``X_{t-1}^2 = diag(Z_{t-1}^2)
W_{t-1}``, this is the recursion ``W_t = A_t W_{t-1} + B`` with
``A_t = alpha diag(Z_{t-1}^2) + beta`` and ``B = alpha0``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from triax import _streams
from triax._io import open_text
from triax.distributions import Constant, GarchEntry
from triax.errors import ModelError, SimulationOverflowError
from triax.model import ModelSpec, require_accepted


@dataclass(frozen=True)
class GarchSpec:
    """Parameters of a triangular CCC-GARCH(1,1) with standard normal shocks.

    ``common_shock`` selects how the coefficient matrix is driven. When true
    (the default) the GARCH recursion is simulated as written, so every entry
    in column ``j`` of ``A_t`` shares ``Z_{j,t-1}``. When false each entry
    ``A_ij`` gets its own independent shock, which is the law of the
    entrywise-independent model produced by :func:`to_sre`. Single entries
    have the same marginal law under both variants.
    """

    alpha0: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    common_shock: bool = True

    def __post_init__(self):
        a0 = np.asarray(self.alpha0, dtype=float)
        a = np.asarray(self.alpha, dtype=float)
        b = np.asarray(self.beta, dtype=float)
        d = a0.shape[0] if a0.ndim == 1 else -1
        if d < 1 or a.shape != (d, d) or b.shape != (d, d):
            raise ModelError("garch: alpha0 must have length d and alpha, beta must be d x d")
        if not np.all(a0 > 0):
            raise ModelError("garch: alpha0 entries must be positive")
        if np.any(a < 0) or np.any(b < 0):
            raise ModelError("garch: alpha and beta must be nonnegative")
        if np.any(np.tril(a, -1)) or np.any(np.tril(b, -1)):
            raise ModelError("garch: alpha and beta must be upper triangular")
        if not np.all(np.diag(a) + np.diag(b) > 0):
            raise ModelError("garch: alpha_ii + beta_ii must be positive")
        for name, arr in (("alpha0", a0), ("alpha", a), ("beta", b)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def d(self) -> int:
        return self.alpha0.shape[0]


def to_sre(g: GarchSpec) -> ModelSpec:
    """Triangular recursion with independent ``garch_entry`` coefficients."""
    d = g.d
    entries = {}
    for i in range(d):
        for j in range(i, d):
            a, b = float(g.alpha[i, j]), float(g.beta[i, j])
            if a + b > 0:
                entries[(i, j)] = GarchEntry(a, b)
    return ModelSpec.from_entries(entries, [Constant(float(x)) for x in g.alpha0])


def draw_garch_coefficients(g: GarchSpec, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``size`` copies of ``A_t`` and the shocks ``Z_{t-1}`` driving it.

    Under the common-shock variant ``A = alpha diag(Z^2) + beta`` and the
    returned shocks are the ones used. Otherwise every entry uses an
    independent shock and the returned ``Z`` is the common-shock vector that
    would have been used, which is not coupled to ``A``.
    """
    d = g.d
    z = rng.standard_normal((size, d))
    if g.common_shock:
        a = g.alpha[None, :, :] * (z * z)[:, None, :] + g.beta[None, :, :]
    else:
        zz = rng.standard_normal((size, d, d))
        a = g.alpha[None, :, :] * zz * zz + g.beta[None, :, :]
    return a, z


@dataclass(frozen=True)
class GarchPath:
    """One simulated series: returns ``x[t, i]`` and squared volatilities ``sigma2[t, i]``."""

    x: np.ndarray
    sigma2: np.ndarray
    seed: int
    burn_in: int

    def to_csv(self, path) -> None:
        d = self.x.shape[1]
        with open_text(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"X_{i + 1}" for i in range(d)] + [f"sigma2_{i + 1}" for i in range(d)])
            for t in range(self.x.shape[0]):
                w.writerow([t + 1] + [repr(float(v)) for v in self.x[t]] + [repr(float(v)) for v in self.sigma2[t]])


def _garch_steps(g: GarchSpec, rng: np.random.Generator, total: int, series: int, chunk: int):
    """Yield ``(t, z_t, w_t)`` with arrays of shape ``(series, d)`` for ``t = 0 .. total-1``."""
    d = g.d
    m = np.eye(d) - g.alpha - g.beta
    w0 = np.linalg.solve(m, g.alpha0) if np.all(np.diag(m) > 0) else g.alpha0.copy()
    w = np.broadcast_to(w0, (series, d)).copy()
    z_prev = None
    t = 0
    while t < total:
        n = min(chunk, total - t)
        z = rng.standard_normal((n, series, d))
        if not g.common_shock:
            zz = rng.standard_normal((n, series, d, d))
        for k in range(n):
            if z_prev is not None:
                if g.common_shock:
                    # alpha X_{t-1}^2 with X_{t-1}^2 = Z_{t-1}^2 W_{t-1}
                    w = g.alpha0 + (z_prev * z_prev * w) @ g.alpha.T + w @ g.beta.T
                else:
                    a = g.alpha * zz[k] * zz[k] + g.beta
                    w = np.einsum("sij,sj->si", a, w) + g.alpha0
            yield t + k, z[k], w
            z_prev = z[k]
        if not np.all(np.isfinite(w)):
            raise SimulationOverflowError("garch volatility overflowed")
        t += n


def simulate_garch(
    g: GarchSpec,
    steps: int,
    burn_in: int = 1000,
    seed: int = _streams.DEFAULT_SEED,
    check: bool = True,
    chunk: int = 4096,
) -> GarchPath:
    """Simulate one series of ``steps`` observations after ``burn_in`` discarded steps.

    The recursion starts from the unconditional mean ``(I - alpha - beta)^{-1}
    alpha0`` when it exists, and from ``alpha0`` otherwise.
    """
    if steps < 1 or burn_in < 0:
        raise ValueError("steps must be >= 1 and burn_in >= 0")
    if check:
        require_accepted(to_sre(g))
    rng = _streams.generators(seed, 1)[0]
    sig = np.empty((steps, g.d))
    xs = np.empty((steps, g.d))
    for t, z, w in _garch_steps(g, rng, burn_in + steps, 1, chunk):
        idx = t - burn_in
        if idx >= 0:
            sig[idx] = w[0]
            xs[idx] = z[0] * np.sqrt(w[0])
    return GarchPath(x=xs, sigma2=sig, seed=seed, burn_in=burn_in)


def max_volatility(g: GarchSpec, steps: int, series: int, seed: int = _streams.DEFAULT_SEED, chunk: int = 1024) -> np.ndarray:
    """Largest squared volatility per coordinate over ``series`` independent runs of ``steps`` steps.

    Nothing but the running maximum is stored, so long runs are cheap in memory.
    """
    rng = _streams.generators(seed, 1)[0]
    top = np.zeros(g.d)
    for _, _, w in _garch_steps(g, rng, steps, series, chunk):
        np.maximum(top, w.max(axis=0), out=top)
    return top
