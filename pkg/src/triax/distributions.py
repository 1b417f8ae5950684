"""Nonnegative scalar laws used as coefficients of the recursion.

Each law is an immutable descriptor that knows how to

* turn a base variate into a sample (inverse or direct transform, so a fixed
  base variate always yields the same value),
* evaluate the fractional moment ``s -> E[X**s]`` (``math.inf`` when it
  diverges), and
* evaluate ``E[X**s log X]``, the derivative of the moment function.

Base variates are uniform(0, 1) for ``constant``, ``pareto`` and ``uniform``
and standard normal for ``lognormal`` and ``garch_entry``.
"""

from __future__ import annotations

import functools
import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy import integrate, special

from triax.errors import DivergentMomentError, ParseError

__all__ = [
    "Distribution",
    "Constant",
    "LogNormal",
    "Pareto",
    "Uniform",
    "GarchEntry",
    "parse_distribution",
    "ZERO_LITERAL",
]

ZERO_LITERAL = "zero"

GH_NODES = 200
GH_RTOL = 1e-8


@functools.lru_cache(maxsize=8)
def _hermite_e(n: int) -> tuple[np.ndarray, np.ndarray]:
    # probabilists' Hermite nodes and log-weights for the N(0,1) density
    x, w = special.roots_hermitenorm(n)
    keep = w > 0
    return x[keep], np.log(w[keep] / math.sqrt(2.0 * math.pi))


def _fmt(x: float) -> str:
    return repr(float(x))


class Distribution(ABC):
    """A nonnegative scalar law."""

    kind: ClassVar[str]
    #: ``"uniform"`` or ``"normal"``: the law of the variate fed to :meth:`sample`.
    base: ClassVar[str]

    @abstractmethod
    def sample(self, u):
        """Map base variates ``u`` (scalar or array) to samples."""

    @abstractmethod
    def moment(self, s: float) -> float:
        """``E[X**s]`` for ``s >= 0``; ``math.inf`` if the moment diverges."""

    @abstractmethod
    def _log_moment(self, s: float) -> float: ...

    def log_moment(self, s: float) -> float:
        """``E[X**s log X]``; at ``s = 0`` this is ``E[log X]``.

        Raises
        ------
        DivergentMomentError
            If ``moment(s)`` is infinite.
        """
        _check_order(s)
        if math.isinf(self.moment(s)):
            raise DivergentMomentError(f"E[X^{s}] diverges for {self.literal()}")
        return self._log_moment(s)

    def is_arithmetic(self) -> bool:
        return False

    def is_zero(self) -> bool:
        """True when the law is the point mass at 0."""
        return False

    @abstractmethod
    def literal(self) -> str:
        """Model-file literal that parses back to this law."""

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        """Draw samples by feeding fresh base variates from ``rng``."""
        if self.base == "normal":
            return self.sample(rng.standard_normal(size))
        return self.sample(rng.random(size))

    def __str__(self) -> str:
        return self.literal()


def _check_order(s: float) -> None:
    if not s >= 0:
        raise ValueError(f"moment order must be >= 0, got {s}")


@dataclass(frozen=True)
class Constant(Distribution):
    c: float

    kind: ClassVar[str] = "constant"
    base: ClassVar[str] = "uniform"

    def __post_init__(self):
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise ValueError(f"constant requires c >= 0, got {self.c}")

    def sample(self, u):
        if np.isscalar(u):
            return float(self.c)
        return np.full(np.shape(u), float(self.c))

    def moment(self, s):
        _check_order(s)
        if s == 0:
            return 1.0
        return self.c**s

    def _log_moment(self, s):
        if self.c == 0:
            # x**s log x -> 0 as x -> 0 for s > 0
            return -math.inf if s == 0 else 0.0
        return self.c**s * math.log(self.c)

    def is_arithmetic(self):
        return True

    def is_zero(self):
        return self.c == 0

    def literal(self):
        return f"constant({_fmt(self.c)})"


@dataclass(frozen=True)
class LogNormal(Distribution):
    mu: float
    sigma: float

    kind: ClassVar[str] = "lognormal"
    base: ClassVar[str] = "normal"

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise ValueError(f"lognormal requires sigma > 0, got {self.sigma}")

    def sample(self, z):
        return np.exp(self.mu + self.sigma * np.asarray(z, dtype=float))

    def _log_mgf(self, s):
        return self.mu * s + 0.5 * self.sigma**2 * s**2

    def moment(self, s):
        _check_order(s)
        e = self._log_mgf(s)
        return math.exp(e) if e < 709.0 else math.inf

    def _log_moment(self, s):
        return (self.mu + self.sigma**2 * s) * self.moment(s)

    def literal(self):
        return f"lognormal({_fmt(self.mu)},{_fmt(self.sigma)})"


@dataclass(frozen=True)
class Pareto(Distribution):
    """Pareto law with survival ``(xm / x)**a`` on ``x >= xm``."""

    a: float
    xm: float

    kind: ClassVar[str] = "pareto"
    base: ClassVar[str] = "uniform"

    def __post_init__(self):
        if not (self.a > 0 and self.xm > 0):
            raise ValueError(f"pareto requires a > 0 and xm > 0, got a={self.a}, xm={self.xm}")

    def sample(self, u):
        return self.xm * (1.0 - np.asarray(u, dtype=float)) ** (-1.0 / self.a)

    def moment(self, s):
        _check_order(s)
        if s >= self.a:
            return math.inf
        return self.a * self.xm**s / (self.a - s)

    def _log_moment(self, s):
        return self.moment(s) * (math.log(self.xm) + 1.0 / (self.a - s))

    def literal(self):
        return f"pareto({_fmt(self.a)},{_fmt(self.xm)})"


@dataclass(frozen=True)
class Uniform(Distribution):
    lo: float
    hi: float

    kind: ClassVar[str] = "uniform"
    base: ClassVar[str] = "uniform"

    def __post_init__(self):
        if not (0 <= self.lo < self.hi and math.isfinite(self.hi)):
            raise ValueError(f"uniform requires 0 <= lo < hi, got lo={self.lo}, hi={self.hi}")

    def sample(self, u):
        return self.lo + (self.hi - self.lo) * np.asarray(u, dtype=float)

    def moment(self, s):
        _check_order(s)
        if s == 0:
            return 1.0
        p = s + 1.0
        return (self.hi**p - self.lo**p) / (p * (self.hi - self.lo))

    def _log_moment(self, s):
        p = s + 1.0

        def g(x):
            # x**p log x, continuous at 0
            return 0.0 if x == 0 else x**p * math.log(x)

        width = self.hi - self.lo
        return ((g(self.hi) - g(self.lo)) * p - (self.hi**p - self.lo**p)) / (p * p * width)

    def literal(self):
        return f"uniform({_fmt(self.lo)},{_fmt(self.hi)})"


@dataclass(frozen=True)
class GarchEntry(Distribution):
    """Law of ``a * Z**2 + b`` with ``Z`` standard normal."""

    a: float
    b: float

    kind: ClassVar[str] = "garch_entry"
    base: ClassVar[str] = "normal"

    def __post_init__(self):
        if not (self.a >= 0 and self.b >= 0 and self.a + self.b > 0):
            raise ValueError(f"garch_entry requires a, b >= 0 and a + b > 0, got a={self.a}, b={self.b}")

    def sample(self, z):
        z = np.asarray(z, dtype=float)
        return self.a * z * z + self.b

    def moment(self, s):
        _check_order(s)
        if s == 0:
            return 1.0
        if self.a == 0:
            return self.b**s
        if self.b == 0:
            # E|Z|^(2s) = 2^s Gamma(s + 1/2) / sqrt(pi)
            return math.exp(s * math.log(2.0 * self.a) + special.gammaln(s + 0.5) - 0.5 * math.log(math.pi))
        return math.exp(self._log_quad(s))

    def _log_moment(self, s):
        if self.a == 0:
            return self.b**s * math.log(self.b)
        if self.b == 0:
            return self.moment(s) * (math.log(2.0 * self.a) + special.digamma(s + 0.5))
        return self._quad_log_weighted(s)

    def _log_quad(self, s: float) -> float:
        """log E[(aZ^2+b)^s] by Gauss-Hermite, checked against a doubled rule."""
        vals = []
        for n in (GH_NODES, 2 * GH_NODES):
            x, logw = _hermite_e(n)
            e = s * np.log(self.a * x * x + self.b) + logw
            top = e.max()
            vals.append(top + math.log(np.sum(np.exp(e - top))))
        if abs(vals[0] - vals[1]) <= GH_RTOL:
            return float(vals[1])
        val, _ = integrate.quad(
            lambda z: math.exp(s * math.log(self.a * z * z + self.b) - 0.5 * z * z),
            0.0,
            math.inf,
            epsabs=0.0,
            epsrel=1e-11,
            limit=200,
        )
        return math.log(2.0 * val / math.sqrt(2.0 * math.pi))

    def _quad_log_weighted(self, s: float) -> float:
        vals = []
        for n in (GH_NODES, 2 * GH_NODES):
            x, logw = _hermite_e(n)
            logv = np.log(self.a * x * x + self.b)
            e = s * logv + logw
            top = e.max()
            vals.append(math.exp(top) * float(np.sum(np.exp(e - top) * logv)))
        ref = max(abs(vals[1]), math.exp(self._log_quad(s)))
        if abs(vals[0] - vals[1]) <= GH_RTOL * ref:
            return vals[1]
        val, _ = integrate.quad(
            lambda z: (self.a * z * z + self.b) ** s * math.log(self.a * z * z + self.b) * math.exp(-0.5 * z * z),
            0.0,
            math.inf,
            epsabs=0.0,
            epsrel=1e-11,
            limit=200,
        )
        return 2.0 * val / math.sqrt(2.0 * math.pi)

    def is_arithmetic(self):
        return self.a == 0

    def is_zero(self):
        return self.a == 0 and self.b == 0

    def literal(self):
        return f"garch_entry({_fmt(self.a)},{_fmt(self.b)})"


_KINDS: dict[str, tuple[type[Distribution], int]] = {
    "constant": (Constant, 1),
    "lognormal": (LogNormal, 2),
    "pareto": (Pareto, 2),
    "uniform": (Uniform, 2),
    "garch_entry": (GarchEntry, 2),
}

_LITERAL = re.compile(r"^([a-z_]+)\((.*)\)$")


def parse_distribution(text: str) -> Distribution | None:
    """Parse a distribution literal; ``zero`` parses to ``None``.

    >>> parse_distribution("pareto(3, 1)")
    Pareto(a=3.0, xm=1.0)
    """
    compact = re.sub(r"\s+", "", text)
    if compact == ZERO_LITERAL:
        return None
    m = _LITERAL.match(compact)
    if not m or m.group(1) not in _KINDS:
        raise ParseError(f"unknown distribution literal {text!r}")
    cls, arity = _KINDS[m.group(1)]
    parts = m.group(2).split(",") if m.group(2) else []
    if len(parts) != arity:
        raise ParseError(f"{m.group(1)} takes {arity} argument(s), got {len(parts)} in {text!r}")
    try:
        args = [float(p) for p in parts]
    except ValueError as exc:
        raise ParseError(f"bad numeric literal in {text!r}") from exc
    try:
        return cls(*args)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
