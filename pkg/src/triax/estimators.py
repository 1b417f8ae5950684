"""Tail-index estimators and tail constants, plus a product-tail bound check."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from triax import _streams
from triax._io import open_text
from triax.distributions import Distribution
from triax.errors import DegenerateSampleError, HypothesisFailError, MissingUError, WrongRegimeError
from triax.model import DepGraph, ModelSpec, TailProfile, tail_profile

GRID_POINTS = 40
JACKKNIFE_BLOCKS = 20


@dataclass(frozen=True)
class TailEstimate:
    point: float
    std_error: float
    k: int
    n: int
    method: str
    coordinate: int | None = None
    seed: int | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.coordinate is not None:
            out["coordinate"] = self.coordinate + 1
        return out


def default_k(n: int) -> int:
    return max(1, min(n - 1, int(math.floor(n ** (2.0 / 3.0)))))


def _top(sample, k: int) -> np.ndarray:
    x = np.asarray(sample, dtype=float).ravel()
    n = x.size
    if not 0 < k < n:
        raise ValueError(f"k must satisfy 0 < k < n = {n}, got {k}")
    if np.count_nonzero(x > 0) < k + 1:
        raise DegenerateSampleError(f"need at least k + 1 = {k + 1} positive values")
    top = np.sort(np.partition(x, n - k - 1)[n - k - 1 :])
    if top[0] == top[-1]:
        raise DegenerateSampleError("the top k + 1 order statistics are all equal")
    return top


def hill(sample, k: int | None = None) -> TailEstimate:
    """Hill estimator from the ``k`` largest values; standard error ``point / sqrt(k)``."""
    n = np.size(sample)
    k = default_k(n) if k is None else k
    top = _top(sample, k)
    logs = np.log(top[1:] / top[0])
    point = 1.0 / float(np.mean(logs))
    return TailEstimate(point, point / math.sqrt(k), k, n, "hill")


def rank_regression(sample, k: int | None = None) -> TailEstimate:
    """Slope of ``log(rank - 1/2)`` against ``log x`` over the ``k`` largest values.

    The half shift removes most of the small-sample bias of the plain
    log-rank regression; the standard error is ``point * sqrt(2 / k)``.
    """
    n = np.size(sample)
    k = default_k(n) if k is None else k
    top = _top(sample, k)[1:][::-1]
    rank = np.arange(1, k + 1) - 0.5
    slope = np.polyfit(np.log(top), np.log(rank), 1)[0]
    point = -float(slope)
    if not point > 0:
        raise DegenerateSampleError("non-negative log-log slope")
    return TailEstimate(point, point * math.sqrt(2.0 / k), k, n, "rank_regression")


@dataclass(frozen=True)
class ScalingCurve:
    """``x^alpha * P(X > x)`` on a log-spaced grid, summarized by a plateau and a terminal slope."""

    x: np.ndarray
    value: np.ndarray
    std_error: np.ndarray
    alpha: float
    plateau: float
    slope: float

    def to_csv(self, path) -> None:
        with open_text(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "x_pow_alpha_times_survival"])
            for a, b in zip(self.x, self.value):
                w.writerow([repr(float(a)), repr(float(b))])


def tail_grid(sample, points: int = GRID_POINTS) -> np.ndarray:
    """Log-spaced grid from the median up to the value exceeded ``ceil(2 sqrt(n))`` times."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    top_count = int(math.ceil(2.0 * math.sqrt(n)))
    lo, hi = x[n // 2], x[n - top_count - 1]
    if not 0 < lo < hi:
        raise DegenerateSampleError("sample tail too short for a survival grid")
    return np.geomspace(lo, hi, points)


def survival_scaling(sample, alpha: float, grid: np.ndarray | None = None) -> ScalingCurve:
    """Empirical ``x^alpha P(X > x)``.

    The plateau is the mean over the upper half of the grid, a finite-sample
    stand-in for the limit. The slope is the least-squares log-log slope over
    the last decade of the grid and is near zero once the power law has set in.
    """
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    grid = tail_grid(x) if grid is None else np.asarray(grid, dtype=float)
    surv = (n - np.searchsorted(x, grid, side="right")) / n
    value = grid**alpha * surv
    se = grid**alpha * np.sqrt(surv * (1 - surv) / n)
    upper = slice(len(grid) // 2, None)
    last = grid >= grid[-1] / 10.0
    ok = last & (value > 0)
    slope = float(np.polyfit(np.log(grid[ok]), np.log(value[ok]), 1)[0]) if ok.sum() >= 2 else math.nan
    return ScalingCurve(grid, value, se, alpha, float(np.mean(value[upper])), slope)


@dataclass(frozen=True)
class ConstantEstimate:
    point: float
    std_error: float
    numerator: float
    denominator: float
    n: int
    min_block_numerator: float
    coordinate: int
    method: str = "goldie-direct"


def _jackknife_mean(values: np.ndarray, blocks: int = JACKKNIFE_BLOCKS) -> tuple[float, float, np.ndarray]:
    parts = np.array_split(values, blocks)
    sums = np.array([math.fsum(p) for p in parts])
    counts = np.array([p.size for p in parts], dtype=float)
    total, n = math.fsum(sums), counts.sum()
    loo = (total - sums) / (n - counts)
    b = len(parts)
    se = math.sqrt((b - 1) / b * float(np.sum((loo - loo.mean()) ** 2)))
    return total / n, se, sums / counts


def goldie_constant(
    spec: ModelSpec,
    k: int,
    w_sample: np.ndarray,
    stream=_streams.DEFAULT_SEED,
    profile: TailProfile | None = None,
) -> ConstantEstimate:
    """Tail constant of a self-dominant coordinate ``k`` (0-based).

    Estimates ``E[(A W_k + D)^a - (A W_k)^a] / (a E[A^a log A])`` with
    ``A = A_kk``, ``a = alpha_k`` and ``D = sum_{j>k} A_kj W_j + B_k``, using
    stationary ``w_sample`` rows and fresh coefficient draws. The error is a
    jackknife over 20 blocks of paths.
    """
    profile = tail_profile(spec) if profile is None else profile
    if profile.j0[k] != k:
        raise WrongRegimeError(
            f"coordinate {k + 1} inherits index {profile.tilde_alpha[k]} from coordinate {profile.j0[k] + 1}"
        )
    w = np.asarray(w_sample, dtype=float)
    if w.ndim != 2 or w.shape[1] != spec.d:
        raise ValueError("w_sample must have shape (n, d)")
    n = w.shape[0]
    a_exp = profile.alpha[k]
    rng = stream if isinstance(stream, np.random.Generator) else _streams.generators(int(stream), 1)[0]
    A, B = spec.draw(rng, n)
    x = A[:, k, k] * w[:, k]
    dd = B[:, k] + np.einsum("pj,pj->p", A[:, k, k + 1 :], w[:, k + 1 :])
    with np.errstate(divide="ignore", invalid="ignore"):
        # (x + dd)^a - x^a without cancellation when dd << x
        stable = x**a_exp * np.expm1(a_exp * np.log1p(dd / x))
    diff = np.where(x > 0, stable, dd**a_exp)
    mean, se, block_means = _jackknife_mean(diff)
    denom = spec.A[k][k].log_moment(a_exp)
    scale = a_exp * denom
    return ConstantEstimate(
        point=mean / scale,
        std_error=se / abs(scale),
        numerator=mean / a_exp,
        denominator=denom,
        n=n,
        min_block_numerator=float(block_means.min()),
        coordinate=k,
    )


@dataclass(frozen=True)
class ConstantsReport:
    constants: list[float]
    std_errors: list[float]
    methods: list[str]
    chains: list[list[int]]
    u: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "coordinates": [
                {
                    "coordinate": i + 1,
                    "constant": c,
                    "std_error": e,
                    "method": m,
                    "chain": [j + 1 for j in chain],
                    "u": self.u.get(i),
                }
                for i, (c, e, m, chain) in enumerate(zip(self.constants, self.std_errors, self.methods, self.chains))
            ]
        }


def _pair(v) -> tuple[float, float]:
    if isinstance(v, (tuple, list)):
        return float(v[0]), float(v[1])
    return float(v), 0.0


def constants_recursive(
    profile: TailProfile,
    graph: DepGraph,
    u_values: Mapping[int, float | tuple[float, float]],
    goldie: Mapping[int, float | tuple[float, float]],
    order: Sequence[int] | None = None,
) -> ConstantsReport:
    """Combine Goldie constants and propagation factors: ``C_k = u_k C_{j0(k)}`` for dominated ``k``.

    Values may be plain floats or ``(value, std_error)`` pairs; errors are
    combined in quadrature on the relative scale. ``order`` overrides the
    default decreasing-coordinate processing order.
    """
    d = len(profile.alpha)
    if graph.reach.shape != (d, d):
        raise ValueError("profile and graph dimensions differ")
    order = list(range(d - 1, -1, -1)) if order is None else list(order)
    if sorted(order) != list(range(d)):
        raise ValueError("order must be a permutation of the coordinates")
    const: dict[int, tuple[float, float]] = {}

    def resolve(k: int) -> tuple[float, float]:
        if k in const:
            return const[k]
        j0 = profile.j0[k]
        if j0 == k:
            if k not in goldie:
                raise ValueError(f"no Goldie constant supplied for coordinate {k + 1}")
            const[k] = _pair(goldie[k])
        else:
            if k not in u_values:
                raise MissingUError(f"u for coordinate {k + 1} was not estimated")
            u, u_se = _pair(u_values[k])
            c, c_se = resolve(j0)
            val = u * c
            rel = math.hypot(u_se / u if u else 0.0, c_se / c if c else 0.0)
            const[k] = (val, abs(val) * rel)
        return const[k]

    for k in order:
        resolve(k)
    for k, (v, _) in const.items():
        if not v > 0:
            raise ValueError(f"constant for coordinate {k + 1} is not positive: {v}")
    return ConstantsReport(
        constants=[const[k][0] for k in range(d)],
        std_errors=[const[k][1] for k in range(d)],
        methods=["goldie-direct" if profile.j0[k] == k else "recursive" for k in range(d)],
        chains=[[k] if profile.j0[k] == k else [k, profile.j0[k]] for k in range(d)],
        u={k: _pair(u_values[k])[0] for k in range(d) if profile.j0[k] != k},
    )


@dataclass(frozen=True)
class BreimanReport:
    plateau: float
    plateau_std_error: float
    bound: float
    y_sup: float
    holds: bool
    curve: ScalingCurve


def breiman_check(
    x_dist: Distribution,
    y_sample,
    alpha: float,
    M: float,
    grid: np.ndarray | None = None,
    stream=_streams.DEFAULT_SEED,
    z: float = 3.0,
) -> BreimanReport:
    """Compare the tail of ``X Y`` with the bound ``M E[X^alpha]``.

    ``X`` is drawn independently of the given ``Y`` sample. The hypothesis
    ``sup x^alpha P(Y > x) <= M`` is checked on the upper half of the ``Y``
    grid, allowing ``z`` binomial standard errors of sampling noise; the same
    slack applies to the conclusion.
    """
    if not math.isfinite(x_dist.moment(alpha * (1.0 + 1e-9) + 1e-12)):
        raise HypothesisFailError(f"E[X^(alpha + eps)] is infinite for {x_dist}")
    y = np.asarray(y_sample, dtype=float).ravel()
    y_curve = survival_scaling(y, alpha)
    upper = slice(len(y_curve.x) // 2, None)
    excess = y_curve.value[upper] - z * y_curve.std_error[upper]
    y_sup = float(y_curve.value[upper].max())
    if np.any(excess > M):
        raise HypothesisFailError(f"sup x^alpha P(Y > x) = {y_sup} exceeds M = {M} on the grid")
    rng = stream if isinstance(stream, np.random.Generator) else _streams.generators(int(stream), 1)[0]
    prod = x_dist.draw(rng, y.size) * y
    curve = survival_scaling(prod, alpha, grid)
    upper = slice(len(curve.x) // 2, None)
    plateau_se = float(np.mean(curve.std_error[upper]))
    bound = M * x_dist.moment(alpha)
    holds = bool(np.all(curve.value[upper] - z * curve.std_error[upper] <= bound))
    return BreimanReport(curve.plateau, plateau_se, bound, y_sup, holds, curve)
