"""Triangular recursion models and their tail indices.

Coordinates are 0-based in the Python API. Everything that is serialized
(JSON, CSV, model files) uses 1-based coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from triax import _streams
from triax.distributions import Distribution
from triax.errors import (
    ArithmeticLawError,
    DivergentMomentError,
    DuplicateIndicesError,
    EpsOutOfRangeError,
    ModelError,
    NoRootError,
    NumericUnderflowError,
    TriaxError,
)

#: Two marginal indices closer than this are treated as equal and rejected.
DISTINCT_TOL = 1e-6
#: Root bracketing stops here; larger indices are reported as NO_ROOT.
ALPHA_CAP = 64.0
ROOT_TOL = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    """Law of the coefficient pair ``(A, B)``.

    ``A[i][j]`` is a :class:`Distribution` or ``None`` (structural zero). An
    off-diagonal point mass at zero is normalised to ``None``. Entries of
    ``A`` and ``B`` are independent of each other.
    """

    A: tuple
    B: tuple

    def __post_init__(self):
        d = len(self.B)
        if d < 1:
            raise ModelError("dimension must be >= 1")
        if len(self.A) != d or any(len(row) != d for row in self.A):
            raise ModelError(f"A must be {d}x{d} to match len(B) = {d}")
        rows = []
        for i, row in enumerate(self.A):
            new_row = []
            for j, dist in enumerate(row):
                if dist is not None and not isinstance(dist, Distribution):
                    raise ModelError(f"A[{i + 1}][{j + 1}] is not a distribution")
                if i > j and dist is not None and not dist.is_zero():
                    raise ModelError(f"A[{i + 1}][{j + 1}] lies below the diagonal; A must be upper triangular")
                if i == j and dist is None:
                    raise ModelError(f"diagonal entry A[{i + 1}][{i + 1}] is missing")
                if i != j and dist is not None and dist.is_zero():
                    dist = None
                new_row.append(dist)
            rows.append(tuple(new_row))
        for i, b in enumerate(self.B):
            if not isinstance(b, Distribution):
                raise ModelError(f"B[{i + 1}] is not a distribution")
        object.__setattr__(self, "A", tuple(rows))
        object.__setattr__(self, "B", tuple(self.B))

    @classmethod
    def from_entries(cls, a: Mapping[tuple[int, int], Distribution], b: Sequence[Distribution]) -> "ModelSpec":
        """Build from a sparse ``{(i, j): law}`` map (0-based); missing entries are zero."""
        d = len(b)
        grid = [[a.get((i, j)) for j in range(d)] for i in range(d)]
        return cls(tuple(tuple(r) for r in grid), tuple(b))

    @property
    def d(self) -> int:
        return len(self.B)

    @property
    def pattern(self) -> np.ndarray:
        return np.array([[x is not None for x in row] for row in self.A], dtype=bool)

    def entries(self) -> list[tuple[int, int, Distribution]]:
        """Non-zero entries of ``A`` in row-major order."""
        return [(i, j, x) for i, row in enumerate(self.A) for j, x in enumerate(row) if x is not None]

    def diagonal(self) -> list[Distribution]:
        return [self.A[i][i] for i in range(self.d)]

    def draw(self, rng: np.random.Generator, size) -> tuple[np.ndarray, np.ndarray]:
        """Draw i.i.d. copies of ``(A, B)``.

        Returns arrays of shape ``size + (d, d)`` and ``size + (d,)``. Base
        variates are consumed entry by entry in row-major order, then ``B``.
        """
        size = (size,) if np.isscalar(size) else tuple(size)
        d = self.d
        A = np.zeros(size + (d, d))
        B = np.empty(size + (d,))
        for i, j, dist in self.entries():
            A[..., i, j] = dist.draw(rng, size)
        for i, dist in enumerate(self.B):
            B[..., i] = dist.draw(rng, size)
        return A, B


@dataclass(frozen=True)
class DepGraph:
    """Direct dependence ``direct[i, j]`` (A_ij positive) and its reflexive-transitive closure."""

    direct: np.ndarray
    reach: np.ndarray

    def reach_set(self, i: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.reach[i])]


@dataclass(frozen=True)
class TailProfile:
    alpha: tuple[float, ...]
    tilde_alpha: tuple[float, ...]
    j0: tuple[int, ...]

    def dominated(self, i: int) -> bool:
        """True when coordinate ``i`` inherits its tail from another coordinate."""
        return self.j0[i] != i

    def to_dict(self) -> dict:
        return {
            "alpha": list(self.alpha),
            "tilde_alpha": list(self.tilde_alpha),
            "j0": [j + 1 for j in self.j0],
        }


def build_depgraph(spec: ModelSpec) -> DepGraph:
    direct = spec.pattern.copy()
    np.fill_diagonal(direct, True)
    reach = direct.copy()
    # boolean squaring doubles the covered path length each round
    while True:
        nxt = reach | ((reach.astype(np.int64) @ reach.astype(np.int64)) > 0)
        if np.array_equal(nxt, reach):
            break
        reach = nxt
    direct.setflags(write=False)
    reach.setflags(write=False)
    return DepGraph(direct=direct, reach=reach)


def check_distinct(alpha: Sequence[float], tol: float = DISTINCT_TOL) -> None:
    order = sorted(range(len(alpha)), key=lambda i: alpha[i])
    for a, b in zip(order, order[1:]):
        if abs(alpha[b] - alpha[a]) <= tol:
            raise DuplicateIndicesError(
                f"alpha_{a + 1} = {alpha[a]!r} and alpha_{b + 1} = {alpha[b]!r} are not separated by more than {tol}"
            )


def tilde_alpha(alpha: Sequence[float], graph: DepGraph) -> TailProfile:
    """Modified indices: the smallest marginal index reachable from each coordinate.

    Computed twice, as a minimum over the reach set and by the backward
    recursion over direct dependences; the two must agree exactly.
    """
    alpha = tuple(float(a) for a in alpha)
    d = len(alpha)
    if graph.reach.shape != (d, d):
        raise ValueError("alpha and graph dimensions differ")
    check_distinct(alpha)

    j0 = tuple(min(graph.reach_set(i), key=lambda j: alpha[j]) for i in range(d))
    by_reach = tuple(alpha[j] for j in j0)

    by_recursion = [0.0] * d
    for i in range(d - 1, -1, -1):
        succ = [by_recursion[j] for j in range(i + 1, d) if graph.direct[i, j]]
        by_recursion[i] = min([alpha[i], *succ])
    if tuple(by_recursion) != by_reach:
        raise AssertionError(f"index recursions disagree: {by_recursion} vs {by_reach}")
    return TailProfile(alpha=alpha, tilde_alpha=by_reach, j0=j0)


def _log_moment_fn(dist: Distribution, s: float) -> float:
    m = dist.moment(s)
    if m == 0:
        return -math.inf
    return math.log(m)


def _moment_root(dist: Distribution, cap: float = ALPHA_CAP) -> float:
    e_log = dist.log_moment(0.0)
    if not e_log < 0:
        raise NoRootError(f"E[log A] = {e_log!r} >= 0 for {dist}; E[A^s] > 1 for all small s > 0")

    def f(s):
        return _log_moment_fn(dist, s)

    s = 1.0
    if f(s) >= 0:
        hi = s
        lo = s / 2
        while f(lo) >= 0:
            lo /= 2
            if lo < 1e-12:
                raise NoRootError(f"could not bracket a root of E[A^s] = 1 for {dist}")
    else:
        lo = s
        hi = 2 * s
        while f(hi) < 0:
            lo = hi
            hi *= 2
            if lo >= cap:
                raise NoRootError(f"E[A^s] < 1 for all s <= {cap} for {dist}")
    while hi - lo > ROOT_TOL * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_alpha(dist: Distribution, cap: float = ALPHA_CAP) -> float:
    """The unique ``s > 0`` with ``E[A**s] = 1``.

    Raises
    ------
    NoRootError
        If ``E[log A] >= 0`` or the moment stays below 1 up to ``cap``.
    ArithmeticLawError
        If ``log A`` is lattice-valued.
    """
    root = _moment_root(dist, cap)
    if dist.is_arithmetic():
        raise ArithmeticLawError(f"log of {dist} is arithmetic")
    return root


def tail_profile(spec: ModelSpec) -> TailProfile:
    alpha = [solve_alpha(x) for x in spec.diagonal()]
    return tilde_alpha(alpha, build_depgraph(spec))


def lyapunov_sufficient(
    spec: ModelSpec, eps: float | None = None, alpha: Sequence[float] | None = None
) -> tuple[bool, float]:
    """Check ``rho(E[A^eps]) < 1`` entrywise-powered, which forces a negative Lyapunov exponent.

    ``eps`` defaults to half the smallest marginal index. Returns the verdict
    and the spectral radius, which for a triangular matrix is the largest
    diagonal entry ``E[A_ii^eps]``.
    """
    if alpha is None:
        try:
            alpha = [_moment_root(x) for x in spec.diagonal()]
        except NoRootError:
            alpha = None
    if eps is None:
        if alpha is None:
            raise EpsOutOfRangeError("no default eps: some marginal index does not exist")
        eps = 0.5 * min(alpha)
    if not eps > 0:
        raise EpsOutOfRangeError(f"eps must be positive, got {eps}")
    if alpha is not None and not eps < min(alpha):
        raise EpsOutOfRangeError(f"eps = {eps} must lie below min alpha = {min(alpha)}")
    m = moment_matrix(spec, eps)
    rho = float(max(np.diag(m)))
    return rho < 1.0, rho


def moment_matrix(spec: ModelSpec, s: float) -> np.ndarray:
    """Deterministic matrix with entries ``E[A_ij^s]`` (zero at structural zeros)."""
    m = np.zeros((spec.d, spec.d))
    for i, j, dist in spec.entries():
        m[i, j] = dist.moment(s)
    return m


@dataclass(frozen=True)
class LyapunovEstimate:
    estimate: float
    std_error: float
    n: int
    paths: int
    seed: int


def lyapunov_mc(
    spec: ModelSpec, n: int, paths: int, seed: int = _streams.DEFAULT_SEED, workers: int | None = None
) -> LyapunovEstimate:
    """Monte Carlo of ``(1/n) log ||A_1 ... A_n||_1`` with the entrywise-sum norm."""
    if n < 1 or paths < 1:
        raise ValueError("n and paths must be >= 1")
    d = spec.d

    def block(rng, size):
        prod = np.broadcast_to(np.eye(d), (size, d, d)).copy()
        log_norm = np.zeros(size)
        for _ in range(n):
            a, _b = spec.draw(rng, size)
            prod = prod @ a
            scale = prod.sum(axis=(1, 2))
            if not np.all((scale > 0) & np.isfinite(scale)):
                raise NumericUnderflowError("matrix product collapsed to zero or overflowed")
            # renormalise every step; the norm is the product of the scales
            log_norm += np.log(scale)
            prod /= scale[:, None, None]
        v = log_norm / n
        return v.sum(), (v * v).sum(), size

    parts = _streams.map_blocks(block, seed, paths, workers)
    mean, se = _streams.merge_mean([p[0] for p in parts], [p[1] for p in parts], [p[2] for p in parts])
    return LyapunovEstimate(float(mean), float(se), n, paths, seed)


CONDITIONS = ("T-1", "T-2", "T-3", "T-4", "T-5", "T-6", "T-7", "T-8")


@dataclass
class ConditionResult:
    condition: str
    passed: bool
    details: list[str] = field(default_factory=list)

    def fail(self, msg: str) -> None:
        self.passed = False
        self.details.append(msg)


@dataclass
class ValidationReport:
    conditions: list[ConditionResult]
    alpha: list[float | None]
    lyapunov_eps: float | None = None
    spectral_radius: float | None = None
    lyapunov_ok: bool = False

    @property
    def accepted(self) -> bool:
        return self.lyapunov_ok and all(c.passed for c in self.conditions)

    def failed(self) -> list[str]:
        return [c.condition for c in self.conditions if not c.passed]

    def __getitem__(self, condition: str) -> ConditionResult:
        for c in self.conditions:
            if c.condition == condition:
                return c
        raise KeyError(condition)

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "alpha": self.alpha,
            "conditions": [
                {"condition": c.condition, "passed": c.passed, "details": c.details} for c in self.conditions
            ],
            "lyapunov": {
                "eps": self.lyapunov_eps,
                "spectral_radius": self.spectral_radius,
                "sufficient": self.lyapunov_ok,
            },
        }


def validate(spec: ModelSpec) -> ValidationReport:
    """Evaluate T-1 .. T-8 and the Lyapunov sufficiency check; failures are report entries."""
    res = {c: ConditionResult(c, True) for c in CONDITIONS}
    d = spec.d
    res["T-1"].details.append("all coefficient laws are supported on [0, inf)")
    res["T-3"].details.append("upper-triangular pattern enforced at construction")

    for i, b in enumerate(spec.B):
        if b.is_zero():
            res["T-2"].fail(f"B[{i + 1}] = {b} is identically zero")

    alpha: list[float | None] = [None] * d
    for i, a_ii in enumerate(spec.diagonal()):
        try:
            alpha[i] = _moment_root(a_ii)
        except TriaxError as exc:
            res["T-4"].fail(f"A[{i + 1}][{i + 1}]: {exc}")
        if a_ii.is_arithmetic():
            res["T-8"].fail(f"log A[{i + 1}][{i + 1}] is arithmetic for {a_ii}")

    known = [a for a in alpha if a is not None]
    try:
        check_distinct(known)
    except DuplicateIndicesError as exc:
        res["T-4"].fail(str(exc))

    for i in range(d):
        ai = alpha[i]
        if ai is None:
            for c in ("T-5", "T-6", "T-7"):
                res[c].fail(f"row {i + 1}: alpha_{i + 1} unavailable")
            continue
        for j in range(i, d):
            dist = spec.A[i][j]
            if dist is not None and math.isinf(dist.moment(ai)):
                res["T-5"].fail(f"E[A[{i + 1}][{j + 1}]^{ai:.6g}] = inf for {dist}")
        if math.isinf(spec.B[i].moment(ai)):
            res["T-6"].fail(f"E[B[{i + 1}]^{ai:.6g}] = inf for {spec.B[i]}")
        try:
            v = spec.A[i][i].log_moment(ai)
            if not math.isfinite(v):
                res["T-7"].fail(f"E[A^a log A] not finite for A[{i + 1}][{i + 1}]")
        except DivergentMomentError as exc:
            res["T-7"].fail(str(exc))

    report = ValidationReport([res[c] for c in CONDITIONS], alpha)
    if len(known) == d:
        eps = 0.5 * min(known)
        ok, rho = lyapunov_sufficient(spec, eps, known)
        report.lyapunov_eps, report.spectral_radius, report.lyapunov_ok = eps, rho, ok
    return report


def require_accepted(spec: ModelSpec) -> ValidationReport:
    from triax.errors import ModelError as _ModelError

    report = validate(spec)
    if not report.accepted:
        raise _ModelError(f"model rejected; failing checks: {', '.join(report.failed()) or 'lyapunov'}")
    return report
