"""Forward simulation and the path-wise dominant-term decomposition.

Time runs backwards inside a realization window: index ``n`` of a
:class:`Realization` holds ``(A_{-n}, B_{-n})`` for ``n = 0 .. L-1``, so

    Pi_k = A_0 A_{-1} ... A_{-k+1}

is the product of the first ``k`` stored matrices and ``pi_ij(k)`` its entry.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from triax import _streams
from triax._io import open_text
from triax.errors import NotDominatedError, SimulationOverflowError, TooLargeError
from triax.model import ModelSpec, build_depgraph, require_accepted, solve_alpha, tail_profile

BURN_IN_TOL = 1e-12
BURN_IN_MIN = 50
BURN_IN_MAX = 20_000
ENUM_MAX_D = 8
ENUM_MAX_S = 12
DECOMPOSE_BLOCK = 1024
RESCALE_HI = 1e150
RESCALE_LO = 1e-150


@dataclass(frozen=True)
class PathConfig:
    """Monte Carlo settings shared by the simulation routines.

    ``burn_in=None`` picks :func:`default_burn_in`. ``truncation`` is the
    number of series terms kept when a stationary value is rebuilt inside a
    decomposition window; ``None`` means ``burn_in + horizon``.
    """

    paths: int = 10_000
    burn_in: int | None = None
    horizon: int = 10
    truncation: int | None = None
    seed: int = _streams.DEFAULT_SEED
    workers: int | None = None

    def __post_init__(self):
        if self.paths < 1:
            raise ValueError("paths must be >= 1")
        if self.burn_in is not None and self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.truncation is not None and self.truncation < 1:
            raise ValueError("truncation must be >= 1")

    def resolve_burn_in(self, spec: ModelSpec) -> int:
        return default_burn_in(spec) if self.burn_in is None else self.burn_in


def default_burn_in(spec: ModelSpec, tol: float = BURN_IN_TOL) -> int:
    """Smallest ``n`` with ``n^(d-1) rho^n < tol``.

    ``rho`` is the largest diagonal moment ``E[A_ii^k]`` at ``k = min(alpha)/2``;
    for a triangular product the ``k``-th moment of ``||Pi_n||`` is at most a
    polynomial of degree ``d - 1`` in ``n`` times ``rho^n``.
    """
    alpha = [solve_alpha(x) for x in spec.diagonal()]
    kappa = 0.5 * min(alpha)
    rho = max(x.moment(kappa) for x in spec.diagonal())
    log_rho = math.log(rho)
    d = spec.d
    for n in range(1, BURN_IN_MAX + 1):
        if (d - 1) * math.log(n) + n * log_rho < math.log(tol):
            return max(n, BURN_IN_MIN)
    return BURN_IN_MAX


def _as_rng(stream) -> np.random.Generator:
    if isinstance(stream, np.random.Generator):
        return stream
    return _streams.generators(int(stream), 1)[0]


def _check_finite(w: np.ndarray) -> None:
    if not np.all(np.isfinite(w)):
        raise SimulationOverflowError("state exceeded the floating-point range")


def iterate(spec: ModelSpec, w0, steps: int, stream=_streams.DEFAULT_SEED) -> np.ndarray:
    """Run ``W_t = A_t W_{t-1} + B_t`` from ``w0``; returns ``W_1 .. W_steps`` as rows."""
    w = np.asarray(w0, dtype=float).copy()
    if w.shape != (spec.d,) or np.any(w < 0):
        raise ValueError("w0 must be a nonnegative vector of length d")
    rng = _as_rng(stream)
    out = np.empty((steps, spec.d))
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(steps):
            a, b = spec.draw(rng, ())
            w = a @ w + b
            out[t] = w
    _check_finite(out)
    return out


def stationary_sample(spec: ModelSpec, config: PathConfig, check: bool = True) -> np.ndarray:
    """One approximately stationary draw per path, shape ``(paths, d)``.

    Each path starts at 0 and is iterated ``burn_in`` steps, which is the
    series solution truncated after ``burn_in`` terms.
    """
    if check:
        require_accepted(spec)
    burn = config.resolve_burn_in(spec)
    d = spec.d

    def block(rng, size):
        w = np.zeros((size, d))
        for _ in range(burn):
            a, b = spec.draw(rng, size)
            w = np.einsum("pij,pj->pi", a, w) + b
        _check_finite(w)
        return w

    return np.concatenate(_streams.map_blocks(block, config.seed, config.paths, config.workers))


def write_batch_csv(sample: np.ndarray, path) -> None:
    with open_text(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"W_{i + 1}" for i in range(sample.shape[1])])
        for row in sample:
            w.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class Realization:
    """Stored draws ``A[..., n, :, :] = A_{-n}`` and ``B[..., n, :] = B_{-n}``.

    Leading axes, if any, index independent paths.
    """

    spec: ModelSpec
    A: np.ndarray
    B: np.ndarray

    @property
    def length(self) -> int:
        return self.A.shape[-3]


def draw_realization(spec: ModelSpec, stream, length: int, paths: int | None = None) -> Realization:
    rng = _as_rng(stream)
    size = (length,) if paths is None else (paths, length)
    a, b = spec.draw(rng, size)
    return Realization(spec, a, b)


def matrix_product(real: Realization, s: int, start: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """``A_{-start} ... A_{-start-s+1}`` as ``(mantissa, log_scale)``.

    The running product is divided by its largest entry after every step in
    which that entry leaves ``[RESCALE_LO, RESCALE_HI]``, so that a single
    extreme factor cannot push it outside the double range; the true product
    is ``mantissa * exp(log_scale)``.
    """
    if s < 0 or start < 0 or start + s > real.length:
        raise ValueError(f"window [{start}, {start + s}) exceeds realization length {real.length}")
    d = real.spec.d
    batch = real.A.shape[:-3]
    prod = np.broadcast_to(np.eye(d), batch + (d, d)).copy()
    log_scale = np.zeros(batch)
    for n in range(start, start + s):
        a = real.A[..., n, :, :]
        # normalize the factor too, so the multiply itself cannot under- or overflow
        a_top = a.max(axis=(-2, -1))
        a_bad = (a_top > RESCALE_HI) | ((a_top < RESCALE_LO) & (a_top > 0))
        if np.any(a_bad):
            a_scale = np.where(a_bad, a_top, 1.0)
            a = a / a_scale[..., None, None]
            log_scale = log_scale + np.log(a_scale)
        prod = prod @ a
        top = prod.max(axis=(-2, -1))
        bad = (top > RESCALE_HI) | ((top < RESCALE_LO) & (top > 0))
        if np.any(bad):
            scale = np.where(bad, top, 1.0)
            prod = prod / scale[..., None, None]
            log_scale = log_scale + np.log(scale)
    return prod, log_scale


def pi_entry(real: Realization, i: int, j: int, s: int, start: int = 0):
    """Entry ``(i, j)`` (0-based) of ``A_{-start} ... A_{-start-s+1}``."""
    prod, log_scale = matrix_product(real, s, start)
    return prod[..., i, j] * np.exp(log_scale)


def admissible_paths(direct: np.ndarray, i: int, j: int, s: int, restricted: bool = False):
    """Non-decreasing index sequences ``h(0) = i, ..., h(s) = j`` with every step allowed by ``direct``.

    ``restricted`` drops sequences whose first step stays at ``i``.
    """
    d = direct.shape[0]

    def extend(prefix):
        if len(prefix) == s + 1:
            if prefix[-1] == j:
                yield tuple(prefix)
            return
        cur = prefix[-1]
        for nxt in range(cur, j + 1):
            if not direct[cur, nxt]:
                continue
            if restricted and len(prefix) == 1 and nxt == i:
                continue
            yield from extend(prefix + [nxt])

    if not (0 <= i < d and 0 <= j < d):
        raise IndexError("coordinate out of range")
    if i > j:
        return
    yield from extend([i])


def pi_entry_enum(real: Realization, i: int, j: int, s: int, restricted: bool = False, start: int = 0):
    """``pi_ij(s)`` as an explicit sum over admissible index sequences.

    Intended as an oracle for :func:`pi_entry`; limited to ``d <= 8`` and ``s <= 12``.
    """
    d = real.spec.d
    if d > ENUM_MAX_D or s > ENUM_MAX_S:
        raise TooLargeError(f"enumeration limited to d <= {ENUM_MAX_D}, s <= {ENUM_MAX_S}")
    if start + s > real.length:
        raise ValueError("window exceeds realization length")
    direct = build_depgraph(real.spec).direct
    total = np.zeros(real.A.shape[:-3])
    for h in admissible_paths(direct, i, j, s, restricted):
        term = np.ones(real.A.shape[:-3])
        for p in range(s):
            term = term * real.A[..., start + p, h[p], h[p + 1]]
        total = total + term
    return total if total.ndim else float(total)


TRACE_COLUMNS = (
    "path_id",
    "s",
    "Q_F",
    "Q_T",
    "Q_W",
    "Q_B",
    "QpW",
    "QppW",
    "QstarW",
    "R",
    "pi_lj0",
    "W_j0_ms",
    "W_l_0",
)


@dataclass(frozen=True)
class DecompositionTrace:
    """Per-path pieces of coordinate ``l`` at horizon ``s``.

    ``R`` is ``W_l_0 - pi_lj0 * W_j0_ms``. ``R_split`` rebuilds the same value
    from the split ``s = s1 + s2`` as ``Q''_W(s1) + Q*_W(s1, s2) + Q_B(s1) + Q_T(s1)``.
    """

    coordinate: int
    j0: int
    s: int
    s1: int
    truncation: int
    seed: int
    Q_F: np.ndarray
    Q_T: np.ndarray
    Q_W: np.ndarray
    Q_B: np.ndarray
    QpW: np.ndarray
    QppW: np.ndarray
    QstarW: np.ndarray
    R: np.ndarray
    R_split: np.ndarray
    pi_lj0: np.ndarray
    W_j0_ms: np.ndarray
    W_l_0: np.ndarray

    @property
    def paths(self) -> int:
        return self.W_l_0.shape[0]

    def residuals(self) -> dict[str, float]:
        """Largest relative violation of each exact identity over all paths."""

        def rel(lhs, rhs, scale):
            return float(np.max(np.abs(lhs - rhs) / np.maximum(scale, np.finfo(float).tiny)))

        return {
            "Q_F=Q_W+Q_B": rel(self.Q_F, self.Q_W + self.Q_B, self.Q_F),
            "Q_W=QpW+QppW": rel(self.Q_W, self.QpW + self.QppW, self.Q_W),
            "W=Q_F+Q_T": rel(self.W_l_0, self.Q_F + self.Q_T, self.W_l_0),
            "W=pi*W+R": rel(self.W_l_0, self.pi_lj0 * self.W_j0_ms + self.R, self.W_l_0),
            "R=R_split": rel(self.R, self.R_split, self.W_l_0),
        }

    def to_csv(self, path) -> None:
        cols = [
            self.Q_F, self.Q_T, self.Q_W, self.Q_B, self.QpW, self.QppW,
            self.QstarW, self.R, self.pi_lj0, self.W_j0_ms, self.W_l_0,
        ]
        with open_text(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for p in range(self.paths):
                w.writerow([p + 1, self.s] + [repr(float(c[p])) for c in cols])


def _series_parts(A, B, Wt, l, h, L):
    """``(Q_F(h), Q_T(h))``: the first ``h`` terms of ``W_l0 = sum_n Pi^(l)_n D_{l,-n}`` and the rest."""
    d = A.shape[-1]
    diag = A[:, :, l, l]
    pi_l = np.concatenate([np.ones((A.shape[0], 1)), np.cumprod(diag, axis=1)], axis=1)
    D = B[:, :, l].copy()
    for j in range(l + 1, d):
        D += A[:, :, l, j] * Wt[:, 1 : L + 1, j]
    terms = pi_l[:, :L] * D
    return terms[:, :h].sum(axis=1), terms[:, h:].sum(axis=1)


def _q_b(A, B, l, h, reach_l):
    """B-carrying part: paths that leave ``l`` at step ``n`` and end on a ``B`` term before ``h``."""
    P = A.shape[0]
    out = np.zeros(P)
    pi_l = np.ones(P)
    for n in range(h):
        inner = B[:, n, l].copy()
        v = A[:, n, l, :] * reach_l
        v[:, l] = 0.0
        for m in range(1, h - n):
            inner += np.einsum("pj,pj->p", v, B[:, n + m, :])
            v = np.einsum("pi,pij->pj", v, A[:, n + m])
        out += pi_l * inner
        pi_l = pi_l * A[:, n, l, l]
    return out


def _decompose_block(spec, graph, l, j0, s, s1, L, rng, size):
    d = spec.d
    A, B = spec.draw(rng, (size, L))
    Wt = np.zeros((size, L + 1, d))
    for n in range(L - 1, -1, -1):
        Wt[:, n] = np.einsum("pij,pj->pi", A[:, n], Wt[:, n + 1]) + B[:, n]
    _check_finite(Wt)

    rows = np.zeros((size, s + 1, d))
    rows[:, 0, l] = 1.0
    for k in range(s):
        rows[:, k + 1] = np.einsum("pi,pij->pj", rows[:, k], A[:, k])

    reach = graph.reach
    others = np.array([j for j in range(d) if reach[l, j] and j != l], dtype=int)
    jp = np.array([j for j in others if reach[j, j0]], dtype=int)
    jpp = np.array([j for j in others if not reach[j, j0]], dtype=int)

    def q_w(h, js):
        if js.size == 0:
            return np.zeros(size)
        return np.einsum("pj,pj->p", rows[:, h, js], Wt[:, h, js])

    q_f, q_t = _series_parts(A, B, Wt, l, s, L)
    q_f1, q_t1 = _series_parts(A, B, Wt, l, s1, L)
    reach_l = reach[l].astype(float)

    # Q*_W: W_{j,-s1} minus its j0-carried part over the last s2 steps
    mid = np.broadcast_to(np.eye(d), (size, d, d)).copy()
    for n in range(s1, s):
        mid = mid @ A[:, n]
    col = mid[:, :, j0]
    w_j0 = Wt[:, s, j0]
    q_star = -rows[:, s1, l] * col[:, l] * w_j0
    for j in jp:
        q_star = q_star + rows[:, s1, j] * (Wt[:, s1, j] - col[:, j] * w_j0)

    pi_lj0 = rows[:, s, j0]
    w_l0 = Wt[:, 0, l]
    r_split = q_w(s1, jpp) + q_star + _q_b(A, B, l, s1, reach_l) + q_t1
    return {
        "Q_F": q_f,
        "Q_T": q_t,
        "Q_W": q_w(s, others),
        "Q_B": _q_b(A, B, l, s, reach_l),
        "QpW": q_w(s, jp),
        "QppW": q_w(s, jpp),
        "QstarW": q_star,
        "R": w_l0 - pi_lj0 * w_j0,
        "R_split": r_split,
        "pi_lj0": pi_lj0,
        "W_j0_ms": w_j0,
        "W_l_0": w_l0,
    }


def decompose(spec: ModelSpec, l: int, s: int, config: PathConfig, s1: int | None = None) -> DecompositionTrace:
    """Split ``W_{l,0}`` into its finite-sum, tail, ``W``- and ``B``-carrying parts, per path.

    ``l`` is 0-based and must be dominated by another coordinate ``j0``. The
    window holds ``truncation`` steps (default ``burn_in + s``) and starts
    from zero, so ``W_{l,0}`` equals the truncated series exactly.
    """
    profile = tail_profile(spec)
    j0 = profile.j0[l]
    if j0 == l:
        raise NotDominatedError(
            f"coordinate {l + 1} is not dominated (its index is its own); use the Goldie constant instead"
        )
    require_accepted(spec)
    if s < 2:
        raise ValueError("horizon s must be >= 2 to split it")
    s1 = s // 2 if s1 is None else s1
    if not 1 <= s1 < s:
        raise ValueError(f"split point s1 must satisfy 1 <= s1 < s, got {s1}")
    L = config.truncation if config.truncation is not None else config.resolve_burn_in(spec) + s
    if L <= s:
        raise ValueError(f"truncation {L} must exceed the horizon {s}")
    graph = build_depgraph(spec)

    def block(rng, size):
        return _decompose_block(spec, graph, l, j0, s, s1, L, rng, size)

    parts = _streams.map_blocks(block, config.seed, config.paths, config.workers, DECOMPOSE_BLOCK)
    merged = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    return DecompositionTrace(coordinate=l, j0=j0, s=s, s1=s1, truncation=L, seed=config.seed, **merged)


@dataclass(frozen=True)
class USequence:
    """Estimates of ``u(s) = E[pi_{l j0}(s)^alpha]`` for ``s = 1 .. s_max``.

    ``estimate`` uses a telescoping form that is non-decreasing in ``s`` on
    every path; ``naive`` is the plain sample mean of ``pi^alpha``. Both are
    unbiased for the same quantity.
    """

    coordinate: int
    target: int
    exponent: float
    s: np.ndarray
    estimate: np.ndarray
    std_error: np.ndarray
    naive: np.ndarray
    naive_std_error: np.ndarray
    violations: int
    paths: int
    seed: int
    converged: bool = field(default=False)

    @property
    def limit(self) -> tuple[float, float]:
        return float(self.estimate[-1]), float(self.std_error[-1])

    def to_csv(self, path) -> None:
        with open_text(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "estimate", "std_error", "naive", "naive_std_error"])
            for row in zip(self.s, self.estimate, self.std_error, self.naive, self.naive_std_error):
                w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


def has_converged(values: np.ndarray, tail: float = 0.2, rtol: float = 0.01) -> bool:
    """Relative change over the last ``tail`` fraction of the sequence is below ``rtol``."""
    n = len(values)
    start = min(int(math.floor((1 - tail) * n)), n - 1)
    last = values[-1]
    if last == 0:
        return False
    return abs(last - values[start]) / abs(last) < rtol


def u_sequence(
    spec: ModelSpec, l: int, s_max: int, config: PathConfig, target: int | None = None
) -> USequence:
    """Estimate ``E[pi_{l,target}(s)^alpha_target]`` for ``s = 1 .. s_max`` with common random numbers.

    ``target`` defaults to the dominating coordinate ``j0(l)``. With
    ``X = pi_{l t}(k)``, ``a = A_{tt,-k}`` and ``Y = pi_{l t}(k+1) - X a >= 0``, each
    path contributes ``sum_k [(X a + Y)^alpha - (X a)^alpha]``; since ``a`` is
    independent of ``X`` with ``E a^alpha = 1`` the increments average to
    ``u(k+1) - u(k)``.
    """
    if s_max < 1:
        raise ValueError("s_max must be >= 1")
    profile = tail_profile(spec)
    if target is None:
        target = profile.j0[l]
        if target == l:
            raise NotDominatedError(f"coordinate {l + 1} is not dominated")
    require_accepted(spec)
    alpha = profile.alpha[target]
    d = spec.d

    def block(rng, size):
        row = np.zeros((size, d))
        row[:, l] = 1.0
        x = row[:, target]
        u = x**alpha
        tele = np.empty((size, s_max))
        naive = np.empty((size, s_max))
        bad = 0
        for k in range(s_max):
            a, _b = spec.draw(rng, size)
            row = np.einsum("pi,pij->pj", row, a)
            lower = x * a[:, target, target]
            nxt = row[:, target]
            bad += int(np.count_nonzero(nxt < lower))
            u = u + (nxt**alpha - lower**alpha)
            tele[:, k] = u
            naive[:, k] = nxt**alpha
            x = nxt
        return tele.sum(0), (tele * tele).sum(0), naive.sum(0), (naive * naive).sum(0), size, bad

    parts = _streams.map_blocks(block, config.seed, config.paths, config.workers)
    counts = [p[4] for p in parts]
    est, se = _streams.merge_mean([p[0] for p in parts], [p[1] for p in parts], counts)
    nav, nav_se = _streams.merge_mean([p[2] for p in parts], [p[3] for p in parts], counts)
    return USequence(
        coordinate=l,
        target=target,
        exponent=alpha,
        s=np.arange(1, s_max + 1),
        estimate=est,
        std_error=se,
        naive=nav,
        naive_std_error=nav_se,
        violations=sum(p[5] for p in parts),
        paths=config.paths,
        seed=config.seed,
        converged=has_converged(est),
    )

