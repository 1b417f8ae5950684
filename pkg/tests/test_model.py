import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_reach, lognormal_alpha
from triax import fleet
from triax.distributions import Constant, GarchEntry, LogNormal, Pareto, Uniform
from triax.errors import (
    ArithmeticLawError,
    DuplicateIndicesError,
    EpsOutOfRangeError,
    ModelError,
    NoRootError,
)
from triax.model import (
    DepGraph,
    ModelSpec,
    build_depgraph,
    lyapunov_mc,
    lyapunov_sufficient,
    solve_alpha,
    tail_profile,
    tilde_alpha,
    validate,
)


def graph_from_pattern(pattern: np.ndarray) -> DepGraph:
    d = pattern.shape[0]
    entries = {(i, i): LogNormal(-1.0, 1.0) for i in range(d)}
    for i, j in zip(*np.nonzero(np.triu(pattern, 1))):
        entries[(int(i), int(j))] = Uniform(0.0, 1.0)
    return build_depgraph(ModelSpec.from_entries(entries, [Constant(1.0)] * d))


@st.composite
def patterns(draw, max_d=10):
    d = draw(st.integers(1, max_d))
    bits = draw(st.lists(st.booleans(), min_size=d * d, max_size=d * d))
    pattern = np.triu(np.array(bits, dtype=bool).reshape(d, d), 1)
    alpha = draw(st.permutations(range(1, d + 1)))
    jitter = draw(st.lists(st.floats(0.0, 0.5), min_size=d, max_size=d))
    return pattern, [a + j for a, j in zip(alpha, jitter)]


# solve_alpha


@pytest.mark.parametrize("mu,sigma", [(-1.0, 1.0), (-0.5, 1.0), (-0.3, 0.2), (-2.0, 1.5)])
def test_solve_alpha_lognormal_closed_form(mu, sigma):
    assert solve_alpha(LogNormal(mu, sigma)) == pytest.approx(lognormal_alpha(mu, sigma), abs=1e-10)


def test_solve_alpha_examples():
    assert solve_alpha(LogNormal(-1.0, 1.0)) == pytest.approx(2.0, abs=1e-10)
    assert solve_alpha(LogNormal(-0.5, 1.0)) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(NoRootError):
        solve_alpha(Constant(0.5))


def test_solve_alpha_errors():
    with pytest.raises(NoRootError):
        solve_alpha(LogNormal(0.1, 1.0))  # E log A > 0
    with pytest.raises(NoRootError):
        solve_alpha(Uniform(0.0, 1.0))  # moment stays below 1
    with pytest.raises(ArithmeticLawError):
        # law on {1/2, 2} with weights (2/3, 1/3): log A lives on log(2) Z and the root is s = 1
        class Lattice(Constant):
            def moment(self, s):
                return (2 * 0.5**s + 2.0**s) / 3 if s else 1.0

            def _log_moment(self, s):
                return (2 * 0.5**s * math.log(0.5) + 2.0**s * math.log(2.0)) / 3

        solve_alpha(Lattice(1.0))


@pytest.mark.parametrize(
    "dist", [LogNormal(-1.0, 1.0), Pareto(3.0, 0.5), Uniform(0.0, 1.8), GarchEntry(0.1, 0.8), GarchEntry(0.3, 0.4)],
    ids=str,
)
def test_solve_alpha_postcondition(dist):
    a = solve_alpha(dist)
    assert abs(dist.moment(a) - 1.0) <= 1e-9
    for s in np.linspace(0.0, a, 50)[1:-1]:
        assert dist.moment(s) < 1.0


def test_pareto_root_below_divergence():
    d = Pareto(3.0, 0.5)
    a = solve_alpha(d)
    # a xm^s / (a - s) = 1 solved independently by bisection
    lo, hi = 1e-9, 3.0 - 1e-12
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if 3.0 * 0.5**mid / (3.0 - mid) < 1 else (lo, mid)
    assert a == pytest.approx(lo, abs=1e-10)


# dependence graph


def test_example5_reach():
    g = build_depgraph(fleet.example5())
    assert g.reach[0, 3]  # indirect, through coordinate 2
    assert not g.direct[0, 3]
    assert np.all(np.diag(g.reach))


@settings(max_examples=200)
@given(patterns(max_d=6))
def test_reach_matches_walk_enumeration(case):
    pattern, _ = case
    g = graph_from_pattern(pattern)
    assert np.array_equal(g.reach, brute_force_reach(pattern))


@given(patterns())
def test_graph_invariants(case):
    pattern, _ = case
    g = graph_from_pattern(pattern)
    r = g.reach.astype(int)
    assert np.all(g.reach[g.direct])
    assert np.all(np.diag(g.reach))
    assert np.array_equal((r @ r > 0), g.reach)
    assert not np.any(np.tril(g.reach, -1))


# tilde alpha


def test_example5_tilde_alpha():
    g = build_depgraph(fleet.example5())
    p = tilde_alpha((5, 3, 2, 1, 4), g)
    assert p.tilde_alpha == (1, 1, 2, 1, 4)
    assert [j + 1 for j in p.j0] == [4, 4, 3, 4, 5]


def test_diagonal_pattern_keeps_alpha():
    g = graph_from_pattern(np.zeros((4, 4), dtype=bool))
    p = tilde_alpha((3.0, 1.0, 4.0, 2.0), g)
    assert p.tilde_alpha == p.alpha
    assert p.j0 == (0, 1, 2, 3)


def test_full_pattern_is_suffix_minimum():
    d = 5
    g = graph_from_pattern(np.triu(np.ones((d, d), dtype=bool), 1))
    alpha = (2.5, 4.0, 1.5, 3.0, 2.0)
    p = tilde_alpha(alpha, g)
    assert p.tilde_alpha == tuple(min(alpha[i:]) for i in range(d))


@settings(max_examples=300)
@given(patterns())
def test_tilde_alpha_properties(case):
    pattern, alpha = case
    g = graph_from_pattern(pattern)
    p = tilde_alpha(alpha, g)  # internally asserts both formulas agree
    d = len(alpha)
    assert p.tilde_alpha[-1] == p.alpha[-1]
    for i in range(d):
        assert p.tilde_alpha[i] <= p.alpha[i]
        assert g.reach[i, p.j0[i]]
        assert p.tilde_alpha[i] == min(alpha[j] for j in range(d) if g.reach[i, j])


@given(patterns(max_d=8), st.data())
def test_adding_an_edge_never_raises_tilde_alpha(case, data):
    pattern, alpha = case
    d = len(alpha)
    if d < 2:
        return
    i = data.draw(st.integers(0, d - 2))
    j = data.draw(st.integers(i + 1, d - 1))
    before = tilde_alpha(alpha, graph_from_pattern(pattern)).tilde_alpha
    more = pattern.copy()
    more[i, j] = True
    after = tilde_alpha(alpha, graph_from_pattern(more)).tilde_alpha
    assert all(a <= b for a, b in zip(after, before))


def test_duplicate_indices_rejected():
    g = graph_from_pattern(np.zeros((2, 2), dtype=bool))
    with pytest.raises(DuplicateIndicesError):
        tilde_alpha((2.0, 2.0 + 1e-7), g)
    tilde_alpha((2.0, 2.0 + 1e-5), g)


# ModelSpec structure


def test_modelspec_structure():
    with pytest.raises(ModelError):
        ModelSpec.from_entries({(0, 0): LogNormal(-1, 1), (1, 0): Uniform(0, 1), (1, 1): LogNormal(-1, 1)},
                               [Constant(1.0)] * 2)
    with pytest.raises(ModelError):
        ModelSpec.from_entries({(0, 0): LogNormal(-1, 1)}, [Constant(1.0)] * 2)
    spec = ModelSpec.from_entries(
        {(0, 0): LogNormal(-1, 1), (0, 1): Constant(0.0), (1, 1): LogNormal(-0.5, 1)}, [Constant(1.0)] * 2
    )
    assert spec.A[0][1] is None  # point mass at zero is a structural zero


def test_draw_respects_pattern():
    spec = fleet.example5()
    a, b = spec.draw(np.random.default_rng(0), (100, 3))
    assert a.shape == (100, 3, 5, 5) and b.shape == (100, 3, 5)
    assert np.all(a[..., ~spec.pattern] == 0)
    assert np.all(a >= 0) and np.all(b >= 0)


# validation


def test_validate_diagonal_lognormal_accepted():
    spec = ModelSpec.from_entries({(i, i): LogNormal(-1.0 + 0.2 * i, 1.0) for i in range(3)}, [Constant(1.0)] * 3)
    report = validate(spec)
    assert report.accepted
    assert all(c.passed for c in report.conditions)


def test_validate_zero_b_fails_t2():
    spec = ModelSpec.from_entries({(0, 0): LogNormal(-1.0, 1.0)}, [Constant(0.0)])
    report = validate(spec)
    assert not report.accepted
    assert report.failed() == ["T-2"]


def test_validate_heavy_off_diagonal_fails_t5():
    spec = ModelSpec.from_entries(
        {(0, 0): LogNormal(-1.0, 1.0), (0, 1): Pareto(1.5, 1.0), (1, 1): LogNormal(-0.5, 1.0)}, [Constant(1.0)] * 2
    )
    assert validate(spec).failed() == ["T-5"]


def test_validate_other_failures():
    heavy_b = ModelSpec.from_entries({(0, 0): LogNormal(-1.0, 1.0)}, [Pareto(1.5, 1.0)])
    assert validate(heavy_b).failed() == ["T-6"]
    const_diag = ModelSpec.from_entries({(0, 0): Constant(0.5)}, [Constant(1.0)])
    failed = validate(const_diag).failed()
    assert "T-4" in failed and "T-8" in failed
    ties = ModelSpec.from_entries({(0, 0): LogNormal(-1.0, 1.0), (1, 1): LogNormal(-2.0, 2.0 ** 0.5)},
                                  [Constant(1.0)] * 2)
    assert validate(ties).failed() == ["T-4"]


def test_validation_report_json_shape():
    d = validate(fleet.bivariate()).to_dict()
    assert [c["condition"] for c in d["conditions"]] == [f"T-{i}" for i in range(1, 9)]
    assert d["accepted"] is True
    assert d["lyapunov"]["sufficient"] is True


@pytest.mark.parametrize("name", list(fleet.fleet()))
def test_fleet_models_are_accepted(name):
    assert validate(fleet.fleet()[name]).accepted


# Lyapunov


def test_lyapunov_sufficient_examples():
    spec = ModelSpec.from_entries({(i, i): LogNormal(-1.0, 1.0) for i in range(2)}, [Constant(1.0)] * 2)
    ok, rho = lyapunov_sufficient(spec, 1.0)
    assert ok and rho == pytest.approx(math.exp(-0.5))
    bad = ModelSpec.from_entries({(0, 0): Constant(1.2)}, [Constant(1.0)])
    for eps in (0.1, 1.0, 5.0):
        assert lyapunov_sufficient(bad, eps) == (False, pytest.approx(1.2**eps))


def test_lyapunov_eps_range():
    spec = fleet.bivariate()
    with pytest.raises(EpsOutOfRangeError):
        lyapunov_sufficient(spec, 0.0)
    with pytest.raises(EpsOutOfRangeError):
        lyapunov_sufficient(spec, 2.5)


@pytest.mark.parametrize("name", list(fleet.fleet()))
def test_spectral_radius_is_max_diagonal_moment(name):
    spec = fleet.fleet()[name]
    eps = 0.5 * min(tail_profile(spec).alpha)
    ok, rho = lyapunov_sufficient(spec, eps)
    assert ok
    assert rho == max(x.moment(eps) for x in spec.diagonal())


@pytest.mark.parametrize("mu,sigma", [(-0.3, 1.0), (-1.0, 0.5)])
def test_lyapunov_mc_scalar(mu, sigma):
    est = lyapunov_mc(fleet.lognormal_1d(mu, sigma), n=200, paths=500, seed=3)
    assert abs(est.estimate - mu) <= 3 * est.std_error


def test_lyapunov_mc_diagonal_is_max_mean_log():
    spec = ModelSpec.from_entries({(0, 0): LogNormal(-1.0, 0.3), (1, 1): LogNormal(-0.4, 0.3)}, [Constant(1.0)] * 2)
    est = lyapunov_mc(spec, n=500, paths=1000, seed=5)
    # the other diagonal contributes O(e^{-0.6 n}) to the log norm
    assert abs(est.estimate - (-0.4)) <= 3 * est.std_error + 1e-3


def test_lyapunov_mc_deterministic():
    spec = fleet.full_triangular_3d()
    assert lyapunov_mc(spec, 50, 300, seed=9) == lyapunov_mc(spec, 50, 300, seed=9)
    assert lyapunov_mc(spec, 50, 300, seed=9) != lyapunov_mc(spec, 50, 300, seed=10)
