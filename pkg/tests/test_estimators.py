import functools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import goldie_lognormal_unit_b
from triax import fleet
from triax.distributions import Constant, LogNormal, Pareto, Uniform
from triax.errors import DegenerateSampleError, HypothesisFailError, MissingUError, WrongRegimeError
from triax.estimators import (
    breiman_check,
    constants_recursive,
    default_k,
    goldie_constant,
    hill,
    rank_regression,
    survival_scaling,
    tail_grid,
)
from triax.model import ModelSpec, build_depgraph, tail_profile
from triax.simulate import PathConfig, stationary_sample

FLEET_PATHS = 200_000


def pareto_sample(n, seed, a=2.0, xm=1.0):
    return Pareto(a, xm).draw(np.random.default_rng(seed), n)


@functools.lru_cache(maxsize=None)
def fleet_sample(name: str) -> np.ndarray:
    spec = fleet.fleet()[name]
    return stationary_sample(spec, PathConfig(paths=FLEET_PATHS, seed=2024))


def lognormal_triangle(alpha, pattern=None) -> ModelSpec:
    """Full (or given) upper-triangular model with lognormal(-a/2, 1) diagonals of index a."""
    d = len(alpha)
    entries = {(i, i): LogNormal(-a / 2.0, 1.0) for i, a in enumerate(alpha)}
    for i in range(d):
        for j in range(i + 1, d):
            if pattern is None or pattern[i][j]:
                entries[(i, j)] = Uniform(0.0, 1.0)
    return ModelSpec.from_entries(entries, [Constant(1.0)] * d)


# Hill and rank regression


@pytest.mark.parametrize("estimator", [hill, rank_regression])
def test_exact_pareto(estimator):
    est = estimator(pareto_sample(100_000, 1), 1000)
    assert 1.8 <= est.point <= 2.2
    assert abs(est.point - 2.0) <= 3 * est.std_error
    assert (est.k, est.n) == (1000, 100_000)


@pytest.mark.parametrize("estimator", [hill, rank_regression])
@given(c=st.floats(1e-3, 1e3))
@settings(max_examples=25)
def test_scale_invariance(estimator, c):
    x = pareto_sample(5000, 2)
    assert estimator(c * x, 200).point == pytest.approx(estimator(x, 200).point, rel=1e-9)


@pytest.mark.parametrize("estimator", [hill, rank_regression])
def test_degenerate_samples(estimator):
    with pytest.raises(DegenerateSampleError):
        estimator(np.full(100, 3.0), 10)
    with pytest.raises(DegenerateSampleError):
        estimator(np.r_[np.zeros(95), np.arange(1.0, 6.0)], 10)


def test_k_out_of_range():
    with pytest.raises(ValueError):
        hill(pareto_sample(10, 0), 10)


def test_hill_closed_form():
    # top 2 over the third largest: logs are log 2 and log 4
    est = hill([1.0, 1.5, 2.0, 4.0, 8.0], 2)
    assert est.point == pytest.approx(1.0 / (1.5 * math.log(2.0)))
    assert est.std_error == pytest.approx(est.point / math.sqrt(2))


def test_default_k():
    assert default_k(1000) == 99  # floor(1000^(2/3)) with float rounding just below 100
    assert default_k(200_000) == int(math.floor(200_000 ** (2 / 3)))
    est = hill(pareto_sample(8000, 3))
    assert est.k == default_k(8000)


def test_estimate_json_fields():
    d = hill(pareto_sample(1000, 3), 50).to_dict()
    assert set(d) == {"point", "std_error", "k", "n", "method", "coordinate", "seed"}
    assert d["method"] == "hill"


def test_hill_and_rank_agree_on_univariate_sre():
    w = fleet_sample("lognormal_1d")[:, 0]
    h, r = hill(w), rank_regression(w)
    assert abs(h.point - r.point) <= 0.15 * h.point


FLEET_COORDS = [(name, i) for name, spec in fleet.fleet().items() for i in range(spec.d)]


@pytest.mark.slow
@pytest.mark.parametrize("name,i", FLEET_COORDS)
def test_hill_and_rank_agree_across_fleet(name, i):
    w = fleet_sample(name)[:, i]
    h, r = hill(w), rank_regression(w)
    assert abs(h.point - r.point) <= 3 * math.hypot(h.std_error, r.std_error)


GAP_COORDS = [
    (name, i)
    for name, spec in fleet.fleet().items()
    for i in range(spec.d)
    if abs(tail_profile(spec).alpha[i] - tail_profile(spec).tilde_alpha[i]) >= 0.5
]
# second-order bias at n = 2e5 keeps these coordinates above the 20% band; see the notes
SLOW_TO_INHERIT = {("bivariate", 0), ("full_triangular_3d", 0), ("garch_2d", 0)}


@pytest.mark.slow
@pytest.mark.parametrize("name,i", GAP_COORDS)
def test_hill_tracks_inherited_index(name, i, request):
    if (name, i) in SLOW_TO_INHERIT:
        request.applymarker(pytest.mark.xfail(strict=True, reason="pre-asymptotic bias toward the own index"))
    profile = tail_profile(fleet.fleet()[name])
    est = hill(fleet_sample(name)[:, i]).point
    assert abs(est - profile.tilde_alpha[i]) <= 0.2 * profile.tilde_alpha[i]


@pytest.mark.slow
@pytest.mark.parametrize("name,i", GAP_COORDS)
def test_hill_closer_to_inherited_than_own_index(name, i):
    # the weaker, direction-only form of the same property holds everywhere
    profile = tail_profile(fleet.fleet()[name])
    est = hill(fleet_sample(name)[:, i]).point
    assert abs(est - profile.tilde_alpha[i]) < abs(est - profile.alpha[i])


# survival scaling


def test_tail_grid_bounds():
    x = pareto_sample(10_000, 5)
    g = tail_grid(x)
    s = np.sort(x)
    assert len(g) == 40
    assert g[0] == s[5000]
    assert g[-1] == pytest.approx(s[10_000 - 200 - 1])
    assert np.all(np.diff(np.log(g)) == pytest.approx(np.log(g[1] / g[0])))


def test_survival_scaling_exact_pareto_is_flat():
    curve = survival_scaling(pareto_sample(1_000_000, 6), 2.0)
    assert curve.plateau == pytest.approx(1.0, rel=0.05)
    assert abs(curve.slope) < 0.15


def test_scaling_csv(tmp_path):
    curve = survival_scaling(pareto_sample(1000, 6), 2.0)
    out = tmp_path / "c.csv"
    curve.to_csv(out)
    back = np.loadtxt(out, delimiter=",", skiprows=1)
    assert np.array_equal(back[:, 0], curve.x) and np.array_equal(back[:, 1], curve.value)
    assert out.read_text().splitlines()[0] == "x,x_pow_alpha_times_survival"


# Goldie constant


def test_goldie_matches_closed_form():
    spec = fleet.lognormal_1d()
    w = stationary_sample(spec, PathConfig(paths=200_000, seed=9))
    est = goldie_constant(spec, 0, w, stream=10)
    exact = goldie_lognormal_unit_b(-1.0, 1.0)
    assert abs(est.point - exact) <= 5 * est.std_error
    # mu + sigma^2 alpha at alpha = 2; the estimator evaluates it at the solved root
    assert LogNormal(-1.0, 1.0).log_moment(2.0) == pytest.approx(1.0, rel=1e-14)
    assert est.denominator == pytest.approx(1.0, rel=1e-10)
    assert est.min_block_numerator >= 0


@pytest.mark.parametrize("name", ["full_triangular_3d", "example5"])
def test_goldie_numerator_nonnegative_every_block(name):
    spec = fleet.fleet()[name]
    profile = tail_profile(spec)
    w = stationary_sample(spec, PathConfig(paths=20_000, seed=3))
    for k in range(spec.d):
        if profile.j0[k] == k:
            est = goldie_constant(spec, k, w, stream=4, profile=profile)
            assert est.min_block_numerator >= 0
            assert est.point > 0


def test_goldie_wrong_regime():
    spec = fleet.bivariate()
    w = stationary_sample(spec, PathConfig(paths=100, burn_in=20))
    with pytest.raises(WrongRegimeError):
        goldie_constant(spec, 0, w)


def test_goldie_rejects_bad_sample_shape():
    spec = fleet.bivariate()
    with pytest.raises(ValueError):
        goldie_constant(spec, 1, np.ones((10, 3)))


# recursive constants


def test_constants_worked_four_dim_example():
    # alpha_3 < alpha_4 < alpha_2 < alpha_1 on the full triangle
    spec = lognormal_triangle([4.0, 3.0, 1.0, 2.0])
    profile, graph = tail_profile(spec), build_depgraph(spec)
    assert list(profile.j0) == [2, 2, 2, 3]
    rep = constants_recursive(profile, graph, {0: 1.5, 1: 2.0}, {2: 3.0, 3: 5.0})
    assert rep.constants == pytest.approx([4.5, 6.0, 3.0, 5.0])
    assert rep.methods == ["recursive", "recursive", "goldie-direct", "goldie-direct"]
    assert rep.chains == [[0, 2], [1, 2], [2], [3]]


def test_constants_diagonal_model():
    entries = {(i, i): LogNormal(-a / 2.0, 1.0) for i, a in enumerate([3.0, 2.0, 4.0])}
    spec = ModelSpec.from_entries(entries, [Constant(1.0)] * 3)
    rep = constants_recursive(tail_profile(spec), build_depgraph(spec), {}, {0: 1.0, 1: 2.0, 2: 3.0})
    assert rep.constants == [1.0, 2.0, 3.0]
    assert set(rep.methods) == {"goldie-direct"} and rep.u == {}


def test_constants_example5_pattern():
    spec = fleet.example5()
    profile = tail_profile(spec)
    rep = constants_recursive(profile, build_depgraph(spec), {0: 2.0, 1: 3.0}, {2: 1.0, 3: 7.0, 4: 11.0})
    assert rep.constants == pytest.approx([14.0, 21.0, 1.0, 7.0, 11.0])
    assert rep.chains[0] == [0, 3] and rep.chains[1] == [1, 3]
    assert rep.methods[2:] == ["goldie-direct"] * 3
    d = rep.to_dict()["coordinates"]
    assert d[0]["chain"] == [1, 4] and d[0]["u"] == 2.0


def test_constants_error_propagation():
    spec = fleet.bivariate()
    rep = constants_recursive(tail_profile(spec), build_depgraph(spec), {0: (2.0, 0.2)}, {1: (3.0, 0.3)})
    assert rep.constants[0] == 6.0
    assert rep.std_errors[0] == pytest.approx(6.0 * math.hypot(0.1, 0.1))


def test_constants_missing_u():
    spec = fleet.example5()
    with pytest.raises(MissingUError):
        constants_recursive(tail_profile(spec), build_depgraph(spec), {0: 2.0}, {2: 1.0, 3: 7.0, 4: 11.0})


@given(st.permutations(range(5)))
def test_constants_order_invariant(order):
    spec = fleet.example5()
    profile, graph = tail_profile(spec), build_depgraph(spec)
    u, g = {0: (2.0, 0.1), 1: (3.0, 0.2)}, {2: (1.0, 0.1), 3: (7.0, 0.5), 4: (11.0, 1.0)}
    ref = constants_recursive(profile, graph, u, g)
    rep = constants_recursive(profile, graph, u, g, order=order)
    assert rep == ref


# Breiman bound


def test_breiman_constant_factor_equality():
    y = pareto_sample(1_000_000, 7)
    rep = breiman_check(Constant(2.0), y, 2.0, M=1.0, stream=8)
    assert rep.plateau == pytest.approx(4.0, rel=0.05)
    assert rep.bound == 4.0
    assert rep.holds


def test_breiman_identity_factor():
    y = pareto_sample(100_000, 7)
    rep = breiman_check(Constant(1.0), y, 2.0, M=1.0)
    direct = survival_scaling(y, 2.0)
    assert np.array_equal(rep.curve.value, direct.value)


def test_breiman_lognormal_factor():
    x = LogNormal(0.0, 0.3)
    rep = breiman_check(x, pareto_sample(1_000_000, 7), 2.0, M=1.0, stream=9)
    assert rep.plateau <= 1.05 * x.moment(2.0)
    assert rep.holds


def test_breiman_hypothesis_fail_on_m():
    with pytest.raises(HypothesisFailError):
        breiman_check(Constant(1.0), pareto_sample(100_000, 7), 2.0, M=0.5)


def test_breiman_hypothesis_fail_on_moment():
    with pytest.raises(HypothesisFailError):
        breiman_check(Pareto(2.0, 1.0), pareto_sample(1000, 7), 2.0, M=1.0)
