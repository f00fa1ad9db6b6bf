"""Rate models: kernel decompositions, death vectors, birth proposals,
and the environment-averaged reduction."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coupledbd.errors import ModelError
from coupledbd.geometry import (
    FiniteConfiguration,
    MarkedConfiguration,
    Torus,
    pairwise_distances,
)
from coupledbd.models import (
    birth_proposal,
    build_averaged_model,
    averaged_rates,
    averaged_death_vector,
    decomposition_kernels,
    env_death_vector,
    env_rates,
    sys_death_vector,
    sys_rates,
    validate_model_on_torus,
    variant_name,
)
from coupledbd.potentials import Potential, potential_functionals
from coupledbd.tables import CorrelationTable, GridSpec

from conftest import (
    ALL_MODELS,
    TORUS1,
    bdlp_model,
    branching_model,
    gg_model,
    random_marked,
    two_bdlp_model,
)


def _marked_subsets(eta):
    np_, nm = eta.plus.size, eta.minus.size
    for mp in range(1 << np_):
        ip = [i for i in range(np_) if mp >> i & 1]
        for mm in range(1 << nm):
            im = [i for i in range(nm) if mm >> i & 1]
            yield MarkedConfiguration(plus=eta.plus.subset(ip),
                                      minus=eta.minus.subset(im))


@pytest.mark.parametrize("build", ALL_MODELS, ids=lambda b: b.__name__)
def test_kernel_subset_sums_reproduce_the_rates(build):
    m = build()
    rng = np.random.default_rng(31)
    for n_plus, n_minus in [(0, 0), (1, 0), (0, 2), (2, 1), (2, 2), (1, 3)]:
        eta = random_marked(rng, TORUS1, n_plus, n_minus)
        x = TORUS1.uniform(rng, 1)[0]
        sums = np.zeros(4)
        for xi in _marked_subsets(eta):
            k = decomposition_kernels(m, x, xi, TORUS1)
            # minus kernels must not double count over system subsets
            if xi.plus.size == 0:
                sums[0] += k[0]
                sums[1] += k[1]
            sums[2] += k[2]
            sums[3] += k[3]
        d_env, b_env = env_rates(x, eta.minus, m, TORUS1)
        d_sys, b_sys = sys_rates(x, eta, m, TORUS1)
        for got, want in zip(sums, (d_env, b_env, d_sys, b_sys)):
            assert got == pytest.approx(want, rel=1e-10, abs=1e-10)


def test_minus_kernels_ignore_system_points():
    rng = np.random.default_rng(8)
    for build in ALL_MODELS:
        m = build()
        eta = random_marked(rng, TORUS1, 2, 2)
        bare = MarkedConfiguration(plus=FiniteConfiguration.empty(1),
                                   minus=eta.minus)
        x = TORUS1.uniform(rng, 1)[0]
        full = decomposition_kernels(m, x, eta, TORUS1)
        stripped = decomposition_kernels(m, x, bare, TORUS1)
        assert full[0] == stripped[0]
        assert full[1] == stripped[1]


@pytest.mark.parametrize("build", ALL_MODELS, ids=lambda b: b.__name__)
def test_death_vectors_match_pointwise_rates(build):
    m = build()
    rng = np.random.default_rng(17)
    gamma = random_marked(rng, TORUS1, 4, 3)
    dm = env_death_vector(gamma.minus, m, TORUS1)
    for i in range(gamma.minus.size):
        rest = gamma.minus.remove_index(i)
        d, _ = env_rates(gamma.minus.points[i], rest, m, TORUS1)
        assert dm[i] == pytest.approx(d, rel=1e-12)
    dp = sys_death_vector(gamma, m, TORUS1)
    for i in range(gamma.plus.size):
        rest = MarkedConfiguration(plus=gamma.plus.remove_index(i),
                                   minus=gamma.minus)
        d, _ = sys_rates(gamma.plus.points[i], rest, m, TORUS1)
        assert dp[i] == pytest.approx(d, rel=1e-12)


@pytest.mark.parametrize("build", ALL_MODELS, ids=lambda b: b.__name__)
@pytest.mark.parametrize("component", ["environment", "system"])
def test_proposal_times_acceptance_equals_birth_density(build, component):
    m = build()
    rng = np.random.default_rng(23)
    gamma = random_marked(rng, TORUS1, 3, 3)
    prop = birth_proposal(component, gamma, m, TORUS1)
    for x in TORUS1.uniform(rng, 40):
        acc = prop.acceptance(x)
        assert 0.0 <= acc <= 1.0 + 1e-12
        dom = prop.dominating_intensity(x)
        if component == "environment":
            _, b = env_rates(x, gamma.minus, m, TORUS1)
        else:
            _, b = sys_rates(x, gamma, m, TORUS1)
        assert acc * dom == pytest.approx(b, rel=1e-10, abs=1e-10)


def test_gg_environment_proposal_mass_is_activity_times_volume():
    m = gg_model()
    gamma = random_marked(np.random.default_rng(1), TORUS1, 0, 5)
    prop = birth_proposal("environment", gamma, m, TORUS1)
    assert prop.total_mass == pytest.approx(m.z_minus * TORUS1.volume, rel=1e-12)


def test_branching_candidates_stay_within_dispersal_range():
    m = branching_model()
    rng = np.random.default_rng(3)
    gamma = random_marked(rng, TORUS1, 1, 2)
    parent = gamma.plus.points[0]
    prop = birth_proposal("system", gamma, m, TORUS1)
    for _ in range(200):
        x = prop.sample_candidate(rng)
        assert x is not None
        d = pairwise_distances(x[None, :], parent[None, :], TORUS1)[0, 0]
        assert d <= m.a_plus.cutoff + 1e-9


def test_empty_proposal_yields_no_candidate():
    m = bdlp_model()
    gamma = MarkedConfiguration(plus=FiniteConfiguration.empty(1),
                                minus=FiniteConfiguration.empty(1))
    prop = birth_proposal("system", gamma, m, TORUS1)
    assert prop.total_mass == 0.0
    assert prop.sample_candidate(np.random.default_rng(0)) is None


@given(st.integers(0, 4), st.integers(0, 4), st.integers(0, 10**6))
def test_rates_are_nonnegative(n_plus, n_minus, seed):
    rng = np.random.default_rng(seed)
    gamma = random_marked(rng, TORUS1, n_plus, n_minus)
    x = TORUS1.uniform(rng, 1)[0]
    for build in ALL_MODELS:
        m = build()
        d, b = env_rates(x, gamma.minus, m, TORUS1)
        assert d >= 0.0 and b >= 0.0
        d, b = sys_rates(x, gamma, m, TORUS1)
        assert d >= 0.0 and b >= 0.0


def test_validate_model_rejects_cutoff_beyond_half_box():
    m = gg_model()
    with pytest.raises(ModelError):
        validate_model_on_torus(m, Torus(dim=1, side=1.5))
    validate_model_on_torus(m, TORUS1)


def test_variant_names_are_stable():
    names = [variant_name(b()) for b in ALL_MODELS]
    assert names == ["glauber_glauber", "bdlp_in_glauber",
                     "branching_in_glauber", "two_bdlp"]


# ---------------------------------------------------------------------------
# environment-averaged reduction

def _poisson_table(rho, order=3, points=48):
    grid = GridSpec(torus=TORUS1, points_per_axis=points)
    return CorrelationTable.poisson(grid, order, rho)


def test_additive_averaging_is_exact_in_the_density():
    rho = 0.7
    table = _poisson_table(rho)
    m = bdlp_model()
    am = build_averaged_model(m, table, TORUS1)
    assert am.rho_inv == pytest.approx(rho, abs=1e-12)
    assert am.m_bar == pytest.approx(
        rho * potential_functionals(m.b_minus, 1).l1, rel=1e-12)
    assert am.lambda_bar == pytest.approx(
        rho * potential_functionals(m.b_plus, 1).l1, rel=1e-12)
    t = two_bdlp_model()
    at = build_averaged_model(t, table, TORUS1)
    assert at.phi_bar_minus == pytest.approx(
        rho * potential_functionals(t.vphi_minus, 1).l1, rel=1e-12)
    assert at.phi_bar_plus == pytest.approx(
        rho * potential_functionals(t.vphi_plus, 1).l1, rel=1e-12)


def test_exponential_averaging_matches_poisson_closed_form():
    m = gg_model()
    beta = potential_functionals(m.phi_minus, 1).beta
    for rho in (0.2, 0.5):
        am = build_averaged_model(m, _poisson_table(rho), TORUS1)
        exact = math.exp(-rho * beta)
        assert abs(am.lambda_bar - exact) <= am.lambda_bar_tail + 1e-12
        assert am.lambda_bar_tail <= 0.05


def test_averaging_from_the_empty_environment_is_trivial():
    grid = GridSpec(torus=TORUS1, points_per_axis=48)
    empty = CorrelationTable.delta_empty(grid, 3)
    assert build_averaged_model(gg_model(), empty, TORUS1).lambda_bar == 1.0
    am = build_averaged_model(bdlp_model(), empty, TORUS1)
    assert am.lambda_bar == 0.0 and am.m_bar == 0.0


def test_uncoupled_averaged_system_reproduces_base_rates():
    # phi_minus = 0 removes the coupling, so the averaged system must have
    # exactly the base system rates at an empty environment
    s = Potential.step(0.5, 1.0)
    m = type(gg_model())(z_minus=0.3, psi=s, z_plus=0.4,
                         phi_minus=Potential.zero(), phi_plus=s)
    am = build_averaged_model(m, _poisson_table(0.5), TORUS1)
    assert am.lambda_bar == 1.0 and am.lambda_bar_tail == 0.0
    rng = np.random.default_rng(6)
    gp = FiniteConfiguration(TORUS1.uniform(rng, 3))
    bare = MarkedConfiguration(plus=gp, minus=FiniteConfiguration.empty(1))
    for x in TORUS1.uniform(rng, 10):
        assert averaged_rates(x, gp, am, TORUS1) == pytest.approx(
            sys_rates(x, bare, m, TORUS1), rel=1e-12)


def test_averaged_death_vector_matches_pointwise():
    table = _poisson_table(0.6)
    rng = np.random.default_rng(12)
    gp = FiniteConfiguration(TORUS1.uniform(rng, 4))
    for build in ALL_MODELS:
        am = build_averaged_model(build(), table, TORUS1)
        vec = averaged_death_vector(gp, am, TORUS1)
        for i in range(gp.size):
            d, _ = averaged_rates(gp.points[i], gp.remove_index(i), am, TORUS1)
            assert vec[i] == pytest.approx(d, rel=1e-12)


def test_averaged_model_has_no_environment_component():
    am = build_averaged_model(gg_model(), _poisson_table(0.3), TORUS1)
    gamma = random_marked(np.random.default_rng(2), TORUS1, 2, 0)
    with pytest.raises(ModelError):
        birth_proposal("environment", gamma, am, TORUS1)


def test_averaged_proposal_identity_holds_per_variant():
    table = _poisson_table(0.5)
    rng = np.random.default_rng(44)
    gp = FiniteConfiguration(TORUS1.uniform(rng, 3))
    gamma = MarkedConfiguration(plus=gp, minus=FiniteConfiguration.empty(1))
    for build in ALL_MODELS:
        am = build_averaged_model(build(), table, TORUS1)
        prop = birth_proposal("system", gamma, am, TORUS1)
        for x in TORUS1.uniform(rng, 25):
            _, b = averaged_rates(x, gp, am, TORUS1)
            got = prop.acceptance(x) * prop.dominating_intensity(x)
            assert got == pytest.approx(b, rel=1e-10, abs=1e-10)


def test_averaged_model_requires_normalized_table():
    grid = GridSpec(torus=TORUS1, points_per_axis=32)
    bad = CorrelationTable(grid, 1, 0.5, 1.0, None, None)
    with pytest.raises(ModelError):
        build_averaged_model(gg_model(), bad, TORUS1)
