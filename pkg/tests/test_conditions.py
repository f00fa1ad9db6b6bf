"""Contraction constants, regime feasibility, and the numeric cross-checks
of the weighted expansion masses."""

import math

import numpy as np
import pytest

from coupledbd.conditions import (
    SpotCheckSettings,
    averaged_constants,
    c_minus_closed,
    c_plus_closed,
    check_regime,
    domination_ratio,
    env_constants,
    growth_bounds,
    m_minus_value,
    m_plus_value,
    scan_feasible,
    sector_angle,
    spectral_gap,
    spot_check_regime,
    sys_constants,
)
from coupledbd.errors import ConfigError
from coupledbd.geometry import FiniteConfiguration, MarkedConfiguration
from coupledbd.models import GlauberGlauber
from coupledbd.potentials import Potential

from conftest import (
    ALL_MODELS,
    TORUS1,
    bdlp_model,
    branching_model,
    gg_model,
    marked,
    two_bdlp_model,
)


def _free_gg(z_minus, z_plus=0.1):
    zero = Potential.zero()
    return GlauberGlauber(z_minus=z_minus, psi=zero, z_plus=z_plus,
                          phi_minus=zero, phi_plus=zero)


def test_env_constant_matches_the_closed_formula():
    m = gg_model()                    # z = 0.3, psi = step 0.5 on [0, 1]
    beta = 2.0 * (1.0 - math.exp(-0.5))
    a = env_constants(m, 3.0, 1).a
    assert a == pytest.approx(1.0 + 0.1 * math.exp(3.0 * beta), rel=1e-12)
    assert a == pytest.approx(2.0599598, abs=1e-6)


def test_sys_constant_for_the_additive_variant():
    m = bdlp_model()                  # kernel masses 0.4, 0.6, 0.5, 0.3
    c = sys_constants(m, 2.0, 2.0, 1)
    bulk = (2.0 * 0.4 + 2.0 * 0.6 + 0.5 + 1.0 * 0.3) / m.m_plus
    assert bulk == pytest.approx(2.8, rel=1e-9)
    assert c.a == pytest.approx(1.0 + bulk, rel=1e-9)
    assert not c.feasible             # a >= 2
    assert c.details["theta"] == pytest.approx(0.5 / 0.6, rel=1e-9)
    assert c.details["vartheta"] == pytest.approx(0.75, rel=1e-9)


def test_two_bdlp_env_feasibility_window():
    m = two_bdlp_model()
    tight = env_constants(m, 2.0, 1)
    assert tight.a == pytest.approx(2.05, rel=1e-9)
    assert not tight.feasible
    ok = env_constants(m, 1.5, 1)
    assert ok.a == pytest.approx(1.0 + (1.5 * 0.3 + 0.5 / 1.5 + 0.2), rel=1e-9)
    assert ok.feasible


def test_pure_death_environment_relaxes_at_unit_rate():
    c = env_constants(_free_gg(0.0), 1.0, 1)
    assert c.a == 1.0
    assert spectral_gap(c.a, c.m_star) == 1.0


def test_glauber_feasibility_boundary_is_sharp():
    m_lo = gg_model(z_minus=0.45)
    m_hi = gg_model(z_minus=0.47)
    assert env_constants(m_lo, 1.0, 1).feasible
    assert not env_constants(m_hi, 1.0, 1).feasible


def test_free_environment_constant_decreases_in_the_weight():
    m = _free_gg(0.5)
    weights = [0.5, 1.0, 2.0, 5.0, 10.0]
    a_vals = [env_constants(m, c, 1).a for c in weights]
    assert all(a1 > a2 for a1, a2 in zip(a_vals, a_vals[1:]))
    gaps = [spectral_gap(a, 1.0) for a in a_vals]
    assert all(g1 < g2 for g1, g2 in zip(gaps, gaps[1:]))
    assert gaps[-1] == pytest.approx(1.0 - 0.5 / 10.0, rel=1e-12)


def test_spectral_gap_and_sector_angle_closed_forms():
    assert spectral_gap(1.5, 2.0) == pytest.approx(1.0)
    assert spectral_gap(2.0, 1.0) == 0.0
    assert spectral_gap(math.inf, 1.0) == 0.0
    assert sector_angle(0.9) == pytest.approx(math.pi / 4.0)
    assert sector_angle(1.9) == pytest.approx(math.acos(0.9), rel=1e-12)
    assert sector_angle(2.5) == 0.0


def test_domination_ratio_cases():
    s = Potential.step
    assert domination_ratio(s(2.0, 1.0), s(1.0, 1.0)) == pytest.approx(2.0)
    assert domination_ratio(s(1.0, 2.0), s(1.0, 1.0)) == math.inf
    assert domination_ratio(Potential.zero(), s(1.0, 1.0)) == 0.0
    assert domination_ratio(s(1.0, 1.0), Potential.zero()) == math.inf
    e = Potential.exponential(amplitude=1.0, decay=1.0, cutoff=1.0)
    assert domination_ratio(e, s(1.0, 1.0)) == pytest.approx(1.0, rel=1e-6)


def test_domination_violation_blocks_feasibility():
    m = bdlp_model()                  # theta = 0.833
    c = sys_constants(m, 0.5, 0.5, 1)
    assert not c.feasible


def test_growth_bounds_shapes():
    g = growth_bounds(gg_model(), 1)
    assert g["environment"].degree == 0 and g["environment"].exponent == 0.0
    b = growth_bounds(branching_model(), 1)
    assert b["system"].degree == 1
    assert b["system"].exponent == pytest.approx(0.2)


def test_death_masses_count_weighted_particles():
    eta = marked([1.0, 2.0], [4.0, 6.0, 8.0])
    assert m_minus_value(gg_model(), eta.minus, TORUS1) == 3.0
    assert m_plus_value(gg_model(), eta, TORUS1) == 2.0
    t = two_bdlp_model()
    # additive death: m + pair interactions, summed over the particles
    val = m_minus_value(t, marked([], [0.0, 0.2]).minus, TORUS1)
    assert val == pytest.approx(2.0 * t.m_minus + 2.0 * 0.3, rel=1e-9)


def test_closed_masses_match_manual_formulas_on_singletons():
    x = FiniteConfiguration([[5.0]])
    m = gg_model()
    beta = 2.0 * (1.0 - math.exp(-0.5))
    got, exact = c_minus_closed(m, x, 3.0, TORUS1)
    assert exact
    assert got == pytest.approx(1.0 + 0.1 * math.exp(3.0 * beta), rel=1e-9)
    t = two_bdlp_model()
    got, exact = c_minus_closed(t, x, 2.0, TORUS1)
    assert exact
    assert got == pytest.approx((1.0 + 2.0 * 0.3) + (0.5 + 2.0 * 0.2) / 2.0,
                                rel=1e-9)
    eta = MarkedConfiguration(plus=x, minus=FiniteConfiguration.empty(1))
    got, exact = c_plus_closed(bdlp_model(), eta, 2.0, 2.0, TORUS1)
    assert exact
    assert got == pytest.approx((1.0 + 2.0 * 0.6 + 2.0 * 0.4)
                                + (2.0 * 0.5 + 2.0 * 0.3) / 2.0, rel=1e-9)


def test_branching_closed_mass_is_flagged_inexact_with_environment():
    m = branching_model()
    eta = marked([1.0], [1.3])
    _, exact = c_plus_closed(m, eta, 1.0, 1.0, TORUS1)
    assert not exact
    bare = marked([1.0, 1.4], [])
    _, exact = c_plus_closed(m, bare, 1.0, 1.0, TORUS1)
    assert exact


@pytest.mark.parametrize("build", ALL_MODELS, ids=lambda b: b.__name__)
def test_numeric_masses_confirm_the_closed_forms(build):
    settings = SpotCheckSettings(samples=600, order_cap=3,
                                 configs_per_size=1, max_points=2, seed=3)
    report = spot_check_regime(build(), 2.0, 2.0, TORUS1, settings)
    assert report.ok
    assert all(r.ok_inequality for r in report.rows)
    for r in report.rows:
        if r.closed_exact:
            assert abs(r.numeric - r.closed) <= (
                settings.sigma * r.stderr + r.tail + 1e-9 * (1 + abs(r.closed)))


def test_regime_report_aggregates_feasibility():
    rep = check_regime(gg_model(), 0.5, 1.0, dim=1)
    assert rep.variant == "glauber_glauber"
    assert rep.environment.feasible and rep.system.feasible
    assert rep.feasible
    assert rep.gap_env == pytest.approx(
        spectral_gap(rep.environment.a, 1.0), rel=1e-12)
    # integrating out a Glauber environment leaves the system constant alone
    avg = averaged_constants(gg_model(), 0.5, 1.0, 1)
    assert rep.averaged.a == pytest.approx(rep.system.a, rel=1e-12)
    assert avg.m_star == 1.0
    bad = check_regime(gg_model(z_minus=3.0), 1.0, 1.0, dim=1)
    assert not bad.feasible
    assert bad.gap_env == 0.0
    with pytest.raises(ConfigError):
        check_regime(gg_model(), 1.0, 1.0)


def test_regime_report_serializes_and_summarizes():
    rep = check_regime(gg_model(), 0.5, 1.0, dim=1)
    d = rep.as_dict()
    assert d["feasible"] is True
    assert d["variant"] == "glauber_glauber"
    lines = rep.summary_lines()
    assert any("environment" in ln for ln in lines)


# ---------------------------------------------------------------------------
# weight scanning

def test_scan_picks_the_largest_relaxation_rate():
    m = _free_gg(0.5)
    grid = list(range(1, 11))
    res = scan_feasible(m, 1, c_minus_grid=grid, c_plus_grid=grid)
    assert res.evaluated == 100
    assert res.best is not None
    assert res.best["c_minus"] == 10.0
    assert res.best["lambda0"] == pytest.approx(0.95, rel=1e-12)
    # lambda0 does not depend on c_plus, so the tie resolves downward
    assert res.best["c_plus"] == 1.0


def test_scan_breaks_full_ties_toward_small_weights():
    m = _free_gg(0.0)                 # a_env = 1 for every weight
    res = scan_feasible(m, 1, c_minus_grid=[4.0, 2.0, 8.0],
                        c_plus_grid=[3.0, 1.0])
    assert res.best["c_minus"] == 2.0
    assert res.best["c_plus"] == 1.0
    assert res.best["lambda0"] == pytest.approx(1.0)


def test_scan_result_is_grid_order_independent():
    m = gg_model()
    grid = [0.5, 1.0, 2.0, 4.0, 8.0]
    a = scan_feasible(m, 1, c_minus_grid=grid, c_plus_grid=grid)
    b = scan_feasible(m, 1, c_minus_grid=grid[::-1], c_plus_grid=grid[::-1])
    assert a.best == b.best
    assert a.feasible_count == b.feasible_count


def test_scan_reports_infeasible_models_without_a_best_row():
    res = scan_feasible(gg_model(z_minus=50.0), 1,
                        c_minus_grid=[1.0, 2.0], c_plus_grid=[1.0])
    assert res.best is None
    assert res.feasible_count == 0
    assert all(not r["feasible"] for r in res.rows)
