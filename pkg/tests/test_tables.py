"""Lattice-reduced correlation tables and their integral functionals."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coupledbd.errors import ConfigError
from coupledbd.geometry import Torus, min_image_diff
from coupledbd.potentials import Potential, potential_functionals
from coupledbd.tables import (
    CorrelationTable,
    GridSpec,
    exp_mayer_functional,
    kernel_stencil,
    mayer_stencil,
    pointwise_stencil,
    radial_profile,
    validate_grid_for_model,
)

from conftest import TORUS1

GRID = GridSpec(torus=TORUS1, points_per_axis=50)


def test_diff_index_encodes_lattice_subtraction():
    g = GridSpec(torus=Torus(dim=2, side=4.0), points_per_axis=5)
    off = g.offsets
    di = g.diff_index
    rng = np.random.default_rng(0)
    for j, l in rng.integers(0, g.num_cells, size=(20, 2)):
        want = np.mod(off[j] - off[l], g.torus.side)
        got = off[di[j, l]]
        assert np.allclose(min_image_diff(got - want, g.torus.side), 0.0, atol=1e-9)


def test_poisson_factory_fills_constant_powers():
    t = CorrelationTable.poisson(GRID, 3, 0.8)
    assert t.k0 == 1.0 and t.k1 == 0.8
    assert np.all(t.k2 == 0.8 ** 2)
    assert np.all(t.k3 == 0.8 ** 3)
    d = CorrelationTable.delta_empty(GRID, 2)
    assert d.k0 == 1.0 and d.k1 == 0.0 and np.all(d.k2 == 0.0)


def test_table_rejects_wrong_shapes_and_orders():
    with pytest.raises(ConfigError):
        CorrelationTable(GRID, 4, 1.0, 0.0)
    with pytest.raises(ConfigError):
        CorrelationTable(GRID, 2, 1.0, 0.0, np.zeros(3))
    with pytest.raises(ConfigError):
        CorrelationTable(GRID, 3, 1.0, 0.0, None, np.zeros((2, 2)))


@given(st.integers(1, 3), st.integers(0, 10**6))
def test_vector_roundtrip_is_identity(order, seed):
    rng = np.random.default_rng(seed)
    g = GridSpec(torus=TORUS1, points_per_axis=8)
    p = g.num_cells
    t = CorrelationTable(
        g, order, rng.normal(), rng.normal(),
        rng.normal(size=p) if order >= 2 else None,
        rng.normal(size=(p, p)) if order >= 3 else None)
    back = CorrelationTable.from_vector(t, t.as_vector())
    assert back.k0 == t.k0 and back.k1 == t.k1
    if order >= 2:
        assert np.array_equal(back.k2, t.k2)
    if order >= 3:
        assert np.array_equal(back.k3, t.k3)


def test_kc_norm_weights_orders_geometrically():
    t = CorrelationTable.poisson(GRID, 3, 2.0)
    for c in (0.5, 1.0, 4.0):
        want = max(1.0, 2.0 / c, 4.0 / c ** 2, 8.0 / c ** 3)
        assert t.kc_norm(c) == pytest.approx(want, rel=1e-12)
    with pytest.raises(ValueError):
        t.kc_norm(0.0)


def test_mayer_stencil_mass_matches_the_exact_functional():
    pot = Potential.step(0.7, 1.3)
    w = mayer_stencil(GRID, pot)
    beta = potential_functionals(pot, 1).beta
    assert float(np.sum(w)) * GRID.cell_volume == pytest.approx(-beta, rel=1e-12)
    k = kernel_stencil(GRID, pot)
    assert float(np.sum(k)) * GRID.cell_volume == pytest.approx(
        potential_functionals(pot, 1).l1, rel=1e-12)


def test_pointwise_stencil_keeps_raw_values():
    pot = Potential.step(0.7, 1.3)
    w = pointwise_stencil(GRID, pot)
    assert np.allclose(w, pot(GRID.distances))


def test_radial_profile_recovers_distance_functions():
    f = np.cos(GRID.distances)
    r, mean, count = radial_profile(GRID, f)
    assert np.all(np.diff(r) > 0)
    assert int(np.sum(count)) == GRID.num_cells
    assert np.allclose(mean, np.cos(r), atol=1e-9)


def test_grid_resolution_guard_triggers_on_coarse_grids():
    coarse = GridSpec(torus=TORUS1, points_per_axis=4)   # h = 2.5
    pot = Potential.step(1.0, 1.0)
    with pytest.raises(ConfigError):
        validate_grid_for_model(coarse, {"psi": pot})
    validate_grid_for_model(GRID, {"psi": pot})


# ---------------------------------------------------------------------------
# the averaged exponential factor

def test_exp_mayer_on_zero_potential_is_one():
    t = CorrelationTable.poisson(GRID, 3, 1.0)
    assert exp_mayer_functional(t, Potential.zero()) == (1.0, 0.0)


def test_exp_mayer_matches_the_truncated_poisson_series_exactly():
    # for a Poisson table the expansion collapses to the partial exponential
    # series in -rho * beta, order by order
    pot = Potential.step(0.5, 1.0)
    beta = potential_functionals(pot, 1).beta
    for rho, order in [(0.3, 1), (0.3, 2), (0.3, 3), (0.8, 3)]:
        t = CorrelationTable.poisson(GRID, order, rho)
        val, tail = exp_mayer_functional(t, pot)
        x = -rho * beta
        partial = sum(x ** n / math.factorial(n) for n in range(order + 1))
        assert val == pytest.approx(partial, rel=1e-10)
        assert abs(val - math.exp(x)) <= tail + 1e-12


def test_exp_mayer_tail_shrinks_with_order():
    pot = Potential.step(0.5, 1.0)
    tails = [exp_mayer_functional(CorrelationTable.poisson(GRID, n, 0.5), pot)[1]
             for n in (1, 2, 3)]
    assert tails[0] > tails[1] > tails[2] > 0.0


def test_exp_mayer_on_empty_state_is_exact():
    t = CorrelationTable.delta_empty(GRID, 3)
    val, tail = exp_mayer_functional(t, Potential.step(2.0, 1.0))
    assert val == 1.0
    assert tail == 0.0
