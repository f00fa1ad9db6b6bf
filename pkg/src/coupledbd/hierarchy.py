"""Truncated correlation hierarchies for autonomous birth-death components.

Both the environment of every model variant and the averaged system are
one-component birth-death dynamics, so a single reduced description covers
them: a ComponentForm holds the death and birth structure (constant,
additive kernel, or exponential pair interaction).

The generator dual acting on correlation functions is discretized on
translation-reduced tables (orders up to 3).  Expansion terms with at most
one integrated variable are kept exactly; terms with two or more integrated
variables are dropped, and references to the order above the table top are
closed by the mean-field substitution

    k_{n+1}(eta cup y) ~= k1 * k_n(eta)        ("poisson" closure)

or by zero.  The dropped terms carry products of two or more Mayer masses,
below the closure error for the activity ranges of interest.

The invariant state is computed as the fixed point of the rearranged
balance equation: with M(eta) = |eta| * death_const,

    k = k + (L k) / M  + forcing,     forcing = birth_const/death_const on
                                      singletons, from the order-0 pin k0=1.

Picard iteration starts at the forcing; for the free (non-interacting) case
the iteration terminates exactly within `order` steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from .errors import ConfigError, ConvergenceError, ModelError, StabilityError
from .models import (
    AveragedModel,
    BdlpInGlauber,
    BranchingInGlauber,
    GlauberGlauber,
    RateModel,
    TwoBdlp,
)
from .potentials import Potential
from .tables import (
    CorrelationTable,
    GridSpec,
    kernel_stencil,
    mayer_stencil,
    pointwise_stencil,
    positive_mayer_stencil,
    radial_profile,
    validate_grid_for_model,
)

_CLOSURES = ("poisson", "zero")


@dataclass(frozen=True)
class ComponentForm:
    """One-component birth-death structure.

    death rate:  death_const * exp(sum of death_pot over neighbours)
                 or death_const + sum of death_kernel over neighbours
    birth rate:  birth_const * exp(-sum of birth_pot over neighbours)
                 or birth_const + birth_kernel_scale * sum of birth_kernel
    """

    death_const: float
    birth_const: float
    death_kernel: Optional[Potential] = None
    death_pot: Optional[Potential] = None
    birth_kernel: Optional[Potential] = None
    birth_pot: Optional[Potential] = None
    birth_kernel_scale: float = 1.0

    def __post_init__(self):
        if self.death_const <= 0:
            raise ModelError("death_const must be positive")
        if self.birth_const < 0:
            raise ModelError("birth_const must be nonnegative")
        if self.death_kernel is not None and self.death_pot is not None:
            raise ModelError("death part cannot be both additive and exponential")
        if self.birth_kernel is not None and self.birth_pot is not None:
            raise ModelError("birth part cannot be both additive and exponential")

    def potentials(self) -> dict:
        out = {}
        for name in ("death_kernel", "death_pot", "birth_kernel", "birth_pot"):
            p = getattr(self, name)
            if p is not None:
                out[name] = p
        return out


def component_form(m: Union[RateModel, AveragedModel], component: str = "environment") -> ComponentForm:
    """Extract the autonomous one-component structure.

    component="environment" works for every full model; the system of a full
    model is not autonomous, so component="system" requires an AveragedModel.
    """
    if isinstance(m, AveragedModel):
        if component != "system":
            raise ModelError("an averaged model only has a system component")
        base = m.base
        if isinstance(base, GlauberGlauber):
            return ComponentForm(death_const=1.0,
                                 birth_const=base.z_plus * m.lambda_bar,
                                 birth_pot=base.phi_plus)
        if isinstance(base, BdlpInGlauber):
            return ComponentForm(death_const=base.m_plus + m.m_bar,
                                 birth_const=m.lambda_bar,
                                 death_kernel=base.a_minus,
                                 birth_kernel=base.a_plus)
        if isinstance(base, BranchingInGlauber):
            return ComponentForm(death_const=base.m_plus,
                                 birth_const=0.0,
                                 death_pot=base.kappa,
                                 birth_kernel=base.a_plus,
                                 birth_kernel_scale=m.lambda_bar)
        if isinstance(base, TwoBdlp):
            return ComponentForm(death_const=base.m_plus + m.phi_bar_minus,
                                 birth_const=m.phi_bar_plus,
                                 death_kernel=base.b_minus,
                                 birth_kernel=base.b_plus)
        raise ModelError(f"unknown model type {type(base).__name__}")
    if component == "system":
        raise ModelError("the system component is not autonomous; build an averaged model first")
    if component != "environment":
        raise ValueError(f"component must be 'system' or 'environment', got {component!r}")
    if isinstance(m, (GlauberGlauber, BdlpInGlauber, BranchingInGlauber)):
        return ComponentForm(death_const=1.0, birth_const=m.z_minus, birth_pot=m.psi)
    if isinstance(m, TwoBdlp):
        return ComponentForm(death_const=m.m_minus, birth_const=m.z,
                             death_kernel=m.a_minus, birth_kernel=m.a_plus)
    raise ModelError(f"unknown model type {type(m).__name__}")


# ---------------------------------------------------------------------------
# stencil bundle

@dataclass(eq=False)
class StencilBundle:
    grid: GridSpec
    form: ComponentForm
    order: int
    # additive death
    am_p: Optional[np.ndarray] = None      # pointwise kernel values
    am_cw: Optional[np.ndarray] = None     # mass-corrected values * cell volume
    am_mass: float = 0.0
    # exponential death
    u_p: Optional[np.ndarray] = None       # pointwise exp(pot)-1
    u_cw: Optional[np.ndarray] = None
    u_mass: float = 0.0
    # exponential birth
    t_p: Optional[np.ndarray] = None       # pointwise exp(-pot)-1
    t_cw: Optional[np.ndarray] = None
    t_mass: float = 0.0
    # additive birth (scale folded in)
    ab_p: Optional[np.ndarray] = None
    ab_cw: Optional[np.ndarray] = None
    ab_mass: float = 0.0
    # pair matrices at difference offsets (built for order >= 2)
    am_p2: Optional[np.ndarray] = None
    u_p2: Optional[np.ndarray] = None
    t_p2: Optional[np.ndarray] = None
    ab_p2: Optional[np.ndarray] = None
    am_cw2: Optional[np.ndarray] = None
    u_cw2: Optional[np.ndarray] = None
    t_cw2: Optional[np.ndarray] = None
    ab_cw2: Optional[np.ndarray] = None


def build_stencils(grid: GridSpec, form: ComponentForm, order: int) -> StencilBundle:
    validate_grid_for_model(grid, form.potentials())
    cw = grid.cell_volume
    b = StencilBundle(grid=grid, form=form, order=order)

    if form.death_kernel is not None and not form.death_kernel.is_zero:
        b.am_p = pointwise_stencil(grid, form.death_kernel)
        b.am_cw = kernel_stencil(grid, form.death_kernel) * cw
        b.am_mass = float(np.sum(b.am_cw))
    if form.death_pot is not None and not form.death_pot.is_zero:
        b.u_p = np.expm1(form.death_pot(grid.distances))
        b.u_cw = positive_mayer_stencil(grid, form.death_pot) * cw
        b.u_mass = float(np.sum(b.u_cw))
    if form.birth_pot is not None and not form.birth_pot.is_zero:
        b.t_p = np.expm1(-form.birth_pot(grid.distances))
        b.t_cw = mayer_stencil(grid, form.birth_pot) * cw
        b.t_mass = float(np.sum(b.t_cw))
    if form.birth_kernel is not None and not form.birth_kernel.is_zero and form.birth_kernel_scale != 0.0:
        s = form.birth_kernel_scale
        b.ab_p = pointwise_stencil(grid, form.birth_kernel) * s
        b.ab_cw = kernel_stencil(grid, form.birth_kernel) * cw * s
        b.ab_mass = float(np.sum(b.ab_cw))

    if order >= 2:
        di = grid.diff_index
        for src, dst in (("am_p", "am_p2"), ("u_p", "u_p2"), ("t_p", "t_p2"), ("ab_p", "ab_p2"),
                         ("am_cw", "am_cw2"), ("u_cw", "u_cw2"), ("t_cw", "t_cw2"), ("ab_cw", "ab_cw2")):
            v = getattr(b, src)
            if v is not None:
                setattr(b, dst, v[di])
    return b


def _closure_rho(table: CorrelationTable, closure: str) -> float:
    if closure == "poisson":
        return table.k1
    return 0.0


def _rebased_triple_integral(k3: np.ndarray, weights: np.ndarray, di: np.ndarray) -> np.ndarray:
    """out[j, l] = sum_r weights[r] * k3[di[l, j], di[r, j]].

    This is the base-shift of the third-order table needed when the removed
    point is the table's base point.
    """
    p = k3.shape[0]
    out = np.empty((p, p))
    for j in range(p):
        rows = di[:, j]
        block = k3[np.ix_(rows, rows)]
        out[j, :] = block @ weights
    return out


def l_delta_apply(table: CorrelationTable, bundle: StencilBundle,
                  closure: str = "poisson") -> CorrelationTable:
    """Apply the truncated generator dual to a correlation table.

    The output's order-0 slot is zero: the empty-configuration entry is
    conserved by the dynamics.
    """
    if closure not in _CLOSURES:
        raise ConfigError(f"closure must be one of {_CLOSURES}")
    f = bundle.form
    grid = table.grid
    if grid is not bundle.grid and grid != bundle.grid:
        raise ConfigError("table and stencil bundle use different grids")
    n_ord = table.order
    rho_c = _closure_rho(table, closure)
    m = f.death_const
    z = f.birth_const

    k0, k1 = table.k0, table.k1
    k2 = table.k2 if n_ord >= 2 else None
    k3 = table.k3 if n_ord >= 3 else None
    di = grid.diff_index if n_ord >= 2 else None

    # ----- order 1 --------------------------------------------------------
    out1 = 0.0
    # death
    if bundle.u_p is not None:
        if n_ord >= 2:
            out1 -= m * (k1 + float(bundle.u_cw @ k2))
        else:
            out1 -= m * k1 * (1.0 + rho_c * bundle.u_mass)
    else:
        out1 -= m * k1
        if bundle.am_p is not None:
            if n_ord >= 2:
                out1 -= float(bundle.am_cw @ k2)
            else:
                out1 -= rho_c * k1 * bundle.am_mass
    # birth
    if bundle.t_p is not None or (f.birth_pot is not None):
        out1 += z * (k0 + k1 * bundle.t_mass)
    else:
        out1 += z * k0 + k1 * bundle.ab_mass

    out2 = None
    out3 = None

    # ----- order 2 --------------------------------------------------------
    if n_ord >= 2:
        p = grid.num_cells
        out2 = np.zeros(p)
        k2mat = k2[di]            # k2mat[j, l] = k2 at offset[j]-offset[l]
        # death
        if bundle.u_p is not None:
            bracket = 2.0 * k2
            if n_ord >= 3:
                bracket = bracket + k3 @ bundle.u_cw + np.sum(bundle.u_cw2 * k3, axis=1)
            else:
                bracket = bracket + 2.0 * rho_c * bundle.u_mass * k2
            out2 -= m * (1.0 + bundle.u_p) * bracket
        else:
            out2 -= 2.0 * m * k2
            if bundle.am_p is not None:
                out2 -= 2.0 * bundle.am_p * k2
                if n_ord >= 3:
                    out2 -= k3 @ bundle.am_cw + np.sum(bundle.am_cw2 * k3, axis=1)
                else:
                    out2 -= 2.0 * rho_c * bundle.am_mass * k2
        # birth
        if f.birth_pot is not None:
            br1 = np.full(p, k1)
            br2 = np.full(p, k1)
            fac = np.ones(p)
            if bundle.t_p is not None:
                fac = 1.0 + bundle.t_p
                br1 = br1 + bundle.t_cw2 @ k2
                br2 = br2 + k2mat.T @ bundle.t_cw
            out2 += z * fac * (br1 + br2)
        else:
            base = z if bundle.ab_p is None else z + bundle.ab_p
            out2 += 2.0 * base * k1
            if bundle.ab_p is not None:
                out2 += bundle.ab_cw2 @ k2 + k2mat.T @ bundle.ab_cw

    # ----- order 3 --------------------------------------------------------
    if n_ord >= 3:
        out3 = np.zeros((p, p))
        k2j = k2[:, None] * np.ones((1, p))       # k2[j] broadcast over l
        k2l = k2[None, :] * np.ones((p, 1))
        k2base = k2mat.T                          # k2 at offset[l]-offset[j]
        # death
        if bundle.u_p is not None:
            up = bundle.u_p
            e0 = (1.0 + up)[:, None] * (1.0 + up)[None, :]
            ej = (1.0 + up)[:, None] * (1.0 + bundle.u_p2)
            el = (1.0 + up)[None, :] * (1.0 + bundle.u_p2)
            out3 -= m * (1.0 + rho_c * bundle.u_mass) * (e0 + ej + el) * k3
        else:
            pair = np.zeros((p, p))
            if bundle.am_p is not None:
                pair = 2.0 * (bundle.am_p[:, None] + bundle.am_p[None, :] + bundle.am_p2)
            out3 -= (3.0 * m + pair) * k3
            if bundle.am_p is not None:
                out3 -= 3.0 * rho_c * bundle.am_mass * k3
        # birth
        if f.birth_pot is not None:
            if bundle.t_p is not None:
                tp = bundle.t_p
                r1 = k3 @ bundle.t_cw2.T          # r1[j, l] = sum_r k3[j, r] t_cw at offset[l]-offset[r]
                x0 = _rebased_triple_integral(k3, bundle.t_cw, di)
                f_l = (1.0 + tp)[None, :] * (1.0 + bundle.t_p2)
                f_j = (1.0 + tp)[:, None] * (1.0 + bundle.t_p2)
                f_0 = (1.0 + tp)[:, None] * (1.0 + tp)[None, :]
                out3 += z * (f_l * (k2j + r1) + f_j * (k2l + r1.T) + f_0 * (k2base + x0))
            else:
                out3 += z * (k2j + k2l + k2base)
        else:
            abp = bundle.ab_p
            if abp is not None:
                s_l = z + abp[None, :] * np.ones((p, 1)) + bundle.ab_p2
                s_j = z + abp[:, None] * np.ones((1, p)) + bundle.ab_p2
                s_0 = z + abp[:, None] + abp[None, :]
                r1 = k3 @ bundle.ab_cw2.T
                x0 = _rebased_triple_integral(k3, bundle.ab_cw, di)
                out3 += s_l * k2j + s_j * k2l + s_0 * k2base + r1 + r1.T + x0
            else:
                out3 += z * (k2j + k2l + k2base)

    return CorrelationTable(grid, n_ord, 0.0, out1, out2, out3)


# ---------------------------------------------------------------------------
# invariant state

def ks_apply(table: CorrelationTable, bundle: StencilBundle,
             closure: str = "poisson") -> CorrelationTable:
    """One application of the rearranged balance operator (without forcing).

    Input and output have k0 = 0; the order-0 pin enters through the forcing
    added by the solver.
    """
    work = table if table.k0 == 0.0 else CorrelationTable(
        table.grid, table.order, 0.0, table.k1, table.k2, table.k3)
    lk = l_delta_apply(work, bundle, closure=closure)
    m = bundle.form.death_const
    k1 = work.k1 + lk.k1 / m
    k2 = None if work.order < 2 else work.k2 + lk.k2 / (2.0 * m)
    k3 = None if work.order < 3 else work.k3 + lk.k3 / (3.0 * m)
    return CorrelationTable(table.grid, table.order, 0.0, k1, k2, k3)


@dataclass
class KsSolution:
    table: CorrelationTable
    iterations: int
    residuals: List[float]
    converged: bool


def ks_solve(form: ComponentForm, grid: GridSpec, order: int = 3,
             tol: float = 1e-12, max_iter: int = 500,
             closure: str = "poisson", guard: float = 1e8) -> KsSolution:
    """Invariant correlation table by Picard iteration from the forcing."""
    bundle = build_stencils(grid, form, order)
    forcing = form.birth_const / form.death_const
    cur = CorrelationTable(grid, order, 0.0, forcing)
    residuals: List[float] = []
    for it in range(1, max_iter + 1):
        nxt = ks_apply(cur, bundle, closure=closure)
        nxt = CorrelationTable(grid, order, 0.0, nxt.k1 + forcing, nxt.k2, nxt.k3)
        res = _table_gap(cur, nxt)
        residuals.append(res)
        cur = nxt
        if cur.max_abs() > guard:
            raise StabilityError(
                f"balance iteration left the stable range after {it} steps")
        if res <= tol:
            out = CorrelationTable(grid, order, 1.0, cur.k1, cur.k2, cur.k3)
            return KsSolution(table=out, iterations=it, residuals=residuals, converged=True)
    raise ConvergenceError(
        f"balance iteration did not reach tol={tol} in {max_iter} steps "
        f"(last residual {residuals[-1]:.3e})")


def _table_gap(a: CorrelationTable, b: CorrelationTable) -> float:
    gap = max(abs(a.k0 - b.k0), abs(a.k1 - b.k1))
    if a.order >= 2:
        gap = max(gap, float(np.max(np.abs(a.k2 - b.k2))) if a.k2.size else 0.0)
    if a.order >= 3:
        gap = max(gap, float(np.max(np.abs(a.k3 - b.k3))) if a.k3.size else 0.0)
    return gap


# ---------------------------------------------------------------------------
# time evolution

@dataclass
class HierarchyTrajectory:
    times: np.ndarray
    tables: List[CorrelationTable]

    @property
    def density(self) -> np.ndarray:
        return np.array([t.k1 for t in self.tables])

    def final(self) -> CorrelationTable:
        return self.tables[-1]


def evolve_hierarchy(initial: CorrelationTable, form: ComponentForm,
                     t_final: float, dt: float = 0.01,
                     record_every: int = 10, closure: str = "poisson",
                     stability_cap: float = 1e9) -> HierarchyTrajectory:
    """Integrate the truncated hierarchy with classical fourth-order
    Runge-Kutta steps.  The order-0 entry is conserved.

    Records the state every record_every steps (and always the endpoints).
    """
    if dt <= 0 or t_final < 0:
        raise ConfigError("need dt > 0 and t_final >= 0")
    bundle = build_stencils(initial.grid, form, initial.order)
    n_steps = int(round(t_final / dt))
    if abs(n_steps * dt - t_final) > 1e-9 * max(1.0, t_final):
        n_steps = math.ceil(t_final / dt)
    template = initial

    def deriv(vec: np.ndarray) -> np.ndarray:
        t = CorrelationTable.from_vector(template, vec)
        return l_delta_apply(t, bundle, closure=closure).as_vector()

    v = initial.as_vector()
    times = [0.0]
    tables = [initial.copy()]
    t = 0.0
    for step in range(1, n_steps + 1):
        h = dt
        d1 = deriv(v)
        d2 = deriv(v + 0.5 * h * d1)
        d3 = deriv(v + 0.5 * h * d2)
        d4 = deriv(v + h * d3)
        v = v + (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        t = step * dt
        if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > stability_cap:
            raise StabilityError(
                f"hierarchy blew past the stability cap at t={t:.4g}")
        if step % record_every == 0 or step == n_steps:
            times.append(t)
            tables.append(CorrelationTable.from_vector(template, v))
    return HierarchyTrajectory(times=np.array(times), tables=tables)


# ---------------------------------------------------------------------------
# summaries and sanity checks

@dataclass
class InvariantSummary:
    density: float
    pair_r: np.ndarray
    pair_g: np.ndarray
    sup_by_order: Tuple[float, ...]


def invariant_summary(table: CorrelationTable) -> InvariantSummary:
    """Density and radial pair correlation g(r) = k2 / k1^2."""
    rho = table.k1
    if table.order >= 2 and rho > 0:
        r, mean, _ = radial_profile(table.grid, table.k2)
        g = mean / rho ** 2
    else:
        r, g = np.zeros(0), np.zeros(0)
    return InvariantSummary(density=rho, pair_r=r, pair_g=g,
                            sup_by_order=table.sup_by_order())


@dataclass
class LenardCheck:
    ok: bool
    min_entry: float
    symmetry_defect: float
    min_pairing: float


_PAIRING_MASSES = (-1.2, -1.0, -0.75, -0.5, -0.25, 0.25, 0.5, 0.75, 1.0, 1.2)


def _pairing_values(table: CorrelationTable) -> list:
    """Truncated expectations of product observables prod (1 + g(x)) over
    sampled radial profiles g >= -0.9:

        S(g) = k0 + sum g k1 dv + (1/2) sum g(x) g(y) k2(y-x) dv^2 + ...

    Each profile is a Gaussian bump of random width scaled so the first
    order mass sum g k1 dv lands on a fixed ladder of values; amplitudes
    are capped at -0.9 so the observable itself is nonnegative.  The mass
    ladder stays inside [-1.2, 1.2], where the truncation at orders 2 and 3
    keeps S positive for Poisson and weakly correlated data while a
    vanishing pair function paired with a large density drives S below
    zero.  Lattice sums are O(P^2) in the cell count, desk scale only."""
    vals = [float(table.k0)]         # g = 0 observable
    rho = float(table.k1)
    if table.order < 2 or rho <= 0:
        return vals
    grid = table.grid
    dv = grid.cell_volume
    r = grid.distances
    side = grid.torus.side
    di = grid.diff_index
    k2m = table.k2[di]               # k2 at offset_j - offset_l
    neg = di[0]
    rng = np.random.default_rng(20240117)
    for target in _PAIRING_MASSES:
        width = rng.uniform(0.08, 0.45) * side
        raw = np.exp(-((r / width) ** 2))
        u0 = rho * float(np.sum(raw)) * dv
        if u0 <= 0:
            continue
        c = target / u0
        if c < -0.9:                 # keep 1 + g(x) >= 0.1 pointwise
            c = -0.9
        g = c * raw
        s = float(table.k0) + rho * float(np.sum(g)) * dv
        s += 0.5 * float(g @ k2m @ g) * dv ** 2
        if table.order >= 3:
            shifted = g[di[:, neg]]  # shifted[a, j] = g(offset_a + offset_j)
            triple = (shifted * g[:, None]).T @ shifted
            s += float(np.sum(triple * table.k3)) * dv ** 3 / 6.0
        vals.append(s)
    return vals


def lenard_spot_check(table: CorrelationTable, tol: float = 1e-8) -> LenardCheck:
    """Necessary positivity conditions for correlation data of a point
    process: nonnegative entries, the exchange symmetries the reduction
    must respect, and sampled product observables whose truncated
    expectations must stay nonnegative.  The pairing check catches
    internally inconsistent data, such as a large density with a vanishing
    pair function, that entrywise checks cannot see."""
    entries = [table.k0, table.k1]
    sym = 0.0
    if table.order >= 2:
        entries.append(float(np.min(table.k2)) if table.k2.size else 0.0)
        neg = table.grid.diff_index[0]       # index of -offset[j]
        sym = float(np.max(np.abs(table.k2 - table.k2[neg])))
    if table.order >= 3:
        entries.append(float(np.min(table.k3)) if table.k3.size else 0.0)
        sym = max(sym, float(np.max(np.abs(table.k3 - table.k3.T))))
    scale = max(1.0, table.max_abs())
    min_entry = min(entries)
    min_pairing = min(_pairing_values(table))
    ok = (min_entry >= -tol * scale
          and sym <= math.sqrt(tol) * scale
          and min_pairing >= -tol * scale)
    return LenardCheck(ok=ok, min_entry=min_entry,
                       symmetry_defect=sym, min_pairing=min_pairing)
