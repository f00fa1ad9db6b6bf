"""Regime checks: contraction constants, spectral gaps and numeric
verification of the defining inequalities.

For each model variant the decomposition kernels admit closed-form weighted
expansions

    c(eta) = sum over x in eta of the weighted total-variation mass of the
             kernel expansion around eta minus x,

and the dynamics is well behaved when c(eta) <= a * M(eta) for a < 2, where
M(eta) sums the death rates inside eta.  This module computes the sharp
closed-form constants a for every variant (environment, coupled system and
averaged system), the resulting spectral gap and sector angle, and can
verify the inequality numerically on sampled configurations: the expansion
integrals are then evaluated by truncated Monte Carlo sums over the
candidate configuration space with subset enumeration of the kernels,
sharing nothing with the closed forms except the kernel definitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ModelError
from .geometry import (
    FiniteConfiguration,
    MarkedConfiguration,
    QuadratureSpec,
    Torus,
    _sample_ball,
    ball_volume,
    lp_integral,
    min_image_diff,
    pairwise_distances,
)
from .models import (
    BdlpInGlauber,
    BranchingInGlauber,
    GlauberGlauber,
    RateModel,
    TwoBdlp,
    env_death_vector,
    model_potentials,
    sys_death_vector,
    validate_model_on_torus,
    variant_name,
)
from .potentials import _EXP_CLIP, Potential, mayer, potential_functionals, relative_energy

_RATIO_SAMPLES = 4096


def _safe_exp(x: float) -> float:
    # math.exp raises OverflowError past ~709; a huge exponent just means an
    # infinite constant here
    return math.inf if x > _EXP_CLIP else math.exp(x)


def _mass_term(pref: float, exponent: float) -> float:
    """pref * exp(exponent) with a zero prefactor killing any overflow."""
    if pref == 0.0:
        return 0.0
    return pref * _safe_exp(exponent)


# ---------------------------------------------------------------------------
# domination constants

def domination_ratio(num: Potential, den: Potential) -> float:
    """Smallest constant c with num <= c * den pointwise; inf if none.

    Evaluated on a dense radial grid including both profiles' knots.  A zero
    numerator gives 0.
    """
    if num.is_zero:
        return 0.0
    if den.is_zero:
        return math.inf
    r_max = max(num.cutoff, den.cutoff)
    if num.cutoff > den.cutoff + 1e-12:
        return math.inf
    rs = [np.linspace(0.0, r_max, _RATIO_SAMPLES)]
    for p in (num, den):
        if p.kind == "table":
            rs.append(np.asarray(p.radii))
        if p.cutoff > 0:
            rs.append(np.array([p.cutoff * (1 - 1e-9)]))
    r = np.unique(np.concatenate(rs))
    nv = num(r)
    dv = den(r)
    active = nv > 0
    if not np.any(active):
        return 0.0
    if np.any(dv[active] <= 0):
        return math.inf
    return float(np.max(nv[active] / dv[active]))


# ---------------------------------------------------------------------------
# closed-form contraction constants

@dataclass
class ComponentConstants:
    a: float
    m_star: float
    feasible: bool
    details: Dict[str, float] = field(default_factory=dict)


def env_constants(m: RateModel, c_minus: float, dim: int) -> ComponentConstants:
    if c_minus <= 0:
        raise ConfigError("weight c_minus must be positive")
    if isinstance(m, (GlauberGlauber, BdlpInGlauber, BranchingInGlauber)):
        beta_psi = potential_functionals(m.psi, dim).beta
        a = 1.0 + _mass_term(m.z_minus / c_minus, c_minus * beta_psi)
        return ComponentConstants(a=a, m_star=1.0, feasible=a < 2.0,
                                  details={"beta_psi": beta_psi})
    if isinstance(m, TwoBdlp):
        l1_am = potential_functionals(m.a_minus, dim).l1
        l1_ap = potential_functionals(m.a_plus, dim).l1
        vt2 = domination_ratio(m.a_plus, m.a_minus)
        bulk = (c_minus * l1_am + m.z / c_minus + l1_ap) / m.m_minus
        a = 1.0 + max(bulk, vt2 / c_minus) if math.isfinite(vt2) else math.inf
        feasible = math.isfinite(a) and a < 2.0 and vt2 < c_minus
        return ComponentConstants(a=a, m_star=m.m_minus, feasible=feasible,
                                  details={"l1_a_minus": l1_am, "l1_a_plus": l1_ap,
                                           "vartheta2": vt2})
    raise ModelError(f"unknown model type {type(m).__name__}")


def sys_constants(m: RateModel, c_minus: float, c_plus: float, dim: int) -> ComponentConstants:
    if c_minus <= 0 or c_plus <= 0:
        raise ConfigError("weights must be positive")
    if isinstance(m, GlauberGlauber):
        bp = potential_functionals(m.phi_plus, dim).beta
        bm = potential_functionals(m.phi_minus, dim).beta
        a = 1.0 + _mass_term(m.z_plus / c_plus, c_plus * bp + c_minus * bm)
        return ComponentConstants(a=a, m_star=1.0, feasible=a < 2.0,
                                  details={"beta_phi_plus": bp, "beta_phi_minus": bm})
    if isinstance(m, BdlpInGlauber):
        l1 = {n: potential_functionals(p, dim).l1
              for n, p in (("a_minus", m.a_minus), ("a_plus", m.a_plus),
                           ("b_minus", m.b_minus), ("b_plus", m.b_plus))}
        theta = domination_ratio(m.a_plus, m.a_minus)
        vth = domination_ratio(m.b_plus, m.b_minus)
        bulk = (c_minus * l1["b_minus"] + c_plus * l1["a_minus"] + l1["a_plus"]
                + (c_minus / c_plus) * l1["b_plus"]) / m.m_plus
        terms = [bulk]
        for v in (theta, vth):
            terms.append(v / c_plus if math.isfinite(v) else math.inf)
        a = 1.0 + max(terms)
        feasible = math.isfinite(a) and a < 2.0 and theta < c_plus and vth < c_plus
        det = dict(l1)
        det.update({"theta": theta, "vartheta": vth})
        return ComponentConstants(a=a, m_star=m.m_plus, feasible=feasible, details=det)
    if isinstance(m, BranchingInGlauber):
        fk = potential_functionals(m.kappa, dim)
        if not math.isfinite(fk.beta_neg):
            return ComponentConstants(a=math.inf, m_star=m.m_plus, feasible=False,
                                      details={"beta_neg_kappa": math.inf})
        bphi = potential_functionals(m.phi, dim).beta
        l1a = potential_functionals(m.a_plus, dim).l1
        vth = domination_ratio(m.a_plus, m.kappa)
        if math.isfinite(vth):
            a = _safe_exp(c_plus * fk.beta_neg) + _mass_term(
                max(c_plus * l1a, vth) / (m.m_plus * c_plus), c_minus * bphi)
        else:
            a = math.inf
        return ComponentConstants(a=a, m_star=m.m_plus,
                                  feasible=math.isfinite(a) and a < 2.0,
                                  details={"beta_neg_kappa": fk.beta_neg,
                                           "beta_phi": bphi, "l1_a_plus": l1a,
                                           "vartheta": vth})
    if isinstance(m, TwoBdlp):
        l1 = {n: potential_functionals(p, dim).l1
              for n, p in (("b_minus", m.b_minus), ("b_plus", m.b_plus),
                           ("vphi_minus", m.vphi_minus), ("vphi_plus", m.vphi_plus))}
        vt1 = domination_ratio(m.b_plus, m.b_minus)
        vt3 = domination_ratio(m.vphi_plus, m.vphi_minus)
        bulk = (c_plus * l1["b_minus"] + c_minus * l1["vphi_minus"] + l1["b_plus"]
                + (c_minus / c_plus) * l1["vphi_plus"]) / m.m_plus
        terms = [bulk]
        for v in (vt1, vt3):
            terms.append(v / c_plus if math.isfinite(v) else math.inf)
        a = 1.0 + max(terms)
        feasible = math.isfinite(a) and a < 2.0 and vt1 < c_plus and vt3 < c_plus
        det = dict(l1)
        det.update({"vartheta1": vt1, "vartheta3": vt3})
        return ComponentConstants(a=a, m_star=m.m_plus, feasible=feasible, details=det)
    raise ModelError(f"unknown model type {type(m).__name__}")


def averaged_constants(m: RateModel, c_minus: float, c_plus: float, dim: int,
                       rho_inv: Optional[float] = None) -> ComponentConstants:
    """Contraction constant of the system with the environment integrated
    out.  For the additive-cross variant the exact constant needs the
    invariant density; without it a density-free upper bound is returned."""
    if isinstance(m, GlauberGlauber):
        out = sys_constants(m, c_minus, c_plus, dim)
        out.m_star = 1.0
        return out
    if isinstance(m, BdlpInGlauber):
        l1_am = potential_functionals(m.a_minus, dim).l1
        l1_ap = potential_functionals(m.a_plus, dim).l1
        theta = domination_ratio(m.a_plus, m.a_minus)
        vth = domination_ratio(m.b_plus, m.b_minus)
        terms = [(c_plus * l1_am + l1_ap) / m.m_plus]
        for v in (theta, vth):
            terms.append(v / c_plus if math.isfinite(v) else math.inf)
        a = 1.0 + max(terms)
        m_bar = 0.0
        if rho_inv is not None:
            m_bar = rho_inv * potential_functionals(m.b_minus, dim).l1
        return ComponentConstants(a=a, m_star=m.m_plus + m_bar,
                                  feasible=math.isfinite(a) and a < 2.0,
                                  details={"theta": theta, "vartheta": vth})
    if isinstance(m, BranchingInGlauber):
        fk = potential_functionals(m.kappa, dim)
        l1a = potential_functionals(m.a_plus, dim).l1
        vth = domination_ratio(m.a_plus, m.kappa)
        if math.isfinite(fk.beta_neg) and math.isfinite(vth):
            a = _safe_exp(c_plus * fk.beta_neg) + max(l1a, vth / c_plus) / m.m_plus
        else:
            a = math.inf
        return ComponentConstants(a=a, m_star=m.m_plus,
                                  feasible=math.isfinite(a) and a < 2.0,
                                  details={"vartheta": vth})
    if isinstance(m, TwoBdlp):
        l1_bm = potential_functionals(m.b_minus, dim).l1
        l1_bp = potential_functionals(m.b_plus, dim).l1
        vt1 = domination_ratio(m.b_plus, m.b_minus)
        vt3 = domination_ratio(m.vphi_plus, m.vphi_minus)
        if rho_inv is None:
            terms = [(c_plus * l1_bm + l1_bp) / m.m_plus]
            for v in (vt1, vt3):
                terms.append(v / c_plus if math.isfinite(v) else math.inf)
            a = 1.0 + max(terms)
            m_star = m.m_plus
        else:
            pbm = rho_inv * potential_functionals(m.vphi_minus, dim).l1
            pbp = rho_inv * potential_functionals(m.vphi_plus, dim).l1
            terms = [(c_plus * l1_bm + pbp / c_plus + l1_bp) / (m.m_plus + pbm)]
            terms.append(vt1 / c_plus if math.isfinite(vt1) else math.inf)
            a = 1.0 + max(terms)
            m_star = m.m_plus + pbm
        return ComponentConstants(a=a, m_star=m_star,
                                  feasible=math.isfinite(a) and a < 2.0,
                                  details={"vartheta1": vt1, "vartheta3": vt3})
    raise ModelError(f"unknown model type {type(m).__name__}")


def spectral_gap(a: float, m_star: float) -> float:
    """Lower bound on the relaxation rate of the component: (2 - a) times
    the minimal death mass of a single particle."""
    if not math.isfinite(a) or a >= 2.0:
        return 0.0
    return (2.0 - a) * m_star


def sector_angle(a: float) -> float:
    """Largest angle w in [0, pi/4] with a < 1 + cos(w)."""
    if not math.isfinite(a) or a >= 2.0:
        return 0.0
    if a <= 1.0:
        return math.pi / 4.0
    return min(math.pi / 4.0, math.acos(a - 1.0))


# ---------------------------------------------------------------------------
# growth bounds (polynomial-exponential envelopes of the rates)

@dataclass(frozen=True)
class GrowthBound:
    amplitude: float
    degree: int
    exponent: float


def growth_bounds(m: RateModel, dim: int) -> Dict[str, GrowthBound]:
    """Envelope constants with
    death + birth <= amplitude * (1 + n)^degree * exp(exponent * n)."""
    def sup(p: Potential) -> float:
        v = p.max_value
        if not math.isfinite(v):
            raise ModelError("unbounded kernel has no growth envelope")
        return v

    if isinstance(m, GlauberGlauber):
        return {"environment": GrowthBound(max(1.0, m.z_minus) + 1.0, 0, 0.0),
                "system": GrowthBound(max(1.0, m.z_plus) + 1.0, 0, 0.0)}
    if isinstance(m, BdlpInGlauber):
        amp = m.m_plus + sup(m.a_minus) + sup(m.a_plus) + sup(m.b_minus) + sup(m.b_plus)
        return {"environment": GrowthBound(max(1.0, m.z_minus) + 1.0, 0, 0.0),
                "system": GrowthBound(amp, 1, 0.0)}
    if isinstance(m, BranchingInGlauber):
        amp = m.m_plus + sup(m.a_plus)
        return {"environment": GrowthBound(max(1.0, m.z_minus) + 1.0, 0, 0.0),
                "system": GrowthBound(amp, 1, sup(m.kappa))}
    if isinstance(m, TwoBdlp):
        amp_e = m.m_minus + m.z + sup(m.a_minus) + sup(m.a_plus)
        amp_s = m.m_plus + sup(m.b_minus) + sup(m.b_plus) + sup(m.vphi_minus) + sup(m.vphi_plus)
        return {"environment": GrowthBound(amp_e, 1, 0.0),
                "system": GrowthBound(amp_s, 1, 0.0)}
    raise ModelError(f"unknown model type {type(m).__name__}")


# ---------------------------------------------------------------------------
# exact weighted expansion masses (closed forms, for the numeric cross-check)

def m_minus_value(m: RateModel, eta_minus: FiniteConfiguration, torus: Torus) -> float:
    return float(np.sum(env_death_vector(eta_minus, m, torus)))


def m_plus_value(m: RateModel, eta: MarkedConfiguration, torus: Torus) -> float:
    return float(np.sum(sys_death_vector(eta, m, torus)))


def _pair_sums(cfg: FiniteConfiguration, pot: Potential, torus: Torus) -> np.ndarray:
    """For each x in cfg: sum of pot over the other points."""
    n = cfg.size
    if n == 0:
        return np.zeros(0)
    if pot.is_zero or n == 1:
        return np.zeros(n)
    d = pairwise_distances(cfg.points, cfg.points, torus)
    v = pot(d)
    np.fill_diagonal(v, 0.0)
    return np.sum(v, axis=1)


def _cross_sums(a: FiniteConfiguration, b: FiniteConfiguration, pot: Potential,
                torus: Torus) -> np.ndarray:
    if a.size == 0:
        return np.zeros(0)
    if pot.is_zero or b.size == 0:
        return np.zeros(a.size)
    return np.sum(pot(pairwise_distances(a.points, b.points, torus)), axis=1)


def c_minus_closed(m: RateModel, eta_minus: FiniteConfiguration, c_minus: float,
                   torus: Torus) -> Tuple[float, bool]:
    """Closed-form weighted expansion mass of the environment kernels.

    Returns (value, exact); exact is always True for the supported
    environments."""
    n = eta_minus.size
    dim = torus.dim
    if isinstance(m, (GlauberGlauber, BdlpInGlauber, BranchingInGlauber)):
        beta_psi = potential_functionals(m.psi, dim).beta
        tot = float(n)
        pref = _mass_term(m.z_minus / c_minus, c_minus * beta_psi)
        for i in range(n):
            rest = eta_minus.remove_index(i)
            tot += pref * math.exp(-relative_energy(eta_minus.points[i], rest, m.psi, torus))
        return tot, True
    if isinstance(m, TwoBdlp):
        l1_am = potential_functionals(m.a_minus, dim).l1
        l1_ap = potential_functionals(m.a_plus, dim).l1
        s_am = _pair_sums(eta_minus, m.a_minus, torus)
        s_ap = _pair_sums(eta_minus, m.a_plus, torus)
        death = float(np.sum(m.m_minus + s_am + c_minus * l1_am)) if n else 0.0
        birth = float(np.sum(m.z + s_ap + c_minus * l1_ap)) / c_minus if n else 0.0
        return death + birth, True
    raise ModelError(f"unknown model type {type(m).__name__}")


def c_plus_closed(m: RateModel, eta: MarkedConfiguration, c_minus: float,
                  c_plus: float, torus: Torus) -> Tuple[float, bool]:
    """Closed-form weighted expansion mass of the system kernels.

    Returns (value, exact).  For the branching variant with a nonempty
    environment part one integral has no closed form and is replaced by its
    upper bound, flagged exact=False.
    """
    ep, em = eta.plus, eta.minus
    n = ep.size
    dim = torus.dim
    if isinstance(m, GlauberGlauber):
        bp = potential_functionals(m.phi_plus, dim).beta
        bm = potential_functionals(m.phi_minus, dim).beta
        tot = float(n)
        pref = _mass_term(m.z_plus / c_plus, c_plus * bp + c_minus * bm)
        for i in range(n):
            rest = ep.remove_index(i)
            x = ep.points[i]
            tot += pref * math.exp(
                -relative_energy(x, rest, m.phi_plus, torus)
                - relative_energy(x, em, m.phi_minus, torus))
        return tot, True
    if isinstance(m, BdlpInGlauber):
        l1 = {n_: potential_functionals(p, dim).l1
              for n_, p in (("am", m.a_minus), ("ap", m.a_plus),
                            ("bm", m.b_minus), ("bp", m.b_plus))}
        s_am = _pair_sums(ep, m.a_minus, torus)
        s_bm = _cross_sums(ep, em, m.b_minus, torus)
        s_ap = _pair_sums(ep, m.a_plus, torus)
        s_bp = _cross_sums(ep, em, m.b_plus, torus)
        death = float(np.sum(m.m_plus + s_am + s_bm + c_plus * l1["am"] + c_minus * l1["bm"])) if n else 0.0
        birth = float(np.sum(s_ap + s_bp + c_plus * l1["ap"] + c_minus * l1["bp"])) / c_plus if n else 0.0
        return death + birth, True
    if isinstance(m, BranchingInGlauber):
        fk = potential_functionals(m.kappa, dim)
        bphi = potential_functionals(m.phi, dim).beta
        l1a = potential_functionals(m.a_plus, dim).l1
        exact = em.size == 0
        tot = 0.0
        damp = np.array([
            math.exp(-relative_energy(y, em, m.phi, torus)) for y in ep.points
        ]) if n else np.zeros(0)
        x_phi = c_minus * bphi
        for i in range(n):
            x = ep.points[i]
            rest = ep.remove_index(i)
            tot += m.m_plus * _safe_exp(c_plus * fk.beta_neg) * math.exp(
                relative_energy(x, rest, m.kappa, torus))
            if n > 1 and not m.a_plus.is_zero:
                d = pairwise_distances(x[None, :], rest.points, torus)[0]
                w = np.delete(damp, i)
                tot += _mass_term(float(np.sum(w * m.a_plus(d))) / c_plus, x_phi)
            # candidate-parent integral; exact only without environment points
            tot += _mass_term(l1a, x_phi)
        return tot, exact
    if isinstance(m, TwoBdlp):
        l1 = {n_: potential_functionals(p, dim).l1
              for n_, p in (("bm", m.b_minus), ("bp", m.b_plus),
                            ("pm", m.vphi_minus), ("pp", m.vphi_plus))}
        s_bm = _pair_sums(ep, m.b_minus, torus)
        s_pm = _cross_sums(ep, em, m.vphi_minus, torus)
        s_bp = _pair_sums(ep, m.b_plus, torus)
        s_pp = _cross_sums(ep, em, m.vphi_plus, torus)
        death = float(np.sum(m.m_plus + s_bm + s_pm + c_plus * l1["bm"] + c_minus * l1["pm"])) if n else 0.0
        birth = float(np.sum(s_bp + s_pp + c_plus * l1["bp"] + c_minus * l1["pp"])) / c_plus if n else 0.0
        return death + birth, True
    raise ModelError(f"unknown model type {type(m).__name__}")


# ---------------------------------------------------------------------------
# numeric expansion masses (truncated Monte Carlo over candidate points,
# kernel values obtained by explicit subset enumeration)

def _dists_to(x: np.ndarray, block: np.ndarray, torus: Torus) -> np.ndarray:
    """block (S, n, dim) -> (S, n) distances to x."""
    S, n, d = block.shape
    if n == 0:
        return np.zeros((S, 0))
    return pairwise_distances(block.reshape(S * n, d), x[None, :], torus).reshape(S, n)


def _rowwise_dist(a: np.ndarray, b: np.ndarray, torus: Torus) -> np.ndarray:
    """Distance between paired rows of a and b, minimal image."""
    delta = min_image_diff(a - b, torus.side)
    return np.sqrt(np.sum(delta ** 2, axis=-1))


def _subset_product_sum(vals: np.ndarray) -> float:
    """Sum over all subsets of the product of the selected entries."""
    k = len(vals)
    tot = 0.0
    for mask in range(1 << k):
        p = 1.0
        for i in range(k):
            if mask >> i & 1:
                p *= vals[i]
        tot += p
    return tot


def _subset_product_sum_batch(vals: np.ndarray) -> np.ndarray:
    """(S, k) -> (S,) subset-product sums per row."""
    S, k = vals.shape
    tot = np.zeros(S)
    for mask in range(1 << k):
        p = np.ones(S)
        for i in range(k):
            if mask >> i & 1:
                p = p * vals[:, i]
        tot += p
    return tot


def _env_expansion_batch(m: RateModel, x: np.ndarray, rest: FiniteConfiguration,
                         torus: Torus):
    """Batch evaluators (death, birth) of |sum over subsets of rest of the
    environment kernel at (x, subset + candidates)| for candidate blocks."""
    if isinstance(m, (GlauberGlauber, BdlpInGlauber, BranchingInGlauber)):
        if rest.size:
            t_rest = mayer(m.psi, pairwise_distances(x[None, :], rest.points, torus)[0])
            s0 = _subset_product_sum(t_rest)
        else:
            s0 = 1.0

        def death(block: np.ndarray) -> np.ndarray:
            S, n = block.shape[0], block.shape[1]
            return np.full(S, 1.0) if n == 0 else np.zeros(S)

        def birth(block: np.ndarray) -> np.ndarray:
            t = mayer(m.psi, _dists_to(x, block, torus))
            return np.abs(m.z_minus * s0 * np.prod(t, axis=1))

        return death, birth
    if isinstance(m, TwoBdlp):
        if rest.size:
            r = pairwise_distances(x[None, :], rest.points, torus)[0]
            base_d = m.m_minus + float(np.sum(m.a_minus(r)))
            base_b = m.z + float(np.sum(m.a_plus(r)))
        else:
            base_d = m.m_minus
            base_b = m.z

        def _additive(base: float, pot: Potential):
            def fn(block: np.ndarray) -> np.ndarray:
                S, n = block.shape[0], block.shape[1]
                if n == 0:
                    return np.full(S, abs(base))
                if n == 1:
                    return np.abs(pot(_dists_to(x, block, torus)[:, 0]))
                return np.zeros(S)
            return fn

        return _additive(base_d, m.a_minus), _additive(base_b, m.a_plus)
    raise ModelError(f"unknown model type {type(m).__name__}")


def _sys_expansion_batch(m: RateModel, x: np.ndarray, rest_plus: FiniteConfiguration,
                         em: FiniteConfiguration, torus: Torus):
    """Batch evaluators (death, birth) mapping candidate blocks
    (xi_plus (S,nP,dim), xi_minus (S,nM,dim)) to
    |sum over subset pairs of the system kernel|."""
    if isinstance(m, GlauberGlauber):
        s0p = _subset_product_sum(
            mayer(m.phi_plus, pairwise_distances(x[None, :], rest_plus.points, torus)[0])
        ) if rest_plus.size else 1.0
        s0m = _subset_product_sum(
            mayer(m.phi_minus, pairwise_distances(x[None, :], em.points, torus)[0])
        ) if em.size else 1.0

        def death(xp: np.ndarray, xm: np.ndarray) -> np.ndarray:
            S = xp.shape[0]
            return np.full(S, 1.0) if (xp.shape[1] == 0 and xm.shape[1] == 0) else np.zeros(S)

        def birth(xp: np.ndarray, xm: np.ndarray) -> np.ndarray:
            tp = mayer(m.phi_plus, _dists_to(x, xp, torus))
            tm = mayer(m.phi_minus, _dists_to(x, xm, torus))
            return np.abs(m.z_plus * s0p * s0m * np.prod(tp, axis=1) * np.prod(tm, axis=1))

        return death, birth

    if isinstance(m, (BdlpInGlauber, TwoBdlp)):
        if isinstance(m, BdlpInGlauber):
            dp_pot, dm_pot = m.a_minus, m.b_minus
            bp_pot, bm_pot = m.a_plus, m.b_plus
            const = m.m_plus
        else:
            dp_pot, dm_pot = m.b_minus, m.vphi_minus
            bp_pot, bm_pot = m.b_plus, m.vphi_plus
            const = m.m_plus
        rp = pairwise_distances(x[None, :], rest_plus.points, torus)[0] if rest_plus.size else np.zeros(0)
        rm = pairwise_distances(x[None, :], em.points, torus)[0] if em.size else np.zeros(0)
        base_d = const + float(np.sum(dp_pot(rp))) + float(np.sum(dm_pot(rm)))
        base_b = float(np.sum(bp_pot(rp))) + float(np.sum(bm_pot(rm)))

        def _additive(base: float, pot_p: Potential, pot_m: Potential):
            def fn(xp: np.ndarray, xm: np.ndarray) -> np.ndarray:
                S, nP, nM = xp.shape[0], xp.shape[1], xm.shape[1]
                if nP == 0 and nM == 0:
                    return np.full(S, abs(base))
                if nP == 1 and nM == 0:
                    return np.abs(pot_p(_dists_to(x, xp, torus)[:, 0]))
                if nP == 0 and nM == 1:
                    return np.abs(pot_m(_dists_to(x, xm, torus)[:, 0]))
                return np.zeros(S)
            return fn

        return _additive(base_d, dp_pot, dm_pot), _additive(base_b, bp_pot, bm_pot)

    if isinstance(m, BranchingInGlauber):
        su0 = _subset_product_sum(
            np.expm1(m.kappa(pairwise_distances(x[None, :], rest_plus.points, torus)[0]))
        ) if rest_plus.size else 1.0
        # per fixed parent y in rest: damping subset sum over em and kernel value
        parents = rest_plus.points
        a_vals = m.a_plus(pairwise_distances(x[None, :], parents, torus)[0]) if rest_plus.size else np.zeros(0)
        sphi = np.array([
            _subset_product_sum(mayer(m.phi, pairwise_distances(y[None, :], em.points, torus)[0]))
            if em.size else 1.0
            for y in parents
        ]) if rest_plus.size else np.zeros(0)

        def death(xp: np.ndarray, xm: np.ndarray) -> np.ndarray:
            S, nP, nM = xp.shape[0], xp.shape[1], xm.shape[1]
            if nM > 0:
                return np.zeros(S)
            u = np.expm1(m.kappa(_dists_to(x, xp, torus)))
            return np.abs(m.m_plus * su0 * np.prod(u, axis=1))

        def birth(xp: np.ndarray, xm: np.ndarray) -> np.ndarray:
            S, nP, nM = xp.shape[0], xp.shape[1], xm.shape[1]
            if nP > 1:
                return np.zeros(S)
            if nP == 0:
                tot = np.zeros(S)
                for j in range(len(parents)):
                    if a_vals[j] == 0.0:
                        continue
                    tphi = mayer(m.phi, _dists_to(parents[j], xm, torus))
                    tot = tot + a_vals[j] * sphi[j] * np.prod(tphi, axis=1)
                return np.abs(tot)
            y = xp[:, 0, :]  # candidate parent per sample
            av = m.a_plus(_dists_to(x, xp, torus)[:, 0])
            if em.size:
                dye = pairwise_distances(y, em.points, torus)
                sy = _subset_product_sum_batch(mayer(m.phi, dye))
            else:
                sy = np.ones(S)
            prod_t = np.ones(S)
            for j in range(nM):
                prod_t = prod_t * mayer(m.phi, _rowwise_dist(y, xm[:, j, :], torus))
            return np.abs(av * sy * prod_t)

        return death, birth
    raise ModelError(f"unknown model type {type(m).__name__}")


def _remainder_exp(u: float, cap: int) -> float:
    """exp(u) minus its Taylor polynomial through order cap (nonnegative)."""
    s = sum(u ** n / math.factorial(n) for n in range(cap + 1))
    return max(0.0, math.exp(u) - s)


def _capped_radius(r: float, torus: Torus) -> Optional[float]:
    """Ball radius usable for restricted sampling; None -> whole torus."""
    if r <= 0:
        return 0.0
    if r > torus.side / 2:
        return None
    return r


def _single_mc(fn, weight_c: float, cap: int, torus: Torus, x: np.ndarray,
               radius: Optional[float], samples: int, seed: int) -> Tuple[float, float]:
    """Truncated candidate-space integral of fn with weight_c**order."""
    if radius == 0.0:
        cap = 0

    def G(cfg: FiniteConfiguration) -> float:
        return float(fn(cfg.points[None, :, :])[0]) * weight_c ** cfg.size

    def batch(pts: np.ndarray) -> np.ndarray:
        return fn(pts) * weight_c ** pts.shape[1]

    region = None if (radius is None or cap == 0) else (tuple(x), radius)
    quad = QuadratureSpec(method="mc", samples=samples, seed=seed, region=region)
    res = lp_integral(G, cap, torus, quad, batch=batch)
    return res.value, res.stderr


def _marked_mc(fn, caps: Tuple[int, int], weights: Tuple[float, float],
               torus: Torus, x: np.ndarray, r_plus: Optional[float],
               r_minus: Optional[float], samples: int, seed: int) -> Tuple[float, float]:
    """Two-component truncated candidate-space integral of fn with weights
    weights[0]**order_plus * weights[1]**order_minus."""
    cap_p = 0 if r_plus == 0.0 else caps[0]
    cap_m = 0 if r_minus == 0.0 else caps[1]
    rng = np.random.default_rng(np.random.Philox(key=seed))
    d = torus.dim

    def draw(n: int, radius: Optional[float]) -> Tuple[np.ndarray, float]:
        if n == 0:
            return np.zeros((samples, 0, d)), 1.0
        if radius is None:
            return torus.uniform(rng, samples * n).reshape(samples, n, d), torus.volume
        return _sample_ball(rng, x, radius, (samples, n), torus), ball_volume(d, radius)

    total = float(fn(np.zeros((1, 0, d)), np.zeros((1, 0, d)))[0])
    var = 0.0
    for n_p in range(cap_p + 1):
        for n_m in range(cap_m + 1):
            if n_p == 0 and n_m == 0:
                continue
            xp, vol_p = draw(n_p, r_plus)
            xm, vol_m = draw(n_m, r_minus)
            vals = np.asarray(fn(xp, xm), dtype=float)
            scale = (vol_p ** n_p * vol_m ** n_m
                     / (math.factorial(n_p) * math.factorial(n_m))
                     * weights[0] ** n_p * weights[1] ** n_m)
            total += float(np.mean(vals)) * scale
            var += (float(np.std(vals, ddof=1)) / math.sqrt(samples) * scale) ** 2
    return total, math.sqrt(var)


def _abs_mayer_products(x: np.ndarray, cfg: FiniteConfiguration, pot: Potential,
                        torus: Torus, positive: bool = False) -> float:
    """prod over cfg of (1 + |mayer factor|), an upper envelope for subset sums."""
    if cfg.size == 0:
        return 1.0
    r = pairwise_distances(x[None, :], cfg.points, torus)[0]
    f = np.expm1(pot(r)) if positive else mayer(pot, r)
    return float(np.prod(1.0 + np.abs(f)))


def c_minus_numeric(m: RateModel, eta_minus: FiniteConfiguration, c_minus: float,
                    torus: Torus, order_cap: int = 3, samples: int = 4000,
                    seed: int = 0) -> Tuple[float, float, float]:
    """Environment expansion mass by truncated Monte Carlo.

    Returns (value, stderr, truncation_tail); the tail is an upper bound on
    the dropped higher-order mass, so value <= exact <= value + tail up to
    Monte Carlo noise.
    """
    dim = torus.dim
    total = 0.0
    var = 0.0
    tail = 0.0
    for i in range(eta_minus.size):
        x = eta_minus.points[i]
        rest = eta_minus.remove_index(i)
        death_fn, birth_fn = _env_expansion_batch(m, x, rest, torus)
        if isinstance(m, (GlauberGlauber, BdlpInGlauber, BranchingInGlauber)):
            beta_psi = potential_functionals(m.psi, dim).beta
            cap_b = 0 if m.psi.is_zero else order_cap
            parts = [(death_fn, 1.0, 0, 0.0), (birth_fn, 1.0 / c_minus, cap_b,
                                               _capped_radius(m.psi.cutoff, torus))]
            tail += (m.z_minus / c_minus) * _abs_mayer_products(x, rest, m.psi, torus) \
                * _remainder_exp(c_minus * beta_psi, cap_b)
        else:
            parts = [
                (death_fn, 1.0, 0 if m.a_minus.is_zero else 1,
                 _capped_radius(m.a_minus.cutoff, torus)),
                (birth_fn, 1.0 / c_minus, 0 if m.a_plus.is_zero else 1,
                 _capped_radius(m.a_plus.cutoff, torus)),
            ]
        for p, (fn, w, cap, radius) in enumerate(parts):
            v, e = _single_mc(fn, c_minus, cap, torus, x, radius, samples,
                              seed + 17 * i + 5 * p + 1)
            total += w * v
            var += (w * e) ** 2
    return total, math.sqrt(var), tail


def c_plus_numeric(m: RateModel, eta: MarkedConfiguration, c_minus: float,
                   c_plus: float, torus: Torus, order_cap: int = 3,
                   samples: int = 4000, seed: int = 0) -> Tuple[float, float, float]:
    """System expansion mass by truncated Monte Carlo; see c_minus_numeric."""
    dim = torus.dim
    ep, em = eta.plus, eta.minus
    total = 0.0
    var = 0.0
    tail = 0.0
    weights = (c_plus, c_minus)
    for i in range(ep.size):
        x = ep.points[i]
        rest = ep.remove_index(i)
        death_fn, birth_fn = _sys_expansion_batch(m, x, rest, em, torus)
        if isinstance(m, GlauberGlauber):
            bp = potential_functionals(m.phi_plus, dim).beta
            bm = potential_functionals(m.phi_minus, dim).beta
            cp = 0 if m.phi_plus.is_zero else order_cap
            cm = 0 if m.phi_minus.is_zero else order_cap
            specs = [(death_fn, 1.0, (0, 0), 0.0, 0.0),
                     (birth_fn, 1.0 / c_plus, (cp, cm),
                      _capped_radius(m.phi_plus.cutoff, torus),
                      _capped_radius(m.phi_minus.cutoff, torus))]
            partial = sum((c_plus * bp) ** a / math.factorial(a)
                          * (c_minus * bm) ** b / math.factorial(b)
                          for a in range(cp + 1) for b in range(cm + 1))
            pref = (m.z_plus / c_plus) * _abs_mayer_products(x, rest, m.phi_plus, torus) \
                * _abs_mayer_products(x, em, m.phi_minus, torus)
            tail += pref * max(0.0, math.exp(c_plus * bp + c_minus * bm) - partial)
        elif isinstance(m, (BdlpInGlauber, TwoBdlp)):
            if isinstance(m, BdlpInGlauber):
                dp, dm, bp_, bm_ = m.a_minus, m.b_minus, m.a_plus, m.b_plus
            else:
                dp, dm, bp_, bm_ = m.b_minus, m.vphi_minus, m.b_plus, m.vphi_plus
            specs = [
                (death_fn, 1.0,
                 (0 if dp.is_zero else 1, 0 if dm.is_zero else 1),
                 _capped_radius(dp.cutoff, torus), _capped_radius(dm.cutoff, torus)),
                (birth_fn, 1.0 / c_plus,
                 (0 if bp_.is_zero else 1, 0 if bm_.is_zero else 1),
                 _capped_radius(bp_.cutoff, torus), _capped_radius(bm_.cutoff, torus)),
            ]
        else:
            fk = potential_functionals(m.kappa, dim)
            bphi = potential_functionals(m.phi, dim).beta
            l1a = potential_functionals(m.a_plus, dim).l1
            cp_d = 0 if m.kappa.is_zero else order_cap
            cm_b = 0 if (m.phi.is_zero or m.a_plus.is_zero) else order_cap
            specs = [
                (death_fn, 1.0, (cp_d, 0), _capped_radius(m.kappa.cutoff, torus), 0.0),
                (birth_fn, 1.0 / c_plus,
                 (0 if m.a_plus.is_zero else 1, cm_b),
                 _capped_radius(m.a_plus.cutoff, torus),
                 _capped_radius(m.a_plus.cutoff + m.phi.cutoff, torus)),
            ]
            tail += m.m_plus * _abs_mayer_products(x, rest, m.kappa, torus, positive=True) \
                * _remainder_exp(c_plus * fk.beta_neg, cp_d)
            if not m.a_plus.is_zero:
                env_prod = 2.0 ** em.size
                rem = _remainder_exp(c_minus * bphi, cm_b)
                rr = pairwise_distances(x[None, :], rest.points, torus)[0] if rest.size else np.zeros(0)
                parent_mass = float(np.sum(m.a_plus(rr)))
                tail += (parent_mass * env_prod * rem
                         + c_plus * l1a * env_prod * rem) / c_plus
        for p, (fn, w, caps, r_p, r_m) in enumerate(specs):
            v, e = _marked_mc(fn, caps, weights, torus, x, r_p, r_m, samples,
                              seed + 29 * i + 7 * p + 3)
            total += w * v
            var += (w * e) ** 2
    return total, math.sqrt(var), tail


# ---------------------------------------------------------------------------
# numeric spot check and the aggregate report

@dataclass(frozen=True)
class SpotCheckSettings:
    """Controls the numeric verification of c <= a * M on sampled
    configurations.  sigma scales the Monte Carlo tolerance."""

    samples: int = 3000
    order_cap: int = 3
    configs_per_size: int = 2
    max_points: int = 3
    seed: int = 7
    sigma: float = 4.0

    def __post_init__(self):
        if self.samples < 2 or self.configs_per_size < 1 or self.max_points < 1:
            raise ConfigError("spot check sizes must be positive")
        if self.order_cap < 0 or self.sigma <= 0:
            raise ConfigError("order_cap must be >= 0 and sigma > 0")


@dataclass
class SpotCheckRow:
    component: str
    n_plus: int
    n_minus: int
    numeric: float
    stderr: float
    tail: float
    closed: float
    closed_exact: bool
    death_mass: float
    bound: float
    ok_inequality: bool
    ok_equality: Optional[bool]

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SpotCheckReport:
    rows: List[SpotCheckRow]
    ok: bool

    def as_dict(self) -> dict:
        return {"ok": self.ok, "rows": [r.as_dict() for r in self.rows]}


def _cluster_points(rng: np.random.Generator, torus: Torus, n: int,
                    radius: float) -> np.ndarray:
    center = torus.uniform(rng, 1)[0]
    if n == 1:
        return center[None, :]
    offs = rng.uniform(-radius, radius, size=(n - 1, torus.dim))
    return np.vstack([center[None, :], torus.wrap(center[None, :] + offs)])


def _check_row(component, n_plus, n_minus, numeric, err, tail, closed, exact,
               mass, a, sigma) -> SpotCheckRow:
    bound = a * mass if math.isfinite(a) else math.inf
    slack = sigma * err + 1e-9 * (1.0 + abs(bound))
    ok_ineq = numeric <= bound + slack
    ok_eq = None
    if exact:
        ok_eq = abs(numeric - closed) <= sigma * err + tail + 1e-9 * (1.0 + abs(closed))
    return SpotCheckRow(component, n_plus, n_minus, numeric, err, tail, closed,
                        exact, mass, bound, ok_ineq, ok_eq)


def spot_check_regime(m: RateModel, c_minus: float, c_plus: float, torus: Torus,
                      settings: SpotCheckSettings = SpotCheckSettings()) -> SpotCheckReport:
    """Evaluate the expansion masses numerically on sampled configurations
    and compare them against the closed forms and the a * M bounds."""
    validate_model_on_torus(m, torus)
    dim = torus.dim
    a_env = env_constants(m, c_minus, dim).a
    a_sys = sys_constants(m, c_minus, c_plus, dim).a
    rng = np.random.default_rng(np.random.Philox(key=settings.seed))
    cuts = [p.cutoff for p in model_potentials(m).values() if p.cutoff > 0]
    cluster = min(max(cuts) if cuts else torus.side / 4, torus.side / 4)

    rows: List[SpotCheckRow] = []
    base = settings.seed * 1000 + 11
    for n in range(1, settings.max_points + 1):
        for rep in range(settings.configs_per_size):
            cfg = FiniteConfiguration(_cluster_points(rng, torus, n, cluster))
            num, err, tail = c_minus_numeric(
                m, cfg, c_minus, torus, settings.order_cap, settings.samples,
                base + 101 * n + rep)
            closed, exact = c_minus_closed(m, cfg, c_minus, torus)
            rows.append(_check_row("environment", 0, n, num, err, tail, closed,
                                   exact, m_minus_value(m, cfg, torus), a_env,
                                   settings.sigma))

    shapes = [(1, 0), (1, 1), (2, 1), (3, 2)]
    shapes = [s for s in shapes if s[0] <= settings.max_points]
    for n_p, n_m in shapes:
        for rep in range(settings.configs_per_size):
            pts = _cluster_points(rng, torus, n_p + n_m, cluster)
            eta = MarkedConfiguration(
                plus=FiniteConfiguration(pts[:n_p]),
                minus=FiniteConfiguration(pts[n_p:]),
            )
            num, err, tail = c_plus_numeric(
                m, eta, c_minus, c_plus, torus, settings.order_cap,
                settings.samples, base + 997 * n_p + 31 * n_m + rep)
            closed, exact = c_plus_closed(m, eta, c_minus, c_plus, torus)
            rows.append(_check_row("system", n_p, n_m, num, err, tail, closed,
                                   exact, m_plus_value(m, eta, torus), a_sys,
                                   settings.sigma))

    ok = all(r.ok_inequality and (r.ok_equality is not False) for r in rows)
    return SpotCheckReport(rows=rows, ok=ok)


@dataclass
class RegimeReport:
    variant: str
    c_minus_weight: float
    c_plus_weight: float
    environment: ComponentConstants
    system: ComponentConstants
    averaged: ComponentConstants
    gap_env: float
    angle_env: float
    gap_averaged: float
    angle_averaged: float
    growth: Dict[str, GrowthBound]
    feasible: bool
    spot: Optional[SpotCheckReport] = None

    def as_dict(self) -> dict:
        def comp(c: ComponentConstants) -> dict:
            return {"a": c.a, "m_star": c.m_star, "feasible": c.feasible,
                    "details": dict(c.details)}

        out = {
            "variant": self.variant,
            "c_minus_weight": self.c_minus_weight,
            "c_plus_weight": self.c_plus_weight,
            "environment": comp(self.environment),
            "system": comp(self.system),
            "averaged": comp(self.averaged),
            "gap_env": self.gap_env,
            "angle_env": self.angle_env,
            "gap_averaged": self.gap_averaged,
            "angle_averaged": self.angle_averaged,
            "growth": {k: {"amplitude": g.amplitude, "degree": g.degree,
                           "exponent": g.exponent} for k, g in self.growth.items()},
            "feasible": self.feasible,
        }
        if self.spot is not None:
            out["spot_check"] = self.spot.as_dict()
        return out

    def summary_lines(self) -> List[str]:
        def fmt(v: float) -> str:
            return f"{v:.6g}" if math.isfinite(v) else "inf"

        lines = [
            f"variant: {self.variant}",
            f"weights: c_minus={fmt(self.c_minus_weight)} c_plus={fmt(self.c_plus_weight)}",
            f"environment: a={fmt(self.environment.a)} "
            f"feasible={self.environment.feasible} gap={fmt(self.gap_env)} "
            f"angle={fmt(self.angle_env)}",
            f"system: a={fmt(self.system.a)} feasible={self.system.feasible}",
            f"averaged: a={fmt(self.averaged.a)} feasible={self.averaged.feasible} "
            f"gap={fmt(self.gap_averaged)} angle={fmt(self.angle_averaged)}",
            f"overall feasible: {self.feasible}",
        ]
        if self.spot is not None:
            n_bad = sum((not r.ok_inequality) or (r.ok_equality is False)
                        for r in self.spot.rows)
            lines.append(
                f"spot check: {'ok' if self.spot.ok else 'FAILED'} "
                f"({len(self.spot.rows)} rows, {n_bad} violations)")
        return lines


def check_regime(m: RateModel, c_minus: float, c_plus: float,
                 dim: Optional[int] = None, torus: Optional[Torus] = None,
                 rho_inv: Optional[float] = None,
                 spot: Optional[SpotCheckSettings] = None) -> RegimeReport:
    """Full regime report for a model at the given component weights."""
    if torus is not None:
        validate_model_on_torus(m, torus)
        dim = torus.dim
    if dim is None:
        raise ConfigError("check_regime needs dim or torus")
    if dim not in (1, 2, 3):
        raise ConfigError("dim must be 1, 2 or 3")
    env = env_constants(m, c_minus, dim)
    sys_ = sys_constants(m, c_minus, c_plus, dim)
    avg = averaged_constants(m, c_minus, c_plus, dim, rho_inv)
    spot_report = None
    if spot is not None:
        if torus is None:
            raise ConfigError("spot check needs a torus")
        spot_report = spot_check_regime(m, c_minus, c_plus, torus, spot)
    return RegimeReport(
        variant=variant_name(m),
        c_minus_weight=c_minus,
        c_plus_weight=c_plus,
        environment=env,
        system=sys_,
        averaged=avg,
        gap_env=spectral_gap(env.a, env.m_star),
        angle_env=sector_angle(env.a),
        gap_averaged=spectral_gap(avg.a, avg.m_star),
        angle_averaged=sector_angle(avg.a),
        growth=growth_bounds(m, dim),
        feasible=env.feasible and sys_.feasible and avg.feasible,
        spot=spot_report,
    )


@dataclass
class ScanResult:
    evaluated: int
    feasible_count: int
    best: Optional[dict]
    rows: List[dict]


def scan_feasible(m: RateModel, dim: int,
                  c_minus_grid: Optional[Sequence[float]] = None,
                  c_plus_grid: Optional[Sequence[float]] = None,
                  rho_inv: Optional[float] = None) -> ScanResult:
    """Scan component weights for a feasible contraction regime.

    Among weight pairs where every component contracts, the best entry
    maximizes the environment relaxation rate lambda0 = (2 - a_env) M*;
    ties resolve to the smallest c_minus, then the smallest c_plus, so the
    result does not depend on grid ordering.
    """
    if c_minus_grid is None:
        c_minus_grid = np.geomspace(0.05, 20.0, 25)
    if c_plus_grid is None:
        c_plus_grid = np.geomspace(0.05, 20.0, 25)
    rows: List[dict] = []
    best = None
    feasible_count = 0
    for cm in sorted(float(c) for c in c_minus_grid):
        for cp in sorted(float(c) for c in c_plus_grid):
            env = env_constants(m, cm, dim)
            sy = sys_constants(m, cm, cp, dim)
            av = averaged_constants(m, cm, cp, dim, rho_inv)
            lam0 = spectral_gap(env.a, env.m_star)
            feasible = env.feasible and sy.feasible and av.feasible
            row = {"c_minus": cm, "c_plus": cp,
                   "a_env": env.a, "a_sys": sy.a, "a_avg": av.a,
                   "lambda0": lam0, "feasible": feasible}
            rows.append(row)
            if feasible:
                feasible_count += 1
                if best is None or lam0 > best["lambda0"]:
                    best = row
    return ScanResult(evaluated=len(rows), feasible_count=feasible_count,
                      best=best, rows=rows)
