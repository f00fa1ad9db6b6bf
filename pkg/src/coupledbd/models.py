"""Rate models for the two-component dynamics and their kernel expansions.

Four model families are provided.  The environment is autonomous; the system
reads the environment but never writes it.

* GlauberGlauber: heat-bath death rate 1 in both components; births damped
  exponentially by the interaction energy with neighbours.
* BdlpInGlauber: density-dependent death and contact births with additive
  kernels for the system, heat-bath environment.
* BranchingInGlauber: parent-mediated branching whose rate is damped by the
  parent's interaction with the environment; death amplified by crowding.
* TwoBdlp: additive-kernel birth and death in both components.

For each model the birth/death rates admit a finite-difference kernel
expansion d(x, gamma) = sum over finite eta inside gamma of D(x, eta) (and
likewise b against B); decomposition_kernels evaluates those kernels.  The
subset-sum identity tying kernels to rates is enforced by tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .errors import ModelError
from .geometry import FiniteConfiguration, MarkedConfiguration, Torus, pairwise_distances
from .potentials import Potential, mayer, potential_functionals, relative_energy, sample_kernel_offsets


@dataclass(frozen=True)
class GlauberGlauber:
    z_minus: float
    psi: Potential
    z_plus: float
    phi_minus: Potential
    phi_plus: Potential

    def __post_init__(self):
        if self.z_minus < 0 or self.z_plus < 0:
            raise ModelError("activities must be nonnegative")


@dataclass(frozen=True)
class BdlpInGlauber:
    z_minus: float
    psi: Potential
    m_plus: float
    a_minus: Potential   # system-system competition (death)
    a_plus: Potential    # system-system contact birth
    b_minus: Potential   # environment-induced death
    b_plus: Potential    # environment-induced birth

    def __post_init__(self):
        if self.z_minus < 0:
            raise ModelError("activity must be nonnegative")
        if self.m_plus <= 0:
            raise ModelError("intrinsic death rate m_plus must be positive")


@dataclass(frozen=True)
class BranchingInGlauber:
    z_minus: float
    psi: Potential
    m_plus: float
    kappa: Potential     # death amplification exponent
    phi: Potential       # parent damping by the environment
    a_plus: Potential    # dispersal kernel

    def __post_init__(self):
        if self.z_minus < 0:
            raise ModelError("activity must be nonnegative")
        if self.m_plus <= 0:
            raise ModelError("intrinsic death rate m_plus must be positive")


@dataclass(frozen=True)
class TwoBdlp:
    z: float
    m_minus: float
    a_minus: Potential   # environment competition (death)
    a_plus: Potential    # environment contact birth
    m_plus: float
    b_minus: Potential   # system competition (death)
    b_plus: Potential    # system contact birth
    vphi_minus: Potential  # environment-induced system death
    vphi_plus: Potential   # environment-induced system birth

    def __post_init__(self):
        if self.z < 0:
            raise ModelError("immigration activity must be nonnegative")
        if self.m_minus <= 0 or self.m_plus <= 0:
            raise ModelError("intrinsic death rates must be positive")


RateModel = Union[GlauberGlauber, BdlpInGlauber, BranchingInGlauber, TwoBdlp]

_VARIANT_NAMES = {
    GlauberGlauber: "glauber_glauber",
    BdlpInGlauber: "bdlp_in_glauber",
    BranchingInGlauber: "branching_in_glauber",
    TwoBdlp: "two_bdlp",
}


def variant_name(m: RateModel) -> str:
    try:
        return _VARIANT_NAMES[type(m)]
    except KeyError:
        raise ModelError(f"unknown model type {type(m).__name__}")


def model_potentials(m: RateModel) -> dict:
    """All radial profiles the model uses, keyed by field name."""
    if isinstance(m, GlauberGlauber):
        return {"psi": m.psi, "phi_minus": m.phi_minus, "phi_plus": m.phi_plus}
    if isinstance(m, BdlpInGlauber):
        return {"psi": m.psi, "a_minus": m.a_minus, "a_plus": m.a_plus,
                "b_minus": m.b_minus, "b_plus": m.b_plus}
    if isinstance(m, BranchingInGlauber):
        return {"psi": m.psi, "kappa": m.kappa, "phi": m.phi, "a_plus": m.a_plus}
    if isinstance(m, TwoBdlp):
        return {"a_minus": m.a_minus, "a_plus": m.a_plus, "b_minus": m.b_minus,
                "b_plus": m.b_plus, "vphi_minus": m.vphi_minus, "vphi_plus": m.vphi_plus}
    raise ModelError(f"unknown model type {type(m).__name__}")


def validate_model_on_torus(m: RateModel, torus: Torus):
    """Every cutoff must fit inside half the box, else the minimal-image
    interaction differs from the full-space one."""
    for name, pot in model_potentials(m).items():
        if pot.cutoff > torus.side / 2 + 1e-12:
            raise ModelError(
                f"potential {name} has cutoff {pot.cutoff} exceeding side/2 = {torus.side / 2}"
            )


def _cross_sum(x, cfg: FiniteConfiguration, pot: Potential, torus: Torus) -> float:
    """Sum of pot(|x-y|) over y in cfg."""
    if cfg.size == 0 or pot.is_zero:
        return 0.0
    d = pairwise_distances(np.asarray(x, dtype=float)[None, :], cfg.points, torus)[0]
    return float(np.sum(pot(d)))


def env_rates(x, gamma_minus: FiniteConfiguration, m: RateModel, torus: Torus) -> Tuple[float, float]:
    """(death, birth) rate of the environment at x given gamma_minus.

    For the death rate of an existing particle the caller passes the
    configuration with that particle removed.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(m, (GlauberGlauber, BdlpInGlauber, BranchingInGlauber)):
        death = 1.0
        birth = m.z_minus * math.exp(-relative_energy(x, gamma_minus, m.psi, torus))
        return death, birth
    if isinstance(m, TwoBdlp):
        death = m.m_minus + _cross_sum(x, gamma_minus, m.a_minus, torus)
        birth = m.z + _cross_sum(x, gamma_minus, m.a_plus, torus)
        return death, birth
    raise ModelError(f"unknown model type {type(m).__name__}")


def sys_rates(x, gamma: MarkedConfiguration, m: RateModel, torus: Torus) -> Tuple[float, float]:
    """(death, birth) rate of the system at x given the pair configuration.

    Same removal convention as env_rates: for a death rate, gamma.plus has
    the particle at x already removed.
    """
    x = np.asarray(x, dtype=float)
    gp, gm = gamma.plus, gamma.minus
    if isinstance(m, GlauberGlauber):
        death = 1.0
        birth = m.z_plus * math.exp(
            -relative_energy(x, gm, m.phi_minus, torus)
            - relative_energy(x, gp, m.phi_plus, torus)
        )
        return death, birth
    if isinstance(m, BdlpInGlauber):
        death = m.m_plus + _cross_sum(x, gp, m.a_minus, torus) + _cross_sum(x, gm, m.b_minus, torus)
        birth = _cross_sum(x, gp, m.a_plus, torus) + _cross_sum(x, gm, m.b_plus, torus)
        return death, birth
    if isinstance(m, BranchingInGlauber):
        death = m.m_plus * math.exp(relative_energy(x, gp, m.kappa, torus))
        birth = 0.0
        if gp.size and not m.a_plus.is_zero:
            disp = pairwise_distances(x[None, :], gp.points, torus)[0]
            weights = np.array([
                math.exp(-relative_energy(y, gm, m.phi, torus)) for y in gp.points
            ])
            birth = float(np.sum(weights * m.a_plus(disp)))
        return death, birth
    if isinstance(m, TwoBdlp):
        death = m.m_plus + _cross_sum(x, gp, m.b_minus, torus) + _cross_sum(x, gm, m.vphi_minus, torus)
        birth = _cross_sum(x, gp, m.b_plus, torus) + _cross_sum(x, gm, m.vphi_plus, torus)
        return death, birth
    raise ModelError(f"unknown model type {type(m).__name__}")


def _mayer_product(x, cfg: FiniteConfiguration, pot: Potential, torus: Torus) -> float:
    """Product of (exp(-pot(|x-y|)) - 1) over y in cfg; 1 on the empty set."""
    if cfg.size == 0:
        return 1.0
    d = pairwise_distances(np.asarray(x, dtype=float)[None, :], cfg.points, torus)[0]
    return float(np.prod(mayer(pot, d)))


def _positive_mayer_product(x, cfg: FiniteConfiguration, pot: Potential, torus: Torus) -> float:
    """Product of (exp(+pot(|x-y|)) - 1) over y in cfg; 1 on the empty set."""
    if cfg.size == 0:
        return 1.0
    d = pairwise_distances(np.asarray(x, dtype=float)[None, :], cfg.points, torus)[0]
    return float(np.prod(np.expm1(pot(d))))


def _additive_pair(x, eta: FiniteConfiguration, const: float, pot: Potential, torus: Torus) -> float:
    """Kernel of an additive rate: const on the empty set, pot(|x-y|) on
    singletons, 0 on larger sets."""
    if eta.size == 0:
        return const
    if eta.size == 1:
        r = pairwise_distances(np.asarray(x, dtype=float)[None, :], eta.points, torus)[0, 0]
        return float(pot(np.array([r]))[0])
    return 0.0


def decomposition_kernels(m: RateModel, x, eta: MarkedConfiguration, torus: Torus):
    """(D_minus, B_minus, D_plus, B_plus) evaluated at x and eta.

    The minus kernels are functions of eta.minus alone; the plus kernels see
    the whole pair.  Summed over all subconfigurations they reproduce the
    rates, which is the defining property.
    """
    x = np.asarray(x, dtype=float)
    ep, em = eta.plus, eta.minus

    if isinstance(m, (GlauberGlauber, BdlpInGlauber, BranchingInGlauber)):
        d_minus = 1.0 if em.size == 0 else 0.0
        b_minus = m.z_minus * _mayer_product(x, em, m.psi, torus)
    elif isinstance(m, TwoBdlp):
        d_minus = _additive_pair(x, em, m.m_minus, m.a_minus, torus)
        b_minus = _additive_pair(x, em, m.z, m.a_plus, torus)
    else:
        raise ModelError(f"unknown model type {type(m).__name__}")

    if isinstance(m, GlauberGlauber):
        d_plus = 1.0 if (ep.size == 0 and em.size == 0) else 0.0
        b_plus = m.z_plus * _mayer_product(x, ep, m.phi_plus, torus) * _mayer_product(x, em, m.phi_minus, torus)
    elif isinstance(m, BdlpInGlauber):
        if em.size == 0:
            d_plus = _additive_pair(x, ep, m.m_plus, m.a_minus, torus)
            b_plus = _additive_pair(x, ep, 0.0, m.a_plus, torus)
        elif ep.size == 0:
            d_plus = _additive_pair(x, em, 0.0, m.b_minus, torus)
            b_plus = _additive_pair(x, em, 0.0, m.b_plus, torus)
        else:
            d_plus = 0.0
            b_plus = 0.0
    elif isinstance(m, BranchingInGlauber):
        d_plus = m.m_plus * _positive_mayer_product(x, ep, m.kappa, torus) if em.size == 0 else 0.0
        if ep.size == 1:
            y = ep.points[0]
            disp = float(pairwise_distances(x[None, :], ep.points, torus)[0, 0])
            b_plus = float(m.a_plus(np.array([disp]))[0]) * _mayer_product(y, em, m.phi, torus)
        else:
            b_plus = 0.0
    elif isinstance(m, TwoBdlp):
        if em.size == 0:
            d_plus = _additive_pair(x, ep, m.m_plus, m.b_minus, torus)
            b_plus = _additive_pair(x, ep, 0.0, m.b_plus, torus)
        elif ep.size == 0:
            d_plus = _additive_pair(x, em, 0.0, m.vphi_minus, torus)
            b_plus = _additive_pair(x, em, 0.0, m.vphi_plus, torus)
        else:
            d_plus = 0.0
            b_plus = 0.0

    return d_minus, b_minus, d_plus, b_plus


# ---------------------------------------------------------------------------
# vectorized rate vectors for the event loop (equal to the pointwise contract)

def _row_interaction(points_a: np.ndarray, points_b, pot: Potential, torus: Torus,
                     exclude_self: bool = False) -> np.ndarray:
    """For each x in points_a: sum of pot(|x-y|) over y in points_b."""
    n = len(points_a)
    if n == 0:
        return np.zeros(0)
    if pot.is_zero or len(points_b) == 0:
        return np.zeros(n)
    d = pairwise_distances(points_a, points_b, torus)
    vals = pot(d)
    if exclude_self:
        np.fill_diagonal(vals, 0.0)
    return np.sum(vals, axis=1)


def env_death_vector(gamma_minus: FiniteConfiguration, m: RateModel, torus: Torus) -> np.ndarray:
    n = gamma_minus.size
    if isinstance(m, (GlauberGlauber, BdlpInGlauber, BranchingInGlauber)):
        return np.ones(n)
    if isinstance(m, TwoBdlp):
        return m.m_minus + _row_interaction(
            gamma_minus.points, gamma_minus.points, m.a_minus, torus, exclude_self=True)
    raise ModelError(f"unknown model type {type(m).__name__}")


def sys_death_vector(gamma: MarkedConfiguration, m: RateModel, torus: Torus) -> np.ndarray:
    gp, gm = gamma.plus, gamma.minus
    n = gp.size
    if isinstance(m, GlauberGlauber):
        return np.ones(n)
    if isinstance(m, BdlpInGlauber):
        return (m.m_plus
                + _row_interaction(gp.points, gp.points, m.a_minus, torus, exclude_self=True)
                + _row_interaction(gp.points, gm.points, m.b_minus, torus))
    if isinstance(m, BranchingInGlauber):
        e = _row_interaction(gp.points, gp.points, m.kappa, torus, exclude_self=True)
        return m.m_plus * np.exp(e)
    if isinstance(m, TwoBdlp):
        return (m.m_plus
                + _row_interaction(gp.points, gp.points, m.b_minus, torus, exclude_self=True)
                + _row_interaction(gp.points, gm.points, m.vphi_minus, torus))
    raise ModelError(f"unknown model type {type(m).__name__}")


# ---------------------------------------------------------------------------
# birth proposals

@dataclass(frozen=True)
class ProposalComponent:
    kind: str                      # "uniform" | "kernel"
    mass: float
    parent: Optional[tuple] = None
    kernel: Optional[Potential] = None
    kernel_l1: float = 0.0


@dataclass(frozen=True)
class BirthProposal:
    """Dominating birth mechanism: a mixture of candidate generators plus a
    pointwise acceptance probability.

    acceptance(x) * dominating_intensity(x) equals the true birth rate
    density at x for the frozen configuration the proposal was built from.
    """

    torus: Torus
    components: Tuple[ProposalComponent, ...]
    acceptance: Callable[[np.ndarray], float]

    @property
    def total_mass(self) -> float:
        return float(sum(c.mass for c in self.components))

    def dominating_intensity(self, x) -> float:
        x = np.asarray(x, dtype=float)
        total = 0.0
        for c in self.components:
            if c.kind == "uniform":
                total += c.mass / self.torus.volume
            else:
                p = np.asarray(c.parent, dtype=float)
                r = pairwise_distances(x[None, :], p[None, :], self.torus)[0, 0]
                total += (c.mass / c.kernel_l1) * float(c.kernel(np.array([r]))[0])
        return total

    def sample_candidate(self, rng: np.random.Generator) -> Optional[np.ndarray]:
        masses = np.array([c.mass for c in self.components])
        total = masses.sum()
        if total <= 0.0:
            return None
        i = int(np.searchsorted(np.cumsum(masses), rng.uniform(0.0, total), side="right"))
        i = min(i, len(self.components) - 1)
        c = self.components[i]
        if c.kind == "uniform":
            return self.torus.uniform(rng, 1)[0]
        off = sample_kernel_offsets(c.kernel, self.torus.dim, rng, 1)[0]
        return self.torus.wrap(np.asarray(c.parent, dtype=float) + off)


def _always_accept(_x) -> float:
    return 1.0


def _kernel_components(parents: np.ndarray, pot: Potential, torus: Torus,
                       weights=None) -> list:
    if pot.is_zero or len(parents) == 0:
        return []
    l1 = potential_functionals(pot, torus.dim).l1
    if l1 <= 0:
        return []
    if weights is None:
        weights = np.ones(len(parents))
    return [
        ProposalComponent(kind="kernel", mass=float(w) * l1,
                          parent=tuple(p), kernel=pot, kernel_l1=l1)
        for p, w in zip(parents, weights) if w > 0
    ]


def birth_proposal(component: str, gamma: MarkedConfiguration, m, torus: Torus) -> BirthProposal:
    """Build the dominating birth mechanism for one component.

    component is "system" or "environment"; m may also be an AveragedModel,
    in which case the averaged system rates are used and "environment" is
    invalid.  Acceptance closures snapshot the configuration handed in here.
    """
    if isinstance(m, AveragedModel):
        if component != "system":
            raise ModelError("averaged models have no environment component")
        return _averaged_proposal(gamma.plus, m, torus)
    if component == "environment":
        return _env_proposal(gamma.minus, m, torus)
    if component == "system":
        return _sys_proposal(gamma, m, torus)
    raise ValueError(f"component must be 'system' or 'environment', got {component!r}")


def _env_proposal(gamma_minus: FiniteConfiguration, m: RateModel, torus: Torus) -> BirthProposal:
    if isinstance(m, (GlauberGlauber, BdlpInGlauber, BranchingInGlauber)):
        comps = []
        if m.z_minus > 0:
            comps.append(ProposalComponent(kind="uniform", mass=m.z_minus * torus.volume))
        psi = m.psi

        def accept(x, _g=gamma_minus):
            return math.exp(-relative_energy(x, _g, psi, torus))

        return BirthProposal(torus=torus, components=tuple(comps), acceptance=accept)
    if isinstance(m, TwoBdlp):
        comps = []
        if m.z > 0:
            comps.append(ProposalComponent(kind="uniform", mass=m.z * torus.volume))
        comps.extend(_kernel_components(gamma_minus.points, m.a_plus, torus))
        return BirthProposal(torus=torus, components=tuple(comps), acceptance=_always_accept)
    raise ModelError(f"unknown model type {type(m).__name__}")


def _sys_proposal(gamma: MarkedConfiguration, m: RateModel, torus: Torus) -> BirthProposal:
    gp, gm = gamma.plus, gamma.minus
    if isinstance(m, GlauberGlauber):
        comps = []
        if m.z_plus > 0:
            comps.append(ProposalComponent(kind="uniform", mass=m.z_plus * torus.volume))
        phi_m, phi_p = m.phi_minus, m.phi_plus

        def accept(x, _gp=gp, _gm=gm):
            return math.exp(-relative_energy(x, _gm, phi_m, torus)
                            - relative_energy(x, _gp, phi_p, torus))

        return BirthProposal(torus=torus, components=tuple(comps), acceptance=accept)
    if isinstance(m, BdlpInGlauber):
        comps = _kernel_components(gp.points, m.a_plus, torus)
        comps.extend(_kernel_components(gm.points, m.b_plus, torus))
        return BirthProposal(torus=torus, components=tuple(comps), acceptance=_always_accept)
    if isinstance(m, BranchingInGlauber):
        # parent weight damped by the environment, evaluated at build time
        weights = np.array([
            math.exp(-relative_energy(y, gm, m.phi, torus)) for y in gp.points
        ]) if gp.size else np.zeros(0)
        comps = _kernel_components(gp.points, m.a_plus, torus, weights=weights)
        return BirthProposal(torus=torus, components=tuple(comps), acceptance=_always_accept)
    if isinstance(m, TwoBdlp):
        comps = _kernel_components(gp.points, m.b_plus, torus)
        comps.extend(_kernel_components(gm.points, m.vphi_plus, torus))
        return BirthProposal(torus=torus, components=tuple(comps), acceptance=_always_accept)
    raise ModelError(f"unknown model type {type(m).__name__}")


# ---------------------------------------------------------------------------
# averaged model

@dataclass(frozen=True)
class AveragedModel:
    """System dynamics with the environment integrated out.

    lambda_bar is the averaged environment factor; its meaning depends on
    the base variant (exponential damping factor for the Glauber and
    branching families, an additive immigration intensity for the additive
    families).  rho_inv is the invariant one-point density the averaging was
    computed against.
    """

    base: RateModel
    rho_inv: float
    lambda_bar: float
    lambda_bar_tail: float = 0.0
    m_bar: float = 0.0
    phi_bar_minus: float = 0.0
    phi_bar_plus: float = 0.0


def build_averaged_model(m: RateModel, k_inv, torus: Torus) -> AveragedModel:
    """Average the environment-dependent parts of the system rates against
    an invariant correlation table.

    Exponential damping factors are computed by the truncated expansion in
    the table's order; additive couplings reduce exactly to rho_inv times
    the kernel mass.
    """
    from .tables import exp_mayer_functional

    if abs(k_inv.k0 - 1.0) > 1e-9:
        raise ModelError("invariant table must have order-0 entry 1")
    rho = k_inv.k1
    dim = torus.dim
    if isinstance(m, GlauberGlauber):
        lam, tail = exp_mayer_functional(k_inv, m.phi_minus)
        return AveragedModel(base=m, rho_inv=rho, lambda_bar=lam, lambda_bar_tail=tail)
    if isinstance(m, BdlpInGlauber):
        m_bar = rho * potential_functionals(m.b_minus, dim).l1
        lam = rho * potential_functionals(m.b_plus, dim).l1
        return AveragedModel(base=m, rho_inv=rho, lambda_bar=lam, m_bar=m_bar)
    if isinstance(m, BranchingInGlauber):
        lam, tail = exp_mayer_functional(k_inv, m.phi)
        return AveragedModel(base=m, rho_inv=rho, lambda_bar=lam, lambda_bar_tail=tail)
    if isinstance(m, TwoBdlp):
        pbm = rho * potential_functionals(m.vphi_minus, dim).l1
        pbp = rho * potential_functionals(m.vphi_plus, dim).l1
        return AveragedModel(base=m, rho_inv=rho, lambda_bar=pbp,
                             phi_bar_minus=pbm, phi_bar_plus=pbp)
    raise ModelError(f"unknown model type {type(m).__name__}")


def averaged_rates(x, gamma_plus: FiniteConfiguration, am: AveragedModel, torus: Torus) -> Tuple[float, float]:
    """(death, birth) rate of the averaged system at x."""
    x = np.asarray(x, dtype=float)
    m = am.base
    if isinstance(m, GlauberGlauber):
        death = 1.0
        birth = m.z_plus * am.lambda_bar * math.exp(-relative_energy(x, gamma_plus, m.phi_plus, torus))
        return death, birth
    if isinstance(m, BdlpInGlauber):
        death = m.m_plus + am.m_bar + _cross_sum(x, gamma_plus, m.a_minus, torus)
        birth = am.lambda_bar + _cross_sum(x, gamma_plus, m.a_plus, torus)
        return death, birth
    if isinstance(m, BranchingInGlauber):
        death = m.m_plus * math.exp(relative_energy(x, gamma_plus, m.kappa, torus))
        birth = am.lambda_bar * _cross_sum(x, gamma_plus, m.a_plus, torus)
        return death, birth
    if isinstance(m, TwoBdlp):
        death = m.m_plus + am.phi_bar_minus + _cross_sum(x, gamma_plus, m.b_minus, torus)
        birth = am.phi_bar_plus + _cross_sum(x, gamma_plus, m.b_plus, torus)
        return death, birth
    raise ModelError(f"unknown model type {type(m).__name__}")


def averaged_death_vector(gamma_plus: FiniteConfiguration, am: AveragedModel, torus: Torus) -> np.ndarray:
    m = am.base
    gp = gamma_plus
    n = gp.size
    if isinstance(m, GlauberGlauber):
        return np.ones(n)
    if isinstance(m, BdlpInGlauber):
        return (m.m_plus + am.m_bar
                + _row_interaction(gp.points, gp.points, m.a_minus, torus, exclude_self=True))
    if isinstance(m, BranchingInGlauber):
        e = _row_interaction(gp.points, gp.points, m.kappa, torus, exclude_self=True)
        return m.m_plus * np.exp(e)
    if isinstance(m, TwoBdlp):
        return (m.m_plus + am.phi_bar_minus
                + _row_interaction(gp.points, gp.points, m.b_minus, torus, exclude_self=True))
    raise ModelError(f"unknown model type {type(m).__name__}")


def _averaged_proposal(gamma_plus: FiniteConfiguration, am: AveragedModel, torus: Torus) -> BirthProposal:
    m = am.base
    if isinstance(m, GlauberGlauber):
        comps = []
        mass = m.z_plus * am.lambda_bar * torus.volume
        if mass > 0:
            comps.append(ProposalComponent(kind="uniform", mass=mass))
        phi_p = m.phi_plus

        def accept(x, _gp=gamma_plus):
            return math.exp(-relative_energy(x, _gp, phi_p, torus))

        return BirthProposal(torus=torus, components=tuple(comps), acceptance=accept)
    if isinstance(m, BdlpInGlauber):
        comps = []
        if am.lambda_bar > 0:
            comps.append(ProposalComponent(kind="uniform", mass=am.lambda_bar * torus.volume))
        comps.extend(_kernel_components(gamma_plus.points, m.a_plus, torus))
        return BirthProposal(torus=torus, components=tuple(comps), acceptance=_always_accept)
    if isinstance(m, BranchingInGlauber):
        weights = np.full(gamma_plus.size, am.lambda_bar)
        comps = _kernel_components(gamma_plus.points, m.a_plus, torus, weights=weights)
        return BirthProposal(torus=torus, components=tuple(comps), acceptance=_always_accept)
    if isinstance(m, TwoBdlp):
        comps = []
        if am.phi_bar_plus > 0:
            comps.append(ProposalComponent(kind="uniform", mass=am.phi_bar_plus * torus.volume))
        comps.extend(_kernel_components(gamma_plus.points, m.b_plus, torus))
        return BirthProposal(torus=torus, components=tuple(comps), acceptance=_always_accept)
    raise ModelError(f"unknown model type {type(m).__name__}")
