"""Radial interaction profiles with compact support and their integrals.

Profiles are nonnegative and vanish beyond a finite cutoff.  The functionals
needed by the contraction constants are the Mayer masses
beta(f) = integral over R^d of |exp(-f(|x|)) - 1| dx and
beta_neg(f) = integral of (exp(f(|x|)) - 1) dx, together with the L1 and
sup norms of the profile itself.  Radial integrals are evaluated over full
d-space, not the torus; usage on a torus of side L requires cutoff <= L/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy import integrate

from .errors import ModelError

_SURFACE = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}
_EXP_CLIP = 700.0  # exp overflow guard


@dataclass(frozen=True)
class Potential:
    """Radial profile. kind is one of "zero", "step", "exponential", "table".

    step: value height on [0, cutoff], 0 beyond.
    exponential: amplitude * exp(-decay * r) on [0, cutoff], 0 beyond.
    table: linear interpolation through (radii, values), 0 beyond radii[-1].
    """

    kind: str = "zero"
    height: float = 0.0
    amplitude: float = 0.0
    decay: float = 0.0
    cutoff: float = 0.0
    radii: Tuple[float, ...] = ()
    values: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("zero", "step", "exponential", "table"):
            raise ModelError(f"unknown potential kind {self.kind!r}")
        if self.kind == "zero":
            object.__setattr__(self, "cutoff", 0.0)
        elif self.kind == "step":
            if self.height < 0 or self.cutoff <= 0:
                raise ModelError("step potential needs height >= 0 and cutoff > 0")
        elif self.kind == "exponential":
            if self.amplitude < 0 or self.decay < 0 or self.cutoff <= 0:
                raise ModelError("exponential potential needs nonnegative parameters and cutoff > 0")
        else:
            if len(self.radii) < 2 or len(self.radii) != len(self.values):
                raise ModelError("table potential needs matching radii/values, length >= 2")
            r = np.asarray(self.radii)
            if np.any(np.diff(r) <= 0) or r[0] < 0:
                raise ModelError("table radii must be nonnegative and strictly increasing")
            if min(self.values) < 0:
                raise ModelError("table values must be nonnegative")
            object.__setattr__(self, "cutoff", float(self.radii[-1]))

    @classmethod
    def zero(cls) -> "Potential":
        return cls(kind="zero")

    @classmethod
    def step(cls, height: float, cutoff: float) -> "Potential":
        return cls(kind="step", height=height, cutoff=cutoff)

    @classmethod
    def exponential(cls, amplitude: float, decay: float, cutoff: float) -> "Potential":
        return cls(kind="exponential", amplitude=amplitude, decay=decay, cutoff=cutoff)

    @classmethod
    def table(cls, radii, values) -> "Potential":
        return cls(kind="table", radii=tuple(float(r) for r in radii),
                   values=tuple(float(v) for v in values))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.max_value == 0.0

    @property
    def max_value(self) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "step":
            return self.height
        if self.kind == "exponential":
            return self.amplitude
        return max(self.values)

    def __call__(self, r):
        """Profile value at radius r; vectorized; r must be nonnegative."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("radius must be nonnegative")
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "step":
            return np.where(r <= self.cutoff, self.height, 0.0)
        if self.kind == "exponential":
            return np.where(r <= self.cutoff, self.amplitude * np.exp(-self.decay * r), 0.0)
        out = np.interp(r, self.radii, self.values)
        return np.where(r <= self.cutoff, out, 0.0)


@dataclass(frozen=True)
class PotentialFunctionals:
    beta: float       # integral of |exp(-f) - 1|
    beta_neg: float   # integral of (exp(f) - 1); may be +inf on overflow
    l1: float         # integral of f
    linf: float       # sup of f


def _radial_integral(fn, pot: Potential, dim: int) -> float:
    """Surface-weighted integral of fn(f(r)) r^{d-1} dr over [0, cutoff]."""
    if pot.cutoff == 0.0:
        return 0.0
    pts = None
    if pot.kind == "table":
        pts = [r for r in pot.radii if 0 < r < pot.cutoff]
    val, _ = integrate.quad(
        lambda r: fn(float(pot(r))) * r ** (dim - 1),
        0.0, pot.cutoff,
        points=pts, limit=200, epsabs=1e-13, epsrel=1e-11,
    )
    return _SURFACE[dim] * val


@lru_cache(maxsize=None)
def potential_functionals(pot: Potential, dim: int) -> PotentialFunctionals:
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    beta = _radial_integral(lambda f: 1.0 - math.exp(-f), pot, dim)
    if pot.max_value > _EXP_CLIP:
        beta_neg = math.inf
    else:
        beta_neg = _radial_integral(lambda f: math.expm1(f), pot, dim)
    l1 = _radial_integral(lambda f: f, pot, dim)
    return PotentialFunctionals(beta=beta, beta_neg=beta_neg, l1=l1, linf=pot.max_value)


def beta_integral(pot: Potential, dim: int, sign: str = "+") -> float:
    """Mayer mass of the profile over R^d.

    sign "+" gives integral of |exp(-f)-1| (repulsive direction), sign "-"
    gives integral of (exp(f)-1), which is the quantity that must stay
    finite for birth kernels entering through a positive exponent.
    """
    fns = potential_functionals(pot, dim)
    if sign == "+":
        return fns.beta
    if sign == "-":
        return fns.beta_neg
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def relative_energy(x, cfg, pot: Potential, torus) -> float:
    """Sum of pot(|x - y|) over the points y of cfg (minimal image)."""
    from .geometry import pairwise_distances

    if cfg.size == 0 or pot.is_zero:
        return 0.0
    d = pairwise_distances(np.asarray(x, dtype=float)[None, :], cfg.points, torus)[0]
    return float(np.sum(pot(d)))


def mayer(pot: Potential, r):
    """exp(-f(r)) - 1, vectorized; lies in [exp(-max)-1, 0] for f >= 0."""
    return np.expm1(-pot(r))


@lru_cache(maxsize=None)
def _radial_cdf_table(pot: Potential, dim: int, n: int = 4096):
    """Cumulative radial mass of the kernel, for offset sampling."""
    r = np.linspace(0.0, pot.cutoff, n)
    dens = pot(r) * r ** (dim - 1)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(r))])
    total = cdf[-1]
    if total <= 0:
        raise ModelError("cannot sample offsets from a kernel with zero mass")
    return r, cdf / total


def sample_kernel_offsets(pot: Potential, dim: int, rng: np.random.Generator, n: int) -> np.ndarray:
    """n displacement vectors with density proportional to pot(|u|), shape (n, dim).

    Step kernels use the exact power-law radius; other profiles invert a
    dense tabulated radial distribution function.
    """
    if pot.is_zero:
        raise ModelError("cannot sample offsets from a zero kernel")
    if pot.kind == "step":
        radius = pot.cutoff * rng.uniform(size=n) ** (1.0 / dim)
    else:
        grid, cdf = _radial_cdf_table(pot, dim)
        radius = np.interp(rng.uniform(size=n), cdf, grid)
    if dim == 1:
        direction = np.where(rng.uniform(size=(n, 1)) < 0.5, -1.0, 1.0)
    else:
        direction = rng.normal(size=(n, dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * radius[:, None]
