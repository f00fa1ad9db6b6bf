"""Discretized correlation functions on a periodic lattice.

Correlation functions of order n are reduced by translation invariance to
functions of n-1 offsets, stored on the lattice of cell centers of a uniform
grid over the torus.  Orders up to 3 are supported:

    k0          scalar (1 for a state, 0 for increments)
    k1          scalar density
    k2[j]       pair function at separation offsets[j]
    k3[j, l]    triple function at separations (offsets[j], offsets[l])

Integrals against radial factors use midpoint values rescaled so the total
lattice mass matches the exact radial integral (mass correction).  Values at
fixed separations stay pointwise.  That split keeps constant-table integrals
exact, which the averaging identities rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigError, EvaluationError
from .geometry import Torus, min_image_diff
from .potentials import Potential, potential_functionals


@dataclass(frozen=True)
class GridSpec:
    torus: Torus
    points_per_axis: int

    def __post_init__(self):
        if self.points_per_axis < 2:
            raise ConfigError("points_per_axis must be at least 2")

    @property
    def h(self) -> float:
        return self.torus.side / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.h ** self.torus.dim

    @property
    def num_cells(self) -> int:
        return self.points_per_axis ** self.torus.dim

    @property
    def offsets(self) -> np.ndarray:
        return _offsets(self)

    @property
    def distances(self) -> np.ndarray:
        """Minimal-image distance of each offset from the origin."""
        return _distances(self)

    @property
    def diff_index(self) -> np.ndarray:
        """diff_index[j, l] is the flat index of offset[j] - offset[l]."""
        return _diff_index(self)

    def index_of(self, lattice_point) -> int:
        m = np.mod(np.asarray(lattice_point, dtype=int), self.points_per_axis)
        return int(np.ravel_multi_index(tuple(m), (self.points_per_axis,) * self.torus.dim))


@lru_cache(maxsize=64)
def _lattice(grid: GridSpec) -> np.ndarray:
    n, d = grid.points_per_axis, grid.torus.dim
    axes = [np.arange(n)] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    out = np.stack([m.ravel() for m in mesh], axis=1)
    out.flags.writeable = False
    return out


@lru_cache(maxsize=64)
def _offsets(grid: GridSpec) -> np.ndarray:
    out = _lattice(grid).astype(float) * grid.h
    out.flags.writeable = False
    return out


@lru_cache(maxsize=64)
def _distances(grid: GridSpec) -> np.ndarray:
    delta = min_image_diff(_offsets(grid), grid.torus.side)
    out = np.sqrt(np.sum(delta * delta, axis=1))
    out.flags.writeable = False
    return out


@lru_cache(maxsize=16)
def _diff_index(grid: GridSpec) -> np.ndarray:
    lat = _lattice(grid)
    n = grid.points_per_axis
    diff = np.mod(lat[:, None, :] - lat[None, :, :], n)
    flat = np.ravel_multi_index(
        tuple(diff[..., i] for i in range(grid.torus.dim)),
        (n,) * grid.torus.dim,
    ).astype(np.int32)
    flat.flags.writeable = False
    return flat


def validate_grid_for_model(grid: GridSpec, potentials: dict):
    """Resolution check: every finite-range profile must span at least two
    cells, else its lattice footprint cannot represent the interaction."""
    for name, pot in potentials.items():
        if pot.is_zero:
            continue
        if pot.cutoff > 0 and grid.h > pot.cutoff / 2 + 1e-12:
            raise ConfigError(
                f"grid spacing {grid.h:.6g} exceeds half the cutoff of potential "
                f"{name} ({pot.cutoff:.6g}); refine the grid"
            )


# ---------------------------------------------------------------------------
# stencils

def pointwise_stencil(grid: GridSpec, pot: Potential) -> np.ndarray:
    """pot evaluated at the offset distances; for fixed-separation factors."""
    return pot(grid.distances)


def _corrected(grid: GridSpec, raw: np.ndarray, target: float) -> np.ndarray:
    mass = float(np.sum(raw)) * grid.cell_volume
    scale_floor = 1e-12 * (float(np.max(np.abs(raw))) + 1.0) * grid.cell_volume * len(raw)
    if abs(mass) <= scale_floor:
        return raw
    return raw * (target / mass)


def kernel_stencil(grid: GridSpec, pot: Potential) -> np.ndarray:
    """pot at offset distances, rescaled so lattice mass equals the L1 norm."""
    raw = pot(grid.distances)
    if pot.is_zero:
        return raw
    target = potential_functionals(pot, grid.torus.dim).l1
    return _corrected(grid, raw, target)


def mayer_stencil(grid: GridSpec, pot: Potential) -> np.ndarray:
    """exp(-pot) - 1 at offset distances; lattice mass equals -beta exactly."""
    raw = np.expm1(-pot(grid.distances))
    if pot.is_zero:
        return raw
    target = -potential_functionals(pot, grid.torus.dim).beta
    return _corrected(grid, raw, target)


def positive_mayer_stencil(grid: GridSpec, pot: Potential) -> np.ndarray:
    """exp(+pot) - 1 at offset distances; lattice mass equals the positive
    Mayer integral."""
    raw = np.expm1(pot(grid.distances))
    if pot.is_zero:
        return raw
    target = potential_functionals(pot, grid.torus.dim).beta_neg
    if not math.isfinite(target):
        raise EvaluationError("positive Mayer mass diverges for this profile")
    return _corrected(grid, raw, target)


# ---------------------------------------------------------------------------
# correlation tables

class CorrelationTable:
    """Translation-reduced correlation data up to a fixed order (1..3)."""

    __slots__ = ("grid", "order", "k0", "k1", "k2", "k3")

    def __init__(self, grid: GridSpec, order: int, k0: float, k1: float,
                 k2: Optional[np.ndarray] = None, k3: Optional[np.ndarray] = None):
        if order not in (1, 2, 3):
            raise ConfigError("table order must be 1, 2 or 3")
        p = grid.num_cells
        self.grid = grid
        self.order = order
        self.k0 = float(k0)
        self.k1 = float(k1)
        if order >= 2:
            k2 = np.zeros(p) if k2 is None else np.asarray(k2, dtype=float)
            if k2.shape != (p,):
                raise ConfigError(f"k2 must have shape ({p},)")
            self.k2 = k2
        else:
            self.k2 = None
        if order >= 3:
            k3 = np.zeros((p, p)) if k3 is None else np.asarray(k3, dtype=float)
            if k3.shape != (p, p):
                raise ConfigError(f"k3 must have shape ({p}, {p})")
            self.k3 = k3
        else:
            self.k3 = None

    # -- factories ---------------------------------------------------------

    @classmethod
    def zeros(cls, grid: GridSpec, order: int) -> "CorrelationTable":
        return cls(grid, order, k0=0.0, k1=0.0)

    @classmethod
    def delta_empty(cls, grid: GridSpec, order: int) -> "CorrelationTable":
        """Correlation data of the empty-configuration state."""
        return cls(grid, order, k0=1.0, k1=0.0)

    @classmethod
    def poisson(cls, grid: GridSpec, order: int, rho: float) -> "CorrelationTable":
        p = grid.num_cells
        k2 = np.full(p, rho ** 2) if order >= 2 else None
        k3 = np.full((p, p), rho ** 3) if order >= 3 else None
        return cls(grid, order, k0=1.0, k1=rho, k2=k2, k3=k3)

    # -- plumbing ----------------------------------------------------------

    def copy(self) -> "CorrelationTable":
        return CorrelationTable(
            self.grid, self.order, self.k0, self.k1,
            None if self.k2 is None else self.k2.copy(),
            None if self.k3 is None else self.k3.copy(),
        )

    def as_vector(self) -> np.ndarray:
        parts = [np.array([self.k0, self.k1])]
        if self.order >= 2:
            parts.append(self.k2.ravel())
        if self.order >= 3:
            parts.append(self.k3.ravel())
        return np.concatenate(parts)

    @classmethod
    def from_vector(cls, template: "CorrelationTable", vec: np.ndarray) -> "CorrelationTable":
        p = template.grid.num_cells
        k0, k1 = float(vec[0]), float(vec[1])
        pos = 2
        k2 = k3 = None
        if template.order >= 2:
            k2 = vec[pos:pos + p].copy()
            pos += p
        if template.order >= 3:
            k3 = vec[pos:pos + p * p].reshape(p, p).copy()
            pos += p * p
        return cls(template.grid, template.order, k0, k1, k2, k3)

    def sup_by_order(self) -> Tuple[float, ...]:
        out = [abs(self.k0), abs(self.k1)]
        if self.order >= 2:
            out.append(float(np.max(np.abs(self.k2))) if self.k2.size else 0.0)
        if self.order >= 3:
            out.append(float(np.max(np.abs(self.k3))) if self.k3.size else 0.0)
        return tuple(out)

    def kc_norm(self, c: float) -> float:
        """Weighted sup norm: max over orders n of sup|k_n| / c^n."""
        if c <= 0:
            raise ValueError("norm weight c must be positive")
        sups = self.sup_by_order()
        return max(s / c ** n for n, s in enumerate(sups))

    def max_abs(self) -> float:
        return max(self.sup_by_order())


def radial_profile(grid: GridSpec, values: np.ndarray, bins: int = 32):
    """Average a lattice field over shells of equal separation distance.

    Returns (r, mean, count) arrays for the nonempty shells, sorted by r.
    Exact-distance grouping is used when few distinct distances exist.
    """
    d = grid.distances
    vals = np.asarray(values, dtype=float)
    uniq = np.unique(np.round(d, 12))
    if len(uniq) <= bins:
        r, mean, count = [], [], []
        for u in uniq:
            sel = np.isclose(d, u, atol=1e-10)
            r.append(u)
            mean.append(float(np.mean(vals[sel])))
            count.append(int(np.sum(sel)))
        return np.array(r), np.array(mean), np.array(count)
    edges = np.linspace(0.0, float(np.max(d)) + 1e-12, bins + 1)
    idx = np.clip(np.digitize(d, edges) - 1, 0, bins - 1)
    r, mean, count = [], [], []
    for b in range(bins):
        sel = idx == b
        if not np.any(sel):
            continue
        r.append(float(np.mean(d[sel])))
        mean.append(float(np.mean(vals[sel])))
        count.append(int(np.sum(sel)))
    return np.array(r), np.array(mean), np.array(count)


# ---------------------------------------------------------------------------
# exponential Mayer functional

def exp_mayer_functional(table: CorrelationTable, pot: Potential) -> Tuple[float, float]:
    """Averaged damping factor: the expansion of
    E[prod over environment points y of exp(-pot(x - y))] in correlation
    orders, truncated at the table's order.

    Returns (value, tail_bound).  The tail bound covers the dropped orders
    under a geometric envelope fitted to the stored ones; for a Poisson
    table of density rho the value converges to exp(-rho * beta).
    """
    grid = table.grid
    if pot.is_zero:
        return 1.0, 0.0
    w = mayer_stencil(grid, pot) * grid.cell_volume
    beta_hat = abs(float(np.sum(w)))

    value = table.k0
    value += table.k1 * float(np.sum(w))
    if table.order >= 2:
        m2 = table.k2[grid.diff_index]
        value += 0.5 * float(w @ m2 @ w)
    if table.order >= 3:
        di = grid.diff_index
        acc = 0.0
        for j in range(grid.num_cells):
            if w[j] == 0.0:
                continue
            rows = di[:, j]
            block = table.k3[np.ix_(rows, rows)]
            acc += w[j] * float(w @ block @ w)
        value += acc / 6.0

    sups = table.sup_by_order()
    c = 0.0
    for n in range(1, len(sups)):
        if sups[n] > 0:
            c = max(c, sups[n] ** (1.0 / n))
    if c <= 0 or beta_hat <= 0:
        return value, 0.0
    big_k = max(s / c ** n for n, s in enumerate(sups))
    x = c * beta_hat
    partial = sum(x ** n / math.factorial(n) for n in range(table.order + 1))
    tail = big_k * (math.exp(x) - partial)
    return value, tail
