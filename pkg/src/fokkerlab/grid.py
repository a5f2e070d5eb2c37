"""Grids, density fields, quadrature and finite-difference operators.

Every density-based computation in the package runs on a :class:`Grid1D`.
A grid is uniform in its *computational coordinate*: the node positions
themselves for ``scale="linear"``, their logarithm for ``scale="log"``.
Log grids exist for densities on the positive half-line (geometric Brownian
motion), whose lognormal shape cannot be resolved by a uniform spacing in x
without tens of thousands of nodes.

Quadrature is the composite trapezoidal rule in the computational
coordinate and derivatives are second-order central differences with
one-sided second-order stencils at the ends, so both operators share one
accuracy order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import (
    DegenerateDensityError,
    DomainError,
    NumericError,
    PreconditionError,
    SupportError,
)

#: Densities are clipped at this value before taking logarithms.
FLOOR = 1e-300

#: Minimum number of grid nodes.
MIN_NODES = 8

#: Default half-width of automatically chosen grids, in standard deviations.
DEFAULT_WIDTH_SD = 8.0

#: Default node count of automatically chosen grids.
DEFAULT_NODES = 1025

FULL_LINE = "full-line"
HALF_LINE = "positive-half-line"
SupportKind = Literal["full-line", "positive-half-line"]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Uniformly spaced nodes on ``[lo, hi]`` in linear or log coordinate.

    Attributes:
        lo, hi: endpoints (``lo > 0`` for log grids).
        n: number of nodes.
        scale: ``"linear"`` or ``"log"``.
        nodes: node positions in x.
        h: spacing in the computational coordinate.
        jacobian: dx/d(coordinate) at each node (ones for linear grids).
    """

    lo: float
    hi: float
    n: int
    scale: str = "linear"
    nodes: np.ndarray = field(init=False, repr=False)
    coords: np.ndarray = field(init=False, repr=False)
    h: float = field(init=False, repr=False)
    jacobian: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lo, hi, n = float(self.lo), float(self.hi), self.n
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise DomainError(f"grid endpoints must be finite, got [{lo}, {hi}]")
        if int(n) != n:
            raise DomainError(f"node count must be an integer, got {n!r}")
        n = int(n)
        if lo >= hi:
            raise DomainError(f"grid requires lo < hi, got lo={lo}, hi={hi}")
        if n < MIN_NODES:
            raise DomainError(f"grid requires n >= {MIN_NODES}, got {n}")
        if self.scale == "linear":
            coords = np.linspace(lo, hi, n)
            nodes = coords
            jac = np.ones(n)
        elif self.scale == "log":
            if lo <= 0:
                raise SupportError(f"log grid requires lo > 0, got {lo}")
            coords = np.linspace(math.log(lo), math.log(hi), n)
            nodes = np.exp(coords)
            nodes[0], nodes[-1] = lo, hi
            jac = nodes
        else:
            raise DomainError(f"unknown grid scale {self.scale!r}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "coords", _readonly(coords))
        object.__setattr__(self, "nodes", _readonly(nodes))
        object.__setattr__(self, "jacobian", _readonly(jac))
        object.__setattr__(self, "h", float(coords[1] - coords[0]))

    @property
    def is_log(self) -> bool:
        return self.scale == "log"

    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights in x (sum to ``hi - lo`` for linear grids)."""
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w * self.jacobian

    def __eq__(self, other):
        if not isinstance(other, Grid1D):
            return NotImplemented
        return (self.lo, self.hi, self.n, self.scale) == (other.lo, other.hi, other.n, other.scale)

    def __hash__(self):
        return hash((self.lo, self.hi, self.n, self.scale))


def make_uniform_grid(lo: float, hi: float, n: int) -> Grid1D:
    """Uniform grid with ``n`` nodes on ``[lo, hi]``."""
    return Grid1D(lo, hi, n, "linear")


def make_log_grid(lo: float, hi: float, n: int) -> Grid1D:
    """Grid with ``n`` nodes uniformly spaced in ``log x`` on ``[lo, hi]``, ``lo > 0``."""
    return Grid1D(lo, hi, n, "log")


def full_line_grid(center: float, sd: float, n: int = DEFAULT_NODES,
                   width: float = DEFAULT_WIDTH_SD) -> Grid1D:
    """Linear grid on ``center ± width*sd``."""
    return make_uniform_grid(center - width * sd, center + width * sd, n)


def half_line_grid(x0: float, s: float, n: int = DEFAULT_NODES,
                   width: float = DEFAULT_WIDTH_SD) -> Grid1D:
    """Log grid on ``[x0*exp(-width*s), x0*exp(width*s)]``; ``s`` is a log-scale sd."""
    if x0 <= 0:
        raise SupportError(f"half-line grid needs x0 > 0, got {x0}")
    return make_log_grid(x0 * math.exp(-width * s), x0 * math.exp(width * s), n)


def _check_finite(f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise NumericError("non-finite values in integrand")
    return f


def integrate(f, grid: Grid1D, axis: int = -1) -> float | np.ndarray:
    """Composite trapezoidal rule of node values ``f`` along ``axis``."""
    f = _check_finite(f)
    if f.shape[axis] != grid.n:
        raise DomainError(f"integrand has {f.shape[axis]} nodes, grid has {grid.n}")
    g = np.moveaxis(f, axis, -1) * grid.jacobian
    return np.trapezoid(g, dx=grid.h, axis=-1)


def derivative(f, grid: Grid1D, axis: int = -1) -> np.ndarray:
    """Second-order finite-difference derivative d f / d x along ``axis``."""
    f = _check_finite(f)
    df = np.gradient(f, grid.h, axis=axis, edge_order=2)
    if grid.is_log:
        shape = [1] * f.ndim
        shape[axis] = grid.n
        df = df / grid.nodes.reshape(shape)
    return df


@dataclass(frozen=True, eq=False)
class DensityField:
    """Non-negative node values of a probability density on a grid."""

    grid: Grid1D
    values: np.ndarray
    support_kind: str = FULL_LINE

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise DomainError(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NumericError("density values must be finite")
        if np.any(v < 0):
            raise DomainError(f"density values must be >= 0 (min {v.min():.3e})")
        if self.support_kind not in (FULL_LINE, HALF_LINE):
            raise DomainError(f"unknown support kind {self.support_kind!r}")
        if self.support_kind == HALF_LINE and self.grid.lo <= 0:
            raise SupportError("positive-half-line density needs grid.lo > 0")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def mass(self) -> float:
        return float(integrate(self.values, self.grid))

    def with_values(self, values) -> DensityField:
        return DensityField(self.grid, values, self.support_kind)


def support_for(grid: Grid1D) -> str:
    """Default support tag for fields on ``grid``."""
    return HALF_LINE if grid.is_log else FULL_LINE


def normalize(p: DensityField) -> DensityField:
    """Rescale ``p`` to unit mass."""
    m = p.mass()
    if not m > 0:
        raise DegenerateDensityError(f"cannot normalize density with mass {m}")
    if m == 1.0:
        return p
    return p.with_values(p.values / m)


def check_normalized(p: DensityField, tol: float = 1e-6) -> None:
    m = p.mass()
    if abs(m - 1.0) > tol:
        raise PreconditionError(f"density is not normalized (mass {m:.12g})")


def gaussian_density(mean: float, var: float, grid: Grid1D) -> DensityField:
    """Normalized N(mean, var) sampled on ``grid``."""
    if not var > 0:
        raise DomainError(f"variance must be positive, got {var}")
    sd = math.sqrt(var)
    if grid.lo > mean - 6 * sd or grid.hi < mean + 6 * sd:
        warnings.warn(
            f"grid [{grid.lo}, {grid.hi}] spans fewer than 6 sd around mean {mean}",
            RuntimeWarning, stacklevel=2,
        )
    x = grid.nodes
    v = np.exp(-((x - mean) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)
    return normalize(DensityField(grid, v, support_for(grid)))


def lognormal_density(log_mean: float, log_var: float, grid: Grid1D) -> DensityField:
    """Normalized density of ``exp(N(log_mean, log_var))`` on a grid with ``lo > 0``."""
    if grid.lo <= 0:
        raise SupportError(f"lognormal density needs grid.lo > 0, got {grid.lo}")
    if not log_var > 0:
        raise DomainError(f"log-variance must be positive, got {log_var}")
    x = grid.nodes
    u = np.log(x) - log_mean
    v = np.exp(-u * u / (2 * log_var)) / (x * math.sqrt(2 * math.pi * log_var))
    return normalize(DensityField(grid, v, HALF_LINE))


def mixture_density(weights, means, variances, grid: Grid1D) -> DensityField:
    """Normalized Gaussian mixture on ``grid``."""
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or weights.sum() <= 0:
        raise DomainError("mixture weights must be non-negative with positive sum")
    x = grid.nodes
    v = np.zeros_like(x)
    for w, m, s2 in zip(weights, means, variances):
        if not s2 > 0:
            raise DomainError(f"variance must be positive, got {s2}")
        v += w * np.exp(-((x - m) ** 2) / (2 * s2)) / math.sqrt(2 * math.pi * s2)
    return normalize(DensityField(grid, v, support_for(grid)))


def l1_distance(p: DensityField, q: DensityField) -> float:
    """∫|p - q| on the shared grid."""
    if p.grid != q.grid:
        raise SupportError("L1 distance needs fields on the same grid")
    return float(integrate(np.abs(p.values - q.values), p.grid))


def log_clipped(values) -> np.ndarray:
    """Natural log with values below :data:`FLOOR` clipped."""
    return np.log(np.maximum(values, FLOOR))
