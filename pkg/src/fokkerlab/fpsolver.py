"""Conservative implicit integrator for the 1-D Fokker-Planck equation.

    dp/dt = -d(a p)/dx + 1/2 d²(b p)/dx²,   b = sigma².

The equation is discretized in flux form on control volumes centred at the
grid nodes (half volumes at the two ends, so the discrete mass is exactly
the trapezoidal integral). With u = b p the flux is F = -u'/2 + (a/b) u, and
the interface flux uses Chang-Cooper / Scharfetter-Gummel exponential
weighting:

    F_{i+1/2} = [B(-w) u_i - B(w) u_{i+1}] / (2h),   w = 2 h a_m / b_m,

with B(z) = z / (e^z - 1). The weighting keeps the discrete operator an
M-matrix (positivity) and reproduces exponential stationary states such as
the Ornstein-Uhlenbeck Gaussian exactly at the nodes. Both ends are zero
flux, so mass is conserved to round-off.

On log grids the solver evolves q = p x, the density of log X, whose
drift and weight are a/x - b/(2x²) and b/x².
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .errors import PositivityError, PreconditionError, SolverError
from .grid import DensityField, Grid1D, check_normalized, integrate
from .process import SdeModel

SCHEMES = ("crank-nicolson", "implicit-euler")
NEGATIVE_TOL = 1e-12
MASS_TOL = 1e-10


def bernoulli(z: np.ndarray) -> np.ndarray:
    """z / (exp(z) - 1) with the removable singularity at 0 filled in."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    with np.errstate(over="ignore"):
        out = safe / np.expm1(safe)
    return np.where(small, 1.0 - 0.5 * z, out)


def _coordinate_coefficients(model: SdeModel, grid: Grid1D, x: np.ndarray, t: float):
    """Drift and weight of the evolved variable at positions ``x``."""
    a = np.asarray(model.drift(x, t), dtype=float)
    b = np.asarray(model.weight(x, t), dtype=float)
    if grid.is_log:
        return a / x - 0.5 * b / (x * x), b / (x * x)
    return a, b


class _Operator:
    """Tridiagonal flux operator K with dq/dt = -V^{-1} K q at one time."""

    def __init__(self, model: SdeModel, grid: Grid1D, t: float):
        h = grid.h
        xm = grid.coords[:-1] + 0.5 * h
        if grid.is_log:
            xm = np.exp(xm)
        A_m, B_m = _coordinate_coefficients(model, grid, xm, t)
        _, B_n = _coordinate_coefficients(model, grid, grid.nodes, t)
        if not (np.all(np.isfinite(A_m)) and np.all(np.isfinite(B_m)) and np.all(np.isfinite(B_n))):
            raise SolverError(f"non-finite coefficients at t={t:g}")
        if np.any(B_m <= 0) or np.any(B_n <= 0):
            raise SolverError(f"diffusion vanishes or is negative at t={t:g}")
        w = 2.0 * h * A_m / B_m
        alpha = bernoulli(-w) * B_n[:-1] / (2 * h)   # outflow to the right from node i
        beta = bernoulli(w) * B_n[1:] / (2 * h)      # outflow to the left from node i+1
        n = grid.n
        diag = np.zeros(n)
        diag[:-1] += alpha
        diag[1:] += beta
        self.diag = diag
        self.upper = -beta
        self.lower = -alpha
        vol = np.full(n, h)
        vol[0] = vol[-1] = 0.5 * h
        self.vol = vol

    def dt_max(self, scheme: str) -> float:
        if scheme == "implicit-euler":
            return math.inf
        return float(np.min(2.0 * self.vol / self.diag))

    def apply(self, q: np.ndarray) -> np.ndarray:
        """K q for q of shape (n,) or (n, m)."""
        out = self.diag.reshape(-1, *[1] * (q.ndim - 1)) * q
        out[:-1] += self.upper.reshape(-1, *[1] * (q.ndim - 1)) * q[1:]
        out[1:] += self.lower.reshape(-1, *[1] * (q.ndim - 1)) * q[:-1]
        return out

    def banded(self, theta_dt: float) -> np.ndarray:
        ab = np.zeros((3, self.diag.size))
        ab[0, 1:] = theta_dt * self.upper
        ab[1] = self.vol + theta_dt * self.diag
        ab[2, :-1] = theta_dt * self.lower
        return ab


class Stepper:
    """Advances node arrays in the computational variable; caches operators."""

    def __init__(self, model: SdeModel, grid: Grid1D, scheme: str = "crank-nicolson"):
        if scheme not in SCHEMES:
            raise PreconditionError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
        self.model, self.grid, self.scheme = model, grid, scheme
        self._cache = {}

    def operator(self, t: float) -> _Operator:
        key = 0.0 if self.model.time_homogeneous else float(t)
        op = self._cache.get(key)
        if op is None:
            op = _Operator(self.model, self.grid, key)
            if self.model.time_homogeneous:
                self._cache[key] = op
        return op

    def dt_max(self, t: float = 0.0) -> float:
        return self.operator(t).dt_max(self.scheme)

    def to_q(self, p: np.ndarray) -> np.ndarray:
        return p * self.grid.jacobian.reshape(-1, *[1] * (p.ndim - 1))

    def to_p(self, q: np.ndarray) -> np.ndarray:
        return q / self.grid.jacobian.reshape(-1, *[1] * (q.ndim - 1))

    def advance(self, q: np.ndarray, t: float, dt: float) -> np.ndarray:
        """One step of q (computational variable); raises on instability."""
        if self.scheme == "crank-nicolson":
            op = self.operator(t + 0.5 * dt)
            bound = op.dt_max(self.scheme)
            if dt > bound * (1 + 1e-12):
                raise PositivityError(f"dt={dt:.3e} exceeds positivity bound {bound:.3e} at t={t:g}")
            vol = op.vol.reshape(-1, *[1] * (q.ndim - 1))
            rhs = vol * q - 0.5 * dt * op.apply(q)
            ab = op.banded(0.5 * dt)
        else:
            op = self.operator(t + dt)
            vol = op.vol.reshape(-1, *[1] * (q.ndim - 1))
            rhs = vol * q
            ab = op.banded(dt)
        try:
            q_new = solve_banded((1, 1), ab, rhs, check_finite=False)
        except (LinAlgError, ValueError) as exc:
            raise SolverError(f"linear solve failed at t={t:g}: {exc}") from exc
        if not np.all(np.isfinite(q_new)):
            raise SolverError(f"non-finite values after step at t={t:g}")
        low = q_new.min()
        if low < -NEGATIVE_TOL:
            raise PositivityError(f"value {low:.3e} below -{NEGATIVE_TOL:g} at t={t + dt:g}")
        m_in = np.tensordot(op.vol, q, axes=(0, 0))
        m_out = np.tensordot(op.vol, q_new, axes=(0, 0))
        if np.any(np.abs(m_out - m_in) > MASS_TOL * np.maximum(np.abs(m_in), 1e-300)):
            raise SolverError(f"mass not conserved at t={t:g}")
        return np.maximum(q_new, 0.0)


def default_dt(model: SdeModel, grid: Grid1D, scheme: str = "crank-nicolson", t: float = 0.0) -> float:
    """h² / max(b) in the computational coordinate, capped below the positivity bound."""
    stepper = Stepper(model, grid, scheme)
    _, B = _coordinate_coefficients(model, grid, grid.nodes, t)
    dt = grid.h ** 2 / float(np.max(B))
    return min(dt, 0.9 * stepper.dt_max(t))


def dt_max(model: SdeModel, grid: Grid1D, scheme: str = "crank-nicolson", t: float = 0.0) -> float:
    """Largest step for which the scheme is guaranteed positivity preserving."""
    return Stepper(model, grid, scheme).dt_max(t)


def step(model: SdeModel, p: DensityField, t: float, dt: float,
         scheme: str = "crank-nicolson") -> DensityField:
    """Advance ``p`` from ``t`` to ``t + dt``."""
    check_normalized(p)
    if not dt > 0:
        raise PreconditionError(f"dt must be positive, got {dt}")
    stepper = Stepper(model, p.grid, scheme)
    bound = stepper.dt_max(t + (0.5 * dt if scheme == "crank-nicolson" else dt))
    if dt > bound:
        raise PreconditionError(f"dt={dt:.3e} above stability bound {bound:.3e}")
    q = stepper.advance(stepper.to_q(p.values), t, dt)
    return p.with_values(stepper.to_p(q))


@dataclass(frozen=True)
class SolveSpec:
    model: SdeModel
    initial: DensityField
    t_end: float
    dt: float | None = None
    scheme: str = "crank-nicolson"
    snapshot_times: Sequence[float] = ()

    def __post_init__(self):
        snaps = tuple(sorted(float(s) for s in self.snapshot_times))
        object.__setattr__(self, "snapshot_times", snaps)
        if self.scheme not in SCHEMES:
            raise PreconditionError(f"unknown scheme {self.scheme!r}")
        if self.dt is not None and not self.dt > 0:
            raise PreconditionError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise PreconditionError(f"t_end must be >= 0, got {self.t_end}")
        if snaps and (snaps[0] < 0 or snaps[-1] > self.t_end):
            raise PreconditionError("snapshot times must lie in [0, t_end]")
        check_normalized(self.initial)


@dataclass(frozen=True)
class Trajectory:
    times: tuple
    fields: tuple
    mass_log: np.ndarray = field(repr=False)

    def at(self, t: float) -> DensityField:
        """Field recorded at time ``t`` (matched to 1e-12)."""
        for s, f in zip(self.times, self.fields):
            if abs(s - t) <= 1e-12 * max(1.0, abs(t)):
                return f
        raise KeyError(f"no snapshot at t={t}")

    def to_csv(self) -> str:
        lines = ["t,x,p"]
        for s, f in zip(self.times, self.fields):
            ts = format(s, ".17g")
            lines.extend(f"{ts},{x:.17g},{v:.17g}" for x, v in zip(f.x, f.values))
        return "\n".join(lines) + "\n"


def _breakpoints(spec: SolveSpec) -> list:
    pts = sorted({s for s in spec.snapshot_times if s > 0} | {float(spec.t_end)})
    return [p for p in pts if p > 0]


def evolve(stepper: Stepper, q: np.ndarray, t0: float, t1: float, dt: float,
           mass_log: list | None = None, step_offset: int = 0) -> tuple[np.ndarray, int]:
    """Advance q from t0 to t1 in equal steps no longer than ``dt``."""
    span = t1 - t0
    if span <= 0:
        return q, 0
    k = max(1, math.ceil(span / dt - 1e-9))
    d = span / k
    for j in range(k):
        try:
            q = stepper.advance(q, t0 + j * d, d)
        except SolverError as exc:
            raise SolverError(str(exc), step_index=step_offset + j) from exc
        if mass_log is not None:
            mass_log.append(float(np.tensordot(stepper.operator(t0).vol, q, axes=(0, 0))))
    return q, k


def solve(spec: SolveSpec) -> Trajectory:
    """Integrate from t = 0 to ``spec.t_end`` recording the requested snapshots."""
    grid = spec.initial.grid
    stepper = Stepper(spec.model, grid, spec.scheme)
    dt = spec.dt if spec.dt is not None else default_dt(spec.model, grid, spec.scheme)
    bound = stepper.dt_max(0.0)
    if dt > bound:
        raise PreconditionError(f"dt={dt:.3e} above stability bound {bound:.3e}")
    q = stepper.to_q(spec.initial.values)
    times, fields, mass_log = [0.0], [spec.initial], []
    t, n_steps = 0.0, 0
    for tb in _breakpoints(spec):
        q, k = evolve(stepper, q, t, tb, dt, mass_log, n_steps)
        n_steps += k
        t = tb
        times.append(tb)
        fields.append(spec.initial.with_values(stepper.to_p(q)))
    return Trajectory(tuple(times), tuple(fields), np.asarray(mass_log))


def total_mass(p: DensityField) -> float:
    return float(integrate(p.values, p.grid))
