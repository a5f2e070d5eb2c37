"""Euler-Maruyama particle simulation: an independent oracle for grid results.

Particles are processed in fixed-size blocks, each with its own Philox
stream keyed by ``(seed, block index)``. The partition depends only on the
particle count, so the ensemble is bit-identical for any thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import gaussian_kde

from .errors import BandwidthError, BlowUpError, DomainError, PreconditionError, SampleSizeError
from .grid import HALF_LINE, DensityField, Grid1D, normalize, support_for
from .process import SdeModel, TransitionKernel

BLOCK_SIZE = 8192
BLOW_UP = 1e12
TARGETS = ("x0", "log_x0", "score")


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    x0: np.ndarray
    xt: np.ndarray
    t: float
    seed: int
    model_name: str

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float)
        xt = np.array(self.xt, dtype=float)
        if x0.shape != xt.shape or x0.ndim != 1 or x0.size < 2:
            raise DomainError("ensemble needs equal-length 1-D x0 and xt with >= 2 particles")
        if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(xt))):
            raise DomainError("ensemble values must be finite")
        x0.setflags(write=False)
        xt.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "xt", xt)

    def __len__(self):
        return self.x0.size

    def to_csv(self) -> str:
        lines = ["index,x0,xt"]
        lines.extend(f"{i},{a:.17g},{b:.17g}" for i, (a, b) in enumerate(zip(self.x0, self.xt)))
        return "\n".join(lines) + "\n"


def thread_count(default: int = 1) -> int:
    """Thread count, overridden by the FOKKER_LAB_THREADS environment variable."""
    env = os.environ.get("FOKKER_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, int(default))


def _simulate_block(model: SdeModel, x: np.ndarray, t: float, dt: float, seed: int,
                    block: int, offset: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, block]))
    n_steps = max(1, math.ceil(t / dt - 1e-9)) if t > 0 else 0
    d = t / n_steps if n_steps else 0.0
    sqd = math.sqrt(d)
    x = x.copy()
    for k in range(n_steps):
        s = k * d
        z = rng.standard_normal(x.size)
        if model.exact_step is not None:
            x = model.exact_step(x, s, d, z)
        else:
            x = x + model.drift(x, s) * d + model.diffusion(x, s) * sqd * z
        bad = ~np.isfinite(x) | (np.abs(x) > BLOW_UP)
        if np.any(bad):
            i = offset + int(np.argmax(bad))
            raise BlowUpError(f"particle {i} diverged at t={s + d:g}", particle_index=i)
    return x


def simulate(model: SdeModel, x0_samples, t: float, dt: float, seed: int,
             threads: int | None = None) -> ParticleEnsemble:
    """Simulate X_t from the given starting points.

    Uses Euler-Maruyama ``x += a dt + sigma sqrt(dt) Z`` unless the model
    provides an ``exact_step`` override (GBM's exact lognormal update).
    """
    if not dt > 0:
        raise PreconditionError(f"dt must be positive, got {dt}")
    if not t >= 0:
        raise PreconditionError(f"t must be >= 0, got {t}")
    x0 = np.asarray(x0_samples, dtype=float)
    if model.support_kind == HALF_LINE and np.any(x0 <= 0):
        raise DomainError("half-line model needs strictly positive starting points")
    starts = range(0, x0.size, BLOCK_SIZE)
    jobs = [(x0[s:s + BLOCK_SIZE], b, s) for b, s in enumerate(starts)]
    n_threads = thread_count(1 if threads is None else threads)

    def run(job):
        xs, b, s = job
        return _simulate_block(model, xs, t, dt, int(seed), b, s)

    if n_threads == 1 or len(jobs) == 1:
        parts = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(n_threads) as pool:
            parts = list(pool.map(run, jobs))
    xt = np.concatenate(parts) if parts else np.empty(0)
    return ParticleEnsemble(x0, xt, float(t), int(seed), model.name)


def silverman_bandwidth(samples) -> float:
    x = np.asarray(samples, dtype=float)
    return 1.06 * float(np.std(x, ddof=1)) * x.size ** (-0.2)


def kde_density(ensemble: ParticleEnsemble, grid: Grid1D, bandwidth="auto") -> DensityField:
    """Gaussian-kernel density estimate of ``ensemble.xt`` on ``grid``.

    On a log grid the estimate is formed in log x (where the bandwidth is
    measured) and mapped back with the 1/x jacobian, so no kernel mass
    leaks below zero and heavy right tails are not oversmoothed.
    """
    x = ensemble.xt
    if grid.is_log:
        if np.any(x <= 0):
            raise BandwidthError("log-grid estimate needs strictly positive samples")
        x = np.log(x)
    sd = float(np.std(x, ddof=1))
    if not sd > 0:
        raise BandwidthError("ensemble has zero spread; bandwidth undefined")
    bw = silverman_bandwidth(x) if bandwidth == "auto" else float(bandwidth)
    if not bw > 0:
        raise BandwidthError(f"bandwidth must be positive, got {bw}")
    kde = gaussian_kde(x, bw_method=bw / sd)
    if grid.is_log:
        values = kde(grid.coords) / grid.nodes
    else:
        values = kde(grid.nodes)
    return normalize(DensityField(grid, np.maximum(values, 0.0), support_for(grid)))


def _target_values(ensemble: ParticleEnsemble, target: str, kernel: TransitionKernel | None):
    if target == "x0":
        return ensemble.x0
    if target == "log_x0":
        if np.any(ensemble.x0 <= 0):
            raise DomainError("log_x0 target needs positive x0")
        return np.log(ensemble.x0)
    if target == "score":
        if kernel is None:
            raise PreconditionError("score target needs a transition kernel")
        return kernel.score(ensemble.x0, ensemble.xt, ensemble.t)
    raise DomainError(f"unknown target {target!r}; choose from {TARGETS}")


def mc_mmse(ensemble: ParticleEnsemble, target: str = "x0", bins: int = 50,
            kernel: TransitionKernel | None = None, return_stderr: bool = False):
    """Nonparametric estimate of E[(g(X0) - E[g(X0) | Xt])²].

    The conditional mean is piecewise constant on equal-count bins of xt
    and each bin's squared residuals are scaled by m / (m - 1), the usual
    correction for estimating the mean from the same m points. With
    ``return_stderr`` the standard error of the estimate is returned too.
    """
    if bins < 10:
        raise PreconditionError(f"need at least 10 bins, got {bins}")
    n = len(ensemble)
    if n < 100 * bins:
        raise SampleSizeError(f"{n} particles is fewer than 100 per bin for {bins} bins")
    g = np.asarray(_target_values(ensemble, target, kernel), dtype=float)
    order = np.argsort(ensemble.xt, kind="stable")
    resid = np.empty(n)
    for idx in np.array_split(order, bins):
        vals = g[idx]
        resid[idx] = (vals - vals.mean()) * math.sqrt(idx.size / (idx.size - 1))
    sq = resid * resid
    value = float(sq.mean())
    if return_stderr:
        return value, float(sq.std(ddof=1) / math.sqrt(n))
    return value
